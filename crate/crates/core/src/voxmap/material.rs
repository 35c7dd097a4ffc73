use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Surface material classes, plus `Other` for low-confidence or unknown material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MaterialLabel {
    Cardboard,
    Ceramic,
    Cloth,
    Glass,
    Metal,
    Paper,
    Plastic,
    Rubber,
    Sponge,
    Wood,
    Other,
}

impl MaterialLabel {
    pub const COUNT: usize = 11;

    /// Every label, in id order.
    pub const ALL: [MaterialLabel; 11] = [
        MaterialLabel::Cardboard,
        MaterialLabel::Ceramic,
        MaterialLabel::Cloth,
        MaterialLabel::Glass,
        MaterialLabel::Metal,
        MaterialLabel::Paper,
        MaterialLabel::Plastic,
        MaterialLabel::Rubber,
        MaterialLabel::Sponge,
        MaterialLabel::Wood,
        MaterialLabel::Other,
    ];

    /// The ten classifier classes (everything but `Other`).
    pub const CLASSES: [MaterialLabel; 10] = [
        MaterialLabel::Cardboard,
        MaterialLabel::Ceramic,
        MaterialLabel::Cloth,
        MaterialLabel::Glass,
        MaterialLabel::Metal,
        MaterialLabel::Paper,
        MaterialLabel::Plastic,
        MaterialLabel::Rubber,
        MaterialLabel::Sponge,
        MaterialLabel::Wood,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MaterialLabel::Cardboard => "cardboard",
            MaterialLabel::Ceramic => "ceramic",
            MaterialLabel::Cloth => "cloth",
            MaterialLabel::Glass => "glass",
            MaterialLabel::Metal => "metal",
            MaterialLabel::Paper => "paper",
            MaterialLabel::Plastic => "plastic",
            MaterialLabel::Rubber => "rubber",
            MaterialLabel::Sponge => "sponge",
            MaterialLabel::Wood => "wood",
            MaterialLabel::Other => "other",
        }
    }

    /// Parses a material name, mapping anything unrecognized to `Other`
    /// with a warning.
    pub fn parse_lenient(s: &str) -> Self {
        s.parse().unwrap_or_else(|_| {
            log::warn!("unknown material '{s}', using 'other'");
            MaterialLabel::Other
        })
    }
}

impl fmt::Display for MaterialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMaterial(pub String);

impl fmt::Display for UnknownMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown material '{}'", self.0)
    }
}

impl std::error::Error for UnknownMaterial {}

impl FromStr for MaterialLabel {
    type Err = UnknownMaterial;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        MaterialLabel::ALL
            .iter()
            .copied()
            .find(|m| m.name() == lower)
            .ok_or_else(|| UnknownMaterial(s.to_string()))
    }
}

impl Serialize for MaterialLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MaterialLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(MaterialLabel::parse_lenient(&s))
    }
}
