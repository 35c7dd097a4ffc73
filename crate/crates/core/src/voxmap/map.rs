use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{PlyData, Point3, PointCloud};
use crate::scalar::Real;
use crate::voxmap::{nearest_box_index, BBox3D, MaterialLabel, Segmentation};

const DEFAULT_PALETTE: &str = include_str!("../../data/palette.toml");

/// Total, injective map from material label to display color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    colors: [[u8; 3]; MaterialLabel::COUNT],
}

#[derive(Deserialize)]
struct PaletteFile {
    palette: BTreeMap<String, [u8; 3]>,
}

impl Palette {
    pub fn new(colors: [[u8; 3]; MaterialLabel::COUNT]) -> Result<Self> {
        for i in 0..colors.len() {
            for j in i + 1..colors.len() {
                if colors[i] == colors[j] {
                    return Err(Error::Config(format!(
                        "palette maps {} and {} to the same color",
                        MaterialLabel::ALL[i],
                        MaterialLabel::ALL[j]
                    )));
                }
            }
        }
        Ok(Self { colors })
    }

    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let file: PaletteFile =
            toml::from_str(text).map_err(|e| Error::parse(path, toml_line(text, &e), e.message().to_string()))?;
        let mut colors = [None; MaterialLabel::COUNT];
        for (name, rgb) in &file.palette {
            let m: MaterialLabel = name
                .parse()
                .map_err(|_| Error::Config(format!("{}: unknown material '{name}' in palette", path.display())))?;
            colors[m.id() as usize] = Some(*rgb);
        }
        let mut out = [[0u8; 3]; MaterialLabel::COUNT];
        for (i, c) in colors.iter().enumerate() {
            out[i] = c.ok_or_else(|| {
                Error::Config(format!("{}: palette lacks '{}'", path.display(), MaterialLabel::ALL[i]))
            })?;
        }
        Self::new(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn color(&self, m: MaterialLabel) -> [u8; 3] {
        self.colors[m.id() as usize]
    }

    /// Inverse lookup.
    pub fn material_of(&self, rgb: [u8; 3]) -> Option<MaterialLabel> {
        self.colors.iter().position(|&c| c == rgb).and_then(|i| MaterialLabel::from_id(i as u8))
    }
}

impl Default for Palette {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_PALETTE, Path::new("palette.toml")).expect("bundled palette is valid")
    }
}

pub(crate) fn toml_line(text: &str, e: &toml::de::Error) -> usize {
    e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1)
}

/// What a cluster was labeled with.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabel {
    pub material: MaterialLabel,
    pub object_label: Option<String>,
    /// Box the label came from, if any.
    pub box_id: Option<u32>,
}

/// Clustered, material-labeled point cloud. The cloud's colors are the
/// display colors of each point's material.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap<T> {
    cloud: PointCloud<T>,
    cluster_ids: Vec<Option<u32>>,
    materials: Vec<MaterialLabel>,
    clusters: Vec<ClusterLabel>,
}

impl<T: Real> SemanticMap<T> {
    pub fn empty() -> Self {
        Self {
            cloud: PointCloud::empty(),
            cluster_ids: Vec::new(),
            materials: Vec::new(),
            clusters: Vec::new(),
        }
    }

    /// Builds a map from per-cluster labels; unassigned points get `Other`.
    pub fn from_clusters(points: Vec<Point3<T>>, seg: &Segmentation, clusters: Vec<ClusterLabel>, palette: &Palette) -> Result<Self> {
        if seg.len() != points.len() {
            return Err(Error::Shape(format!("segmentation covers {} of {} points", seg.len(), points.len())));
        }
        if clusters.len() != seg.num_clusters() as usize {
            return Err(Error::Shape(format!("{} cluster labels for {} clusters", clusters.len(), seg.num_clusters())));
        }
        let materials: Vec<MaterialLabel> = seg
            .labels()
            .iter()
            .map(|c| c.map_or(MaterialLabel::Other, |c| clusters[c as usize].material))
            .collect();
        let colors = materials.iter().map(|&m| palette.color(m)).collect();
        Ok(Self {
            cloud: PointCloud::new(points, Some(colors))?,
            cluster_ids: seg.labels().to_vec(),
            materials,
            clusters,
        })
    }

    /// Rebuilds a map from a PLY that carries `material_id` and `cluster_id`.
    pub fn from_ply(ply: PlyData<T>, palette: &Palette) -> Result<Self> {
        let n = ply.cloud.len();
        let mats = ply
            .material_ids
            .ok_or_else(|| Error::InvalidInput("PLY lacks material_id".into()))?;
        let raw = ply.cluster_ids.unwrap_or_else(|| vec![-1; n]);
        let materials = mats
            .iter()
            .map(|&id| MaterialLabel::from_id(id).ok_or_else(|| Error::InvalidInput(format!("material id {id} out of range"))))
            .collect::<Result<Vec<_>>>()?;
        // renumber cluster ids densely in first-seen order
        let mut remap: BTreeMap<i32, u32> = BTreeMap::new();
        let mut clusters: Vec<ClusterLabel> = Vec::new();
        let mut cluster_ids = Vec::with_capacity(n);
        for (i, &c) in raw.iter().enumerate() {
            if c < 0 {
                cluster_ids.push(None);
                continue;
            }
            let next = remap.len() as u32;
            let id = *remap.entry(c).or_insert_with(|| {
                clusters.push(ClusterLabel {
                    material: materials[i],
                    object_label: None,
                    box_id: None,
                });
                next
            });
            if clusters[id as usize].material != materials[i] {
                return Err(Error::InvalidInput(format!("cluster {c} mixes materials")));
            }
            cluster_ids.push(Some(id));
        }
        let mut cloud = ply.cloud;
        cloud.set_colors(materials.iter().map(|&m| palette.color(m)).collect())?;
        Ok(Self {
            cloud,
            cluster_ids,
            materials,
            clusters,
        })
    }

    pub fn cloud(&self) -> &PointCloud<T> {
        &self.cloud
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn cluster_ids(&self) -> &[Option<u32>] {
        &self.cluster_ids
    }

    pub fn materials(&self) -> &[MaterialLabel] {
        &self.materials
    }

    pub fn clusters(&self) -> &[ClusterLabel] {
        &self.clusters
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        self.cloud.colors().unwrap_or(&[])
    }

    pub fn object_label(&self, point: usize) -> Option<&str> {
        self.cluster_ids[point].and_then(|c| self.clusters[c as usize].object_label.as_deref())
    }

    /// Checks label coherence and palette consistency.
    pub fn check_invariants(&self, palette: &Palette) -> Result<()> {
        for (i, (&m, c)) in self.materials.iter().zip(&self.cluster_ids).enumerate() {
            if let Some(c) = c {
                if self.clusters[*c as usize].material != m {
                    return Err(Error::InvalidInput(format!("point {i} disagrees with its cluster material")));
                }
            }
            if self.colors().get(i) != Some(&palette.color(m)) {
                return Err(Error::InvalidInput(format!("point {i} color does not match its material")));
            }
        }
        Ok(())
    }
}

/// Labels each cluster with the material of the box nearest its centroid,
/// or `Other` when that box is farther than `cutoff`.
pub fn propagate_labels<T: Real>(
    seg: &Segmentation,
    cloud: &PointCloud<T>,
    boxes: &[BBox3D<T>],
    cutoff: T,
    palette: &Palette,
) -> Result<SemanticMap<T>> {
    if seg.len() != cloud.len() {
        return Err(Error::Shape(format!("segmentation covers {} of {} points", seg.len(), cloud.len())));
    }
    if boxes.is_empty() && seg.num_clusters() > 0 {
        log::warn!("no boxes to propagate from; all {} clusters labeled other", seg.num_clusters());
    }
    let k = seg.num_clusters() as usize;
    let mut sums = vec![(Point3::origin(), 0usize); k];
    for (p, c) in cloud.points().iter().zip(seg.labels()) {
        if let Some(c) = c {
            let s = &mut sums[*c as usize];
            s.0 = s.0 + *p;
            s.1 += 1;
        }
    }
    let clusters = sums
        .iter()
        .map(|&(sum, n)| {
            let centroid = sum * (T::one() / T::lit(n as f64));
            match nearest_box_index(&centroid, boxes) {
                Some((i, d)) if d <= cutoff => ClusterLabel {
                    material: boxes[i].material,
                    object_label: Some(boxes[i].object_label.clone()),
                    box_id: Some(boxes[i].box_id),
                },
                _ => ClusterLabel {
                    material: MaterialLabel::Other,
                    object_label: None,
                    box_id: None,
                },
            }
        })
        .collect();
    SemanticMap::from_clusters(cloud.points().to_vec(), seg, clusters, palette)
}

/// Recolors every point from its material. Geometry and labels are untouched.
pub fn colorize<T: Real>(map: &SemanticMap<T>, palette: &Palette) -> SemanticMap<T> {
    let mut out = map.clone();
    out.cloud
        .set_colors(map.materials.iter().map(|&m| palette.color(m)).collect())
        .expect("one color per point");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wood_box() -> BBox3D<f64> {
        BBox3D::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0), MaterialLabel::Wood, 0)
            .unwrap()
            .with_label("desk")
    }

    #[test]
    fn default_palette_is_total_and_injective() {
        let p = Palette::default();
        let mut seen = std::collections::HashSet::new();
        for m in MaterialLabel::ALL {
            assert!(seen.insert(p.color(m)));
            assert_eq!(p.material_of(p.color(m)), Some(m));
        }
    }

    #[test]
    fn palette_errors() {
        let dup = DEFAULT_PALETTE.replace("[130, 140, 150]", "[120, 70, 20]");
        assert!(matches!(Palette::from_toml_str(&dup, Path::new("p")), Err(Error::Config(_))));
        let missing = DEFAULT_PALETTE.replace("sponge = [250, 220, 40]\n", "");
        assert!(Palette::from_toml_str(&missing, Path::new("p")).is_err());
        assert!(matches!(Palette::from_toml_str("[palette\n", Path::new("p")), Err(Error::Parse { .. })));
    }

    #[test]
    fn one_cluster_one_box() {
        let cloud = PointCloud::from_points(vec![Point3::new(0.5, 0.5, 0.5), Point3::new(0.6, 0.5, 0.5)]).unwrap();
        let seg = Segmentation::new(vec![Some(0), Some(0)]).unwrap();
        let pal = Palette::default();
        let map = propagate_labels(&seg, &cloud, &[wood_box()], 0.5, &pal).unwrap();
        assert_eq!(map.materials(), &[MaterialLabel::Wood, MaterialLabel::Wood]);
        assert_eq!(map.object_label(0), Some("desk"));
        map.check_invariants(&pal).unwrap();
    }

    #[test]
    fn beyond_cutoff_is_other() {
        let cloud = PointCloud::from_points(vec![Point3::new(2.0, 0.5, 0.5)]).unwrap();
        let seg = Segmentation::new(vec![Some(0)]).unwrap();
        let map = propagate_labels(&seg, &cloud, &[wood_box()], 0.5, &Palette::default()).unwrap();
        assert_eq!(map.clusters()[0].material, MaterialLabel::Other);
        let near = PointCloud::from_points(vec![Point3::new(1.4, 0.5, 0.5)]).unwrap();
        let map = propagate_labels(&seg, &near, &[wood_box()], 0.5, &Palette::default()).unwrap();
        assert_eq!(map.clusters()[0].material, MaterialLabel::Wood);
        let map = propagate_labels(&seg, &near, &[], 0.5, &Palette::default()).unwrap();
        assert_eq!(map.clusters()[0].material, MaterialLabel::Other);
    }

    #[test]
    fn colorize_is_idempotent_and_injective() {
        let pal = Palette::default();
        let cloud = PointCloud::from_points(vec![Point3::new(0.5, 0.5, 0.5), Point3::new(5.0, 0.5, 0.5)]).unwrap();
        let seg = Segmentation::new(vec![Some(0), Some(1)]).unwrap();
        let map = propagate_labels(&seg, &cloud, &[wood_box()], 0.5, &pal).unwrap();
        let once = colorize(&map, &pal);
        let twice = colorize(&once, &pal);
        assert_eq!(once, twice);
        let distinct: std::collections::HashSet<_> = once.colors().iter().collect();
        assert_eq!(distinct.len(), 2);

        let all_wood = SemanticMap::from_clusters(
            cloud.points().to_vec(),
            &Segmentation::new(vec![Some(0), Some(0)]).unwrap(),
            vec![ClusterLabel { material: MaterialLabel::Wood, object_label: None, box_id: None }],
            &pal,
        )
        .unwrap();
        assert!(colorize(&all_wood, &pal).colors().iter().all(|&c| c == pal.color(MaterialLabel::Wood)));
    }
}
