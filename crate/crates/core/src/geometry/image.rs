//! Depth (binary PGM, 16-bit) and color (binary PPM) images.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 16-bit depth in millimeters, 0 meaning missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    values: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32, values: Vec<u16>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::Shape(format!(
                "depth image {width}x{height} needs {} values, got {}",
                width as usize * height as usize,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> u16 {
        self.values[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, mm: u16) {
        self.values[v as usize * self.width as usize + u as usize] = mm;
    }

    /// Binary PGM (P5), maxval 65535, big-endian samples.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n65535\n", self.width, self.height).into_bytes();
        out.reserve(self.values.len() * 2);
        for v in &self.values {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out
    }

    pub fn from_pgm(bytes: &[u8], path: &Path) -> Result<Self> {
        let (header, body) = parse_pnm_header(bytes, b"P5", path)?;
        let n = header.width as usize * header.height as usize;
        let values = if header.maxval > 255 {
            if body.len() < n * 2 {
                return Err(Error::parse(path, header.lines, "truncated PGM sample data"));
            }
            body[..n * 2]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        } else {
            if body.len() < n {
                return Err(Error::parse(path, header.lines, "truncated PGM sample data"));
            }
            body[..n].iter().map(|&b| b as u16).collect()
        };
        Self::new(header.width, header.height, values)
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm(&bytes, path)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// 8-bit RGB, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Shape(format!(
                "rgb image {width}x{height} needs {} pixels, got {}",
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> [u8; 3] {
        self.pixels[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, c: [u8; 3]) {
        self.pixels[v as usize * self.width as usize + u as usize] = c;
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn from_ppm(bytes: &[u8], path: &Path) -> Result<Self> {
        let (header, body) = parse_pnm_header(bytes, b"P6", path)?;
        if header.maxval > 255 {
            return Err(Error::parse(path, header.lines, "16-bit PPM not supported"));
        }
        let n = header.width as usize * header.height as usize;
        if body.len() < n * 3 {
            return Err(Error::parse(path, header.lines, "truncated PPM pixel data"));
        }
        let pixels = body[..n * 3].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Self::new(header.width, header.height, pixels)
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_ppm(&bytes, path)
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

struct PnmHeader {
    width: u32,
    height: u32,
    maxval: u32,
    /// line number the header ends on
    lines: usize,
}

fn parse_pnm_header<'a>(bytes: &'a [u8], magic: &[u8], path: &Path) -> Result<(PnmHeader, &'a [u8])> {
    let mut pos = 0;
    let mut line = 1;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                b'\n' => {
                    line += 1;
                    pos += 1;
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        if pos >= bytes.len() {
            return Err(Error::parse(path, line, "truncated image header"));
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push((&bytes[start..pos], line));
    }
    // exactly one whitespace byte separates maxval from the samples
    if pos >= bytes.len() {
        return Err(Error::parse(path, line, "missing image data"));
    }
    pos += 1;

    let (m, _) = tokens[0];
    if m != magic {
        return Err(Error::parse(
            path,
            1,
            format!(
                "expected magic {}, found {}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(m)
            ),
        ));
    }
    let num = |i: usize, what: &str| -> Result<u32> {
        let (tok, ln) = tokens[i];
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&v: &u32| v > 0)
            .ok_or_else(|| Error::parse(path, ln, format!("invalid {what}")))
    };
    let header = PnmHeader {
        width: num(1, "width")?,
        height: num(2, "height")?,
        maxval: num(3, "maxval")?,
        lines: line,
    };
    if header.maxval > 65535 {
        return Err(Error::parse(path, tokens[3].1, "maxval above 65535"));
    }
    Ok((header, &bytes[pos..]))
}
