//! PLY export and import.
//!
//! Maps are written as `binary_little_endian 1.0` with one `vertex` element:
//! `float x, y, z; uchar red, green, blue; uchar material_id; int cluster_id`
//! where `cluster_id = -1` marks an unlabeled point. The reader also accepts
//! ASCII and big-endian files and any subset of these properties beyond x/y/z.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::scalar::Real;
use crate::voxmap::SemanticMap;

/// Per-vertex contents of a PLY file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlyData<T> {
    pub cloud: PointCloud<T>,
    pub material_ids: Option<Vec<u8>>,
    pub cluster_ids: Option<Vec<i32>>,
}

impl<T: Real> PlyData<T> {
    pub fn from_map(map: &SemanticMap<T>) -> Self {
        Self {
            cloud: map.cloud().clone(),
            material_ids: Some(map.materials().iter().map(|m| m.id()).collect()),
            cluster_ids: Some(
                map.cluster_ids()
                    .iter()
                    .map(|c| c.map_or(-1, |id| id as i32))
                    .collect(),
            ),
        }
    }

    /// Serializes in the canonical binary layout. Missing colors are written
    /// as black, missing labels as material 10 (Other) and cluster -1.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.cloud.len();
        let mut out = Vec::with_capacity(256 + n * 20);
        write!(
            out,
            "ply\nformat binary_little_endian 1.0\ncomment matmap semantic map\n\
             element vertex {n}\n\
             property float x\nproperty float y\nproperty float z\n\
             property uchar red\nproperty uchar green\nproperty uchar blue\n\
             property uchar material_id\nproperty int cluster_id\nend_header\n"
        )
        .expect("write to Vec");
        let colors = self.cloud.colors();
        for (i, p) in self.cloud.points().iter().enumerate() {
            for c in [p.x, p.y, p.z] {
                out.extend_from_slice(&(c.as_f64() as f32).to_le_bytes());
            }
            out.extend_from_slice(&colors.map_or([0, 0, 0], |c| c[i]));
            out.push(self.material_ids.as_ref().map_or(10, |m| m[i]));
            out.extend_from_slice(&self.cluster_ids.as_ref().map_or(-1, |c| c[i]).to_le_bytes());
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let header = Header::parse(bytes, path)?;
        let body = &bytes[header.body_offset..];
        let vertex = header
            .elements
            .iter()
            .position(|e| e.name == "vertex")
            .ok_or_else(|| Error::parse(path, header.end_line, "no vertex element"))?;
        // elements before the vertex element must be skippable
        let mut offset = 0usize;
        if header.format != Format::Ascii {
            for e in &header.elements[..vertex] {
                offset += e.count * e.stride(path)?;
            }
        }
        let elem = &header.elements[vertex];
        let find = |name: &str| elem.props.iter().position(|p| p.name == name);
        let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(Error::parse(path, elem.line, "vertex element lacks x/y/z")),
        };
        let rgb = match (find("red"), find("green"), find("blue")) {
            (Some(r), Some(g), Some(b)) => Some((r, g, b)),
            _ => None,
        };
        let imat = find("material_id");
        let iclu = find("cluster_id");

        let rows = match header.format {
            Format::Ascii => read_ascii_rows(body, &header, vertex, path)?,
            Format::BinaryLe | Format::BinaryBe => {
                read_binary_rows(&body[offset.min(body.len())..], elem, header.format, header.end_line, path)?
            }
        };
        let mut points = Vec::with_capacity(rows.len());
        let mut colors = rgb.map(|_| Vec::with_capacity(rows.len()));
        let mut mats = imat.map(|_| Vec::with_capacity(rows.len()));
        let mut clus = iclu.map(|_| Vec::with_capacity(rows.len()));
        for (row, vals) in rows.iter().enumerate() {
            let p = Point3::new(T::lit(vals[ix]), T::lit(vals[iy]), T::lit(vals[iz]));
            if !p.is_finite() {
                return Err(Error::parse(path, header.end_line, format!("vertex {row} is not finite")));
            }
            points.push(p);
            if let (Some(c), Some((r, g, b))) = (colors.as_mut(), rgb) {
                c.push([vals[r] as u8, vals[g] as u8, vals[b] as u8]);
            }
            if let (Some(m), Some(i)) = (mats.as_mut(), imat) {
                m.push(vals[i] as u8);
            }
            if let (Some(c), Some(i)) = (clus.as_mut(), iclu) {
                c.push(vals[i] as i32);
            }
        }
        Ok(Self {
            cloud: PointCloud::new(points, colors)?,
            material_ids: mats,
            cluster_ids: clus,
        })
    }
}

pub fn write_ply<T: Real>(map: &SemanticMap<T>, path: &Path) -> Result<()> {
    PlyData::from_map(map).write(path)
}

pub fn read_ply<T: Real>(path: &Path) -> Result<PlyData<T>> {
    PlyData::read(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], le: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let mut a = [0u8; $n];
                a.copy_from_slice(&b[..$n]);
                (if le { <$t>::from_le_bytes(a) } else { <$t>::from_be_bytes(a) }) as f64
            }};
        }
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => num!(i16, 2),
            Scalar::U16 => num!(u16, 2),
            Scalar::I32 => num!(i32, 4),
            Scalar::U32 => num!(u32, 4),
            Scalar::F32 => num!(f32, 4),
            Scalar::F64 => num!(f64, 8),
        }
    }
}

#[derive(Debug)]
struct Property {
    name: String,
    /// `None` for list properties.
    kind: Option<Scalar>,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
    line: usize,
}

impl Element {
    fn stride(&self, path: &Path) -> Result<usize> {
        self.props
            .iter()
            .map(|p| {
                p.kind.map(Scalar::size).ok_or_else(|| {
                    Error::parse(path, self.line, format!("cannot skip list property in element {}", self.name))
                })
            })
            .sum()
    }
}

struct Header {
    format: Format,
    elements: Vec<Element>,
    body_offset: usize,
    end_line: usize,
}

impl Header {
    fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut pos = 0;
        let mut line_no = 0;
        let mut format = None;
        let mut elements: Vec<Element> = Vec::new();
        loop {
            let Some(nl) = bytes[pos..].iter().position(|&b| b == b'\n') else {
                return Err(Error::parse(path, line_no + 1, "unterminated header (no end_header)"));
            };
            line_no += 1;
            let raw = &bytes[pos..pos + nl];
            pos += nl + 1;
            let line = std::str::from_utf8(raw)
                .map_err(|_| Error::parse(path, line_no, "header is not UTF-8"))?
                .trim_end_matches('\r');
            let mut words = line.split_whitespace();
            let Some(key) = words.next() else { continue };
            if line_no == 1 {
                if key != "ply" {
                    return Err(Error::parse(path, 1, "missing 'ply' magic"));
                }
                continue;
            }
            match key {
                "format" => {
                    format = Some(match (words.next(), words.next()) {
                        (Some("ascii"), Some("1.0")) => Format::Ascii,
                        (Some("binary_little_endian"), Some("1.0")) => Format::BinaryLe,
                        (Some("binary_big_endian"), Some("1.0")) => Format::BinaryBe,
                        _ => return Err(Error::parse(path, line_no, format!("unsupported format line '{line}'"))),
                    });
                }
                "comment" | "obj_info" => {}
                "element" => {
                    let (Some(name), Some(count)) = (words.next(), words.next()) else {
                        return Err(Error::parse(path, line_no, "malformed element line"));
                    };
                    let count = count
                        .parse()
                        .map_err(|_| Error::parse(path, line_no, format!("invalid element count '{count}'")))?;
                    elements.push(Element {
                        name: name.to_string(),
                        count,
                        props: Vec::new(),
                        line: line_no,
                    });
                }
                "property" => {
                    let Some(elem) = elements.last_mut() else {
                        return Err(Error::parse(path, line_no, "property before any element"));
                    };
                    let toks: Vec<&str> = words.collect();
                    let prop = match toks.as_slice() {
                        ["list", _, _, name] => Property {
                            name: name.to_string(),
                            kind: None,
                        },
                        [ty, name] => Property {
                            name: name.to_string(),
                            kind: Some(Scalar::parse(ty).ok_or_else(|| {
                                Error::parse(path, line_no, format!("unknown property type '{ty}'"))
                            })?),
                        },
                        _ => return Err(Error::parse(path, line_no, "malformed property line")),
                    };
                    elem.props.push(prop);
                }
                "end_header" => break,
                other => return Err(Error::parse(path, line_no, format!("unexpected header keyword '{other}'"))),
            }
        }
        let format = format.ok_or_else(|| Error::parse(path, line_no, "missing format line"))?;
        Ok(Self {
            format,
            elements,
            body_offset: pos,
            end_line: line_no,
        })
    }
}

fn read_binary_rows(body: &[u8], elem: &Element, format: Format, line: usize, path: &Path) -> Result<Vec<Vec<f64>>> {
    if elem.props.iter().any(|p| p.kind.is_none()) {
        return Err(Error::parse(path, elem.line, "list properties in vertex element are not supported"));
    }
    let stride = elem.stride(path)?;
    let need = elem.count.saturating_mul(stride);
    if body.len() < need {
        return Err(Error::parse(
            path,
            line,
            format!("truncated vertex data: need {need} bytes, found {}", body.len()),
        ));
    }
    let le = format == Format::BinaryLe;
    Ok(body[..need]
        .chunks_exact(stride.max(1))
        .take(elem.count)
        .map(|rec| {
            let mut off = 0;
            elem.props
                .iter()
                .map(|p| {
                    let k = p.kind.unwrap();
                    let v = k.decode(&rec[off..], le);
                    off += k.size();
                    v
                })
                .collect()
        })
        .collect())
}

fn read_ascii_rows(body: &[u8], header: &Header, vertex: usize, path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::str::from_utf8(body).map_err(|_| Error::parse(path, header.end_line + 1, "ASCII body is not UTF-8"))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (header.end_line + 1 + i, l));
    let mut rows = Vec::new();
    for (ei, elem) in header.elements.iter().enumerate() {
        for _ in 0..elem.count {
            let Some((ln, l)) = lines.next() else {
                return Err(Error::parse(path, header.end_line, format!("truncated ASCII body in element {}", elem.name)));
            };
            if ei != vertex {
                continue;
            }
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, ln, "non-numeric vertex value"))?;
            if vals.len() != elem.props.len() {
                return Err(Error::parse(path, ln, format!("expected {} values, found {}", elem.props.len(), vals.len())));
            }
            rows.push(vals);
        }
        if ei == vertex {
            break;
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PlyData<f64> {
        PlyData {
            cloud: PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0)], Some(vec![[4, 5, 6]])).unwrap(),
            material_ids: Some(vec![9]),
            cluster_ids: Some(vec![-1]),
        }
    }

    #[test]
    fn single_vertex_header() {
        let bytes = sample().to_bytes();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("element vertex 1\n"));
        assert!(text.contains("format binary_little_endian 1.0"));
        let back = PlyData::<f64>::from_bytes(&bytes, Path::new("m.ply")).unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn truncated_body_is_a_parse_error() {
        let bytes = sample().to_bytes();
        let err = PlyData::<f64>::from_bytes(&bytes[..bytes.len() - 3], Path::new("m.ply")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn malformed_header_reports_line() {
        let bad = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty flaot x\nend_header\n";
        match PlyData::<f64>::from_bytes(bad, Path::new("m.ply")).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("unexpected {e}"),
        }
        let no_end = b"ply\nformat ascii 1.0\nelement vertex 2\n";
        assert!(PlyData::<f64>::from_bytes(no_end, Path::new("m.ply")).is_err());
        assert!(PlyData::<f64>::from_bytes(b"", Path::new("m.ply")).is_err());
    }

    #[test]
    fn reads_ascii_xyz_only() {
        let text = b"ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1.5 -2 3\n";
        let d = PlyData::<f64>::from_bytes(text, Path::new("a.ply")).unwrap();
        assert_eq!(d.cloud.len(), 2);
        assert_eq!(d.cloud.points()[1], Point3::new(1.5, -2.0, 3.0));
        assert!(d.material_ids.is_none() && d.cloud.colors().is_none());
    }

    #[test]
    fn skips_leading_fixed_size_elements() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement meta 1\nproperty ushort tag\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nend_header\n".to_vec();
        bytes.extend_from_slice(&7u16.to_le_bytes());
        for v in [0.25f64, 0.5, 0.75] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let d = PlyData::<f64>::from_bytes(&bytes, Path::new("b.ply")).unwrap();
        assert_eq!(d.cloud.points()[0], Point3::new(0.25, 0.5, 0.75));
    }
}
