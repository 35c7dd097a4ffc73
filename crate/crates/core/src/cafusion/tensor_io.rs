//! Flat binary tensors: each record is `rank: u32`, `rank` dims as `u32`,
//! then the values as `f32`, all little-endian. Files hold one or more
//! records back to back.

use std::path::Path;

use crate::cafusion::{ConvFilter, FeatureMap, FusionWeights};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().map(|&d| d as usize).product();
        if dims.is_empty() || n != data.len() {
            return Err(Error::Shape(format!("tensor dims {dims:?} do not match {} values", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn from_feature_map<T: Real>(f: &FeatureMap<T>) -> Self {
        let (c, h, w) = f.shape();
        Self {
            dims: vec![c as u32, h as u32, w as u32],
            data: f.data().iter().map(|v| v.as_f64() as f32).collect(),
        }
    }

    pub fn to_feature_map<T: Real>(&self) -> Result<FeatureMap<T>> {
        match self.dims[..] {
            [c, h, w] => FeatureMap::new(c as usize, h as usize, w as usize, self.lift()),
            _ => Err(Error::Shape(format!("feature map tensors are rank 3, got {:?}", self.dims))),
        }
    }

    fn lift<T: Real>(&self) -> Vec<T> {
        self.data.iter().map(|&v| T::lit(f64::from(v))).collect()
    }
}

pub fn encode_tensors(tensors: &[Tensor]) -> Vec<u8> {
    let mut out = Vec::new();
    for t in tensors {
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for d in &t.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut pos = 0usize;
    let word = |pos: &mut usize| -> Result<[u8; 4]> {
        let b = bytes
            .get(*pos..*pos + 4)
            .ok_or_else(|| Error::InvalidInput(format!("tensor data truncated at byte {}", *pos)))?;
        *pos += 4;
        Ok([b[0], b[1], b[2], b[3]])
    };
    let mut out = Vec::new();
    while pos < bytes.len() {
        let rank = u32::from_le_bytes(word(&mut pos)?);
        if rank == 0 || rank > 8 {
            return Err(Error::InvalidInput(format!("implausible tensor rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(word(&mut pos)?));
        }
        let n: usize = dims.iter().map(|&d| d as usize).product();
        if n > (bytes.len() - pos) / 4 {
            return Err(Error::InvalidInput(format!("tensor {dims:?} exceeds remaining data")));
        }
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f32::from_le_bytes(word(&mut pos)?));
        }
        out.push(Tensor::new(dims, data)?);
    }
    Ok(out)
}

pub fn write_tensors(path: &Path, tensors: &[Tensor]) -> Result<()> {
    std::fs::write(path, encode_tensors(tensors)).map_err(|e| Error::io(path, e))
}

pub fn read_tensors(path: &Path) -> Result<Vec<Tensor>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensors(&bytes).map_err(|e| match e {
        Error::InvalidInput(m) | Error::Shape(m) => Error::parse(path, 0, m),
        other => other,
    })
}

fn filter_tensors<T: Real>(f: &ConvFilter<T>) -> [Tensor; 2] {
    [
        Tensor {
            dims: vec![1, f.channels() as u32, 3, 3],
            data: f.weights().iter().map(|v| v.as_f64() as f32).collect(),
        },
        Tensor {
            dims: vec![1],
            data: vec![f.bias.as_f64() as f32],
        },
    ]
}

fn filter_from<T: Real>(w: &Tensor, b: &Tensor) -> Result<ConvFilter<T>> {
    match (&w.dims[..], &b.dims[..]) {
        ([1, c, 3, 3], [1]) => ConvFilter::new(*c as usize, w.lift(), T::lit(f64::from(b.data[0]))),
        _ => Err(Error::Shape(format!("expected filter [1,C,3,3] + bias [1], got {:?} + {:?}", w.dims, b.dims))),
    }
}

/// Six tensors: rgb, depth and fuse filters, each followed by its bias.
pub fn fusion_weights_to_tensors<T: Real>(w: &FusionWeights<T>) -> Vec<Tensor> {
    w.filters().iter().flat_map(|f| filter_tensors(f)).collect()
}

pub fn fusion_weights_from_tensors<T: Real>(t: &[Tensor]) -> Result<FusionWeights<T>> {
    if t.len() != 6 {
        return Err(Error::Shape(format!("fusion weights are 6 tensors, got {}", t.len())));
    }
    let w = FusionWeights {
        rgb: filter_from(&t[0], &t[1])?,
        depth: filter_from(&t[2], &t[3])?,
        fuse: filter_from(&t[4], &t[5])?,
    };
    w.validate()?;
    Ok(w)
}
