//! Multi-scale connected components.
//!
//! Each scale is labeled independently (coarse to fine). The finest-scale
//! components are the base clusters; two base clusters merge when some
//! coarser scale puts them in one component and their provisional materials
//! agree. The merge is closed transitively.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::scalar::Real;
use crate::union_find::UnionFind;
use crate::voxmap::{
    connected_components, nearest_box_index, voxelize, BBox3D, Connectivity, MaterialLabel, Segmentation, VoxelGrid,
};

/// Strictly decreasing positive voxel sizes, coarsest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet<T>(Vec<T>);

impl<T: Real> ScaleSet<T> {
    pub fn new(scales: Vec<T>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::Config("scale set is empty".into()));
        }
        if scales.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
            return Err(Error::Config("scales must be positive".into()));
        }
        if scales.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Config("scales must be strictly decreasing".into()));
        }
        Ok(Self(scales))
    }

    pub fn single(scale: T) -> Result<Self> {
        Self::new(vec![scale])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn finest(&self) -> T {
        *self.0.last().expect("non-empty")
    }
}

impl<T: Real> Default for ScaleSet<T> {
    fn default() -> Self {
        Self([0.4, 0.2, 0.1, 0.05].map(T::lit).to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsccParams<T> {
    pub scales: ScaleSet<T>,
    pub connectivity: Connectivity,
    pub origin: Point3<T>,
    /// When set, adjacent cells must also have mean colors within this
    /// RGB distance (0..=441) to be linked.
    pub color_threshold: Option<T>,
}

impl<T: Real> Default for MsccParams<T> {
    fn default() -> Self {
        Self {
            scales: ScaleSet::default(),
            connectivity: Connectivity::default(),
            origin: Point3::origin(),
            color_threshold: None,
        }
    }
}

/// Per-cell material of the box nearest to the cell center.
pub fn provisional_cell_labels<T: Real>(grid: &VoxelGrid<T>, boxes: &[BBox3D<T>]) -> Vec<Option<MaterialLabel>> {
    grid.cells()
        .iter()
        .map(|c| nearest_box_index(&grid.cell_center(c.key), boxes).map(|(i, _)| boxes[i].material))
        .collect()
}

fn mean_cell_colors<T: Real>(grid: &VoxelGrid<T>, colors: &[[u8; 3]]) -> Vec<[f64; 3]> {
    grid.cells()
        .iter()
        .map(|c| {
            let mut s = [0.0; 3];
            for &i in &c.points {
                for k in 0..3 {
                    s[k] += colors[i][k] as f64;
                }
            }
            let n = c.points.len() as f64;
            s.map(|v| v / n)
        })
        .collect()
}

/// One scale's labeling, with the provisional label of each of its clusters.
#[derive(Debug, Clone)]
pub struct ScaleSegmentation {
    pub segmentation: Segmentation,
    pub cluster_labels: Vec<Option<MaterialLabel>>,
}

/// Connected components at a single scale, linking adjacent cells whose
/// provisional labels agree (and colors, when thresholded).
pub fn segment_scale<T: Real>(
    cloud: &PointCloud<T>,
    scale: T,
    params: &MsccParams<T>,
    boxes: &[BBox3D<T>],
) -> Result<ScaleSegmentation> {
    let grid = voxelize(cloud, scale, params.origin)?;
    let labels = provisional_cell_labels(&grid, boxes);
    let colors = match (params.color_threshold, cloud.colors()) {
        (Some(t), Some(c)) => Some((t.as_f64(), mean_cell_colors(&grid, c))),
        _ => None,
    };
    let segmentation = connected_components(&grid, params.connectivity, |a, b| {
        labels[a] == labels[b]
            && colors.as_ref().is_none_or(|(t, mean)| {
                let d: f64 = (0..3).map(|k| (mean[a][k] - mean[b][k]).powi(2)).sum();
                d.sqrt() <= *t
            })
    });
    let mut cluster_labels = vec![None; segmentation.num_clusters() as usize];
    let mut seen = vec![false; cluster_labels.len()];
    for (ci, cell) in grid.cells().iter().enumerate() {
        let c = segmentation.labels()[cell.points[0]].expect("every point labeled") as usize;
        if !seen[c] {
            seen[c] = true;
            cluster_labels[c] = labels[ci];
        }
    }
    Ok(ScaleSegmentation {
        segmentation,
        cluster_labels,
    })
}

/// Merges the finest segmentation (last entry) using every coarser one:
/// base clusters sharing a coarse component and a provisional label are
/// united, then closed transitively. Final ids follow the smallest base id
/// of each merged group.
pub fn merge_scales(per_scale: &[Segmentation], base_labels: &[Option<MaterialLabel>]) -> Result<Segmentation> {
    let Some(finest) = per_scale.last() else {
        return Err(Error::InvalidInput("merge_scales needs at least one segmentation".into()));
    };
    let n = finest.len();
    if let Some(bad) = per_scale.iter().position(|s| s.len() != n) {
        return Err(Error::Shape(format!(
            "segmentation {bad} covers {} points, finest covers {n}",
            per_scale[bad].len()
        )));
    }
    if base_labels.len() != finest.num_clusters() as usize {
        return Err(Error::Shape(format!(
            "{} provisional labels for {} base clusters",
            base_labels.len(),
            finest.num_clusters()
        )));
    }
    let mut uf = UnionFind::new(finest.num_clusters() as usize);
    for coarse in &per_scale[..per_scale.len() - 1] {
        let mut first: HashMap<(u32, Option<MaterialLabel>), u32> = HashMap::new();
        for (c, b) in coarse.labels().iter().zip(finest.labels()) {
            let (Some(c), Some(b)) = (c, b) else { continue };
            let rep = *first.entry((*c, base_labels[*b as usize])).or_insert(*b);
            uf.union(rep as usize, *b as usize);
        }
    }
    let (base_to_final, k) = uf.dense_labels();
    let labels = finest
        .labels()
        .iter()
        .map(|b| b.map(|b| base_to_final[b as usize]))
        .collect();
    Ok(Segmentation::from_dense(labels, k))
}

/// Everything computed by [`mscc_segment_detailed`].
#[derive(Debug, Clone)]
pub struct MsccOutput {
    /// Coarse to fine.
    pub per_scale: Vec<ScaleSegmentation>,
    pub merged: Segmentation,
}

pub fn mscc_segment_detailed<T: Real>(
    cloud: &PointCloud<T>,
    params: &MsccParams<T>,
    boxes: &[BBox3D<T>],
) -> Result<MsccOutput> {
    let per_scale = params
        .scales
        .as_slice()
        .iter()
        .map(|&s| segment_scale(cloud, s, params, boxes))
        .collect::<Result<Vec<_>>>()?;
    let segs: Vec<Segmentation> = per_scale.iter().map(|s| s.segmentation.clone()).collect();
    let base_labels = &per_scale.last().expect("non-empty scale set").cluster_labels;
    let merged = merge_scales(&segs, base_labels)?;
    Ok(MsccOutput { per_scale, merged })
}

pub fn mscc_segment<T: Real>(cloud: &PointCloud<T>, params: &MsccParams<T>, boxes: &[BBox3D<T>]) -> Result<Segmentation> {
    mscc_segment_detailed(cloud, params, boxes).map(|o| o.merged)
}
