use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::scalar::Real;
use crate::voxmap::BBox3D;

/// Integer voxel coordinates. Ordering is lexicographic (x, then y, then z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoxelKey(pub [i64; 3]);

impl VoxelKey {
    #[inline]
    pub fn offset(self, d: [i64; 3]) -> Self {
        VoxelKey([self.0[0] + d[0], self.0[1] + d[1], self.0[2] + d[2]])
    }

    /// Chebyshev-style adjacency test under the given connectivity.
    pub fn is_adjacent(self, o: Self, conn: Connectivity) -> bool {
        let d = [
            (self.0[0] - o.0[0]).abs(),
            (self.0[1] - o.0[1]).abs(),
            (self.0[2] - o.0[2]).abs(),
        ];
        if d.iter().any(|&v| v > 1) {
            return false;
        }
        let manhattan: i64 = d.iter().sum();
        manhattan > 0 && manhattan <= conn.max_manhattan()
    }
}

/// Voxel neighborhood: faces (6), faces+edges (18) or faces+edges+corners (26).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(Error::Config(format!("connectivity must be 6, 18 or 26 (got {n})"))),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    fn max_manhattan(self) -> i64 {
        match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        }
    }

    /// Neighbor offsets that are lexicographically greater than the origin;
    /// visiting these from every cell covers each adjacent pair once.
    pub fn forward_offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::with_capacity(13);
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                for dz in -1..=1i64 {
                    let d = [dx, dy, dz];
                    let m = dx.abs() + dy.abs() + dz.abs();
                    if m == 0 || m > self.max_manhattan() {
                        continue;
                    }
                    if d > [0, 0, 0] {
                        out.push(d);
                    }
                }
            }
        }
        out
    }
}

/// One occupied voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub key: VoxelKey,
    pub points: Vec<usize>,
}

/// Partition of a cloud's point indices into cubic cells of edge `scale`.
/// Cells are stored in ascending key order.
#[derive(Debug, Clone)]
pub struct VoxelGrid<T> {
    origin: Point3<T>,
    scale: T,
    cells: Vec<Cell>,
    index: HashMap<VoxelKey, usize>,
    point_cell: Vec<usize>,
}

impl<T: Real> VoxelGrid<T> {
    pub fn origin(&self) -> Point3<T> {
        self.origin
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_index(&self, key: &VoxelKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Index into [`VoxelGrid::cells`] of the cell owning point `i`.
    pub fn cell_of_point(&self, i: usize) -> usize {
        self.point_cell[i]
    }

    pub fn num_points(&self) -> usize {
        self.point_cell.len()
    }

    #[inline]
    pub fn key_for(&self, p: &Point3<T>) -> VoxelKey {
        key_for(p, &self.origin, self.scale)
    }

    pub fn cell_center(&self, key: VoxelKey) -> Point3<T> {
        let half = T::lit(0.5);
        let c = |i: i64, o: T| o + (T::lit(i as f64) + half) * self.scale;
        Point3::new(c(key.0[0], self.origin.x), c(key.0[1], self.origin.y), c(key.0[2], self.origin.z))
    }
}

#[inline]
fn key_for<T: Real>(p: &Point3<T>, origin: &Point3<T>, scale: T) -> VoxelKey {
    let f = |v: T, o: T| ((v - o) / scale).floor().to_i64().unwrap_or(i64::MAX);
    VoxelKey([f(p.x, origin.x), f(p.y, origin.y), f(p.z, origin.z)])
}

/// Assigns each point to the cell `floor((p - origin) / scale)`.
pub fn voxelize<T: Real>(cloud: &PointCloud<T>, scale: T, origin: Point3<T>) -> Result<VoxelGrid<T>> {
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(Error::InvalidInput(format!("voxel scale must be positive, got {scale}")));
    }
    let mut keyed: Vec<(VoxelKey, usize)> = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| (key_for(p, &origin, scale), i))
        .collect();
    keyed.sort_unstable();

    let mut cells: Vec<Cell> = Vec::new();
    let mut point_cell = vec![0usize; cloud.len()];
    for (key, i) in keyed {
        match cells.last_mut() {
            Some(c) if c.key == key => c.points.push(i),
            _ => cells.push(Cell { key, points: vec![i] }),
        }
        point_cell[i] = cells.len() - 1;
    }
    let index = cells.iter().enumerate().map(|(i, c)| (c.key, i)).collect();
    Ok(VoxelGrid {
        origin,
        scale,
        cells,
        index,
        point_cell,
    })
}

/// The cell holding the most cloud points that fall inside `bbox`
/// (ties toward the smallest key).
pub fn box_to_voxel<T: Real>(grid: &VoxelGrid<T>, cloud: &PointCloud<T>, bbox: &BBox3D<T>) -> Result<VoxelKey> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("voxel grid is empty".into()));
    }
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        if bbox.contains(p) {
            *counts.entry(grid.cell_of_point(i)).or_default() += 1;
        }
    }
    // cells are key-ordered, so the smallest index wins ties
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(cell, _)| grid.cells()[cell].key)
        .ok_or(Error::NoSupport { box_id: bbox.box_id })
}
