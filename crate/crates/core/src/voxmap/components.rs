use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scalar::Real;
use crate::union_find::UnionFind;
use crate::voxmap::{BBox3D, Connectivity, VoxelGrid};

/// Cluster id per point (`None` = unassigned). Ids are dense in `0..num_clusters`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    labels: Vec<Option<u32>>,
    num_clusters: u32,
}

impl Segmentation {
    /// Validates density of ids.
    pub fn new(labels: Vec<Option<u32>>) -> Result<Self> {
        let num_clusters = labels.iter().flatten().map(|&c| c + 1).max().unwrap_or(0);
        let mut seen = vec![false; num_clusters as usize];
        for &c in labels.iter().flatten() {
            seen[c as usize] = true;
        }
        if let Some(gap) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!("cluster ids not dense: {gap} unused")));
        }
        Ok(Self { labels, num_clusters })
    }

    pub(crate) fn from_dense(labels: Vec<Option<u32>>, num_clusters: u32) -> Self {
        debug_assert!(labels.iter().flatten().all(|&c| c < num_clusters));
        Self { labels, num_clusters }
    }

    pub fn labels(&self) -> &[Option<u32>] {
        &self.labels
    }

    pub fn num_clusters(&self) -> u32 {
        self.num_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Point indices per cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters as usize];
        for (i, c) in self.labels.iter().enumerate() {
            if let Some(c) = c {
                out[*c as usize].push(i);
            }
        }
        out
    }

    /// Partition equality up to relabeling.
    pub fn same_partition(&self, o: &Segmentation) -> bool {
        if self.labels.len() != o.labels.len() || self.num_clusters != o.num_clusters {
            return false;
        }
        let mut fwd = vec![None; self.num_clusters as usize];
        let mut bwd = vec![None; o.num_clusters as usize];
        for (a, b) in self.labels.iter().zip(&o.labels) {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    let (a, b) = (*a as usize, *b as usize);
                    if *fwd[a].get_or_insert(b) != b || *bwd[b].get_or_insert(a) != a {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        true
    }
}

/// Labels connected groups of occupied cells. Two adjacent cells are linked
/// when `similar(a, b)` holds for their indices in `grid.cells()`. Cluster ids
/// follow first appearance in ascending key order.
pub fn connected_components<T: Real>(
    grid: &VoxelGrid<T>,
    connectivity: Connectivity,
    similar: impl Fn(usize, usize) -> bool,
) -> Segmentation {
    let cells = grid.cells();
    let mut uf = UnionFind::new(cells.len());
    let offsets = connectivity.forward_offsets();
    for (i, cell) in cells.iter().enumerate() {
        for d in &offsets {
            if let Some(j) = grid.cell_index(&cell.key.offset(*d)) {
                if similar(i, j) {
                    uf.union(i, j);
                }
            }
        }
    }
    let (cell_labels, k) = uf.dense_labels();
    let labels = (0..grid.num_points())
        .map(|p| Some(cell_labels[grid.cell_of_point(p)]))
        .collect();
    Segmentation::from_dense(labels, k)
}

/// Index into `boxes` of the box nearest to `query` (ties toward smallest box_id).
pub fn nearest_box_index<T: Real>(query: &Point3<T>, boxes: &[BBox3D<T>]) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, b) in boxes.iter().enumerate() {
        let d = b.distance_squared(query);
        best = match best {
            Some((bi, bd)) if d > bd || (d == bd && b.box_id >= boxes[bi].box_id) => Some((bi, bd)),
            _ => Some((i, d)),
        };
    }
    best.map(|(i, d2)| (i, d2.sqrt()))
}

/// The `box_id` of the box nearest to `query`.
pub fn nearest_box<T: Real>(query: &Point3<T>, boxes: &[BBox3D<T>]) -> Result<u32> {
    nearest_box_index(query, boxes)
        .map(|(i, _)| boxes[i].box_id)
        .ok_or_else(|| Error::InvalidInput("nearest_box needs at least one box".into()))
}
