//! Voxel-based matching: voxelization, box association, multi-scale
//! connected components, label propagation and map coloring.

mod bbox;
mod components;
mod grid;
mod lift;
mod map;
mod material;
mod mscc;

pub use bbox::BBox3D;
pub use components::{connected_components, nearest_box, nearest_box_index, Segmentation};
pub use grid::{box_to_voxel, voxelize, Cell, Connectivity, VoxelGrid, VoxelKey};
pub use lift::{lift_detection, percentile};
pub use map::{colorize, propagate_labels, ClusterLabel, Palette, SemanticMap};
pub(crate) use map::toml_line;
pub use material::{MaterialLabel, UnknownMaterial};
pub use mscc::{
    merge_scales, mscc_segment, mscc_segment_detailed, provisional_cell_labels, segment_scale, MsccOutput,
    MsccParams, ScaleSegmentation, ScaleSet,
};
