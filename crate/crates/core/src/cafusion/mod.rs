//! Attention-based fusion of RGB and depth features at toy scale, with an
//! analytic backward pass.

mod cascade;
mod classify;
mod conv;
mod fusion;
pub mod gradcheck;
mod network;
mod tensor;
pub mod tensor_io;
pub mod train;

pub use cascade::{cascade, combine_attention, CascadeOutput, NUM_LEVELS};
pub use classify::{attention_pool, classify, LinearHead, MaterialDistribution, CONFIDENCE_FLOOR, NUM_CLASSES};
pub use conv::{conv2d_3x3, ConvFilter};
pub use fusion::{fuse_level, overlap_ratio, AttentionSet, FuseUpstream, FusionGrads, FusionModule, FusionWeights, DENOM_EPS};
pub use network::{crop_inputs, random_inputs, Cafn, CafnOutput, FeatureProvider, FileFeatures, Modality, SeededFeatures};
pub use tensor::{modulate, FeatureMap};
