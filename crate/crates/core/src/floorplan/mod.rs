//! Occupancy-grid floor plans, their medial-axis skeleton, and distances
//! measured along that skeleton.

mod map;
mod skeleton;
mod ssp;

pub use map::{Cell, FloorMap};
pub use skeleton::{build_skeleton, build_skeleton_with, Edge, Skeleton, SkeletonParams};
pub use ssp::{shortest_path_matrix, ssp_distance, SnappedPoints, SspMatrix};

pub(crate) use skeleton::parse_tok;
