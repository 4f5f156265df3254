//! Indoor localization under time-varying radio conditions.
//!
//! Reference points are clustered with affinity propagation over a joint
//! RSS / skeleton-path / time-variation similarity; cluster exemplars act as
//! monitor points whose live readings drive reconstruction of the fingerprint
//! database (per-RP linear maps or a per-AP neural network). Positions are
//! estimated with a cluster-scaled weighted k-nearest-neighbor rule.

pub mod code_lr;
pub mod code_nn;
pub mod csle;
pub mod error;
pub mod floorplan;
pub mod geometry;
pub mod harness;
pub mod radio;
pub mod romac;

pub use error::{Result, SalcError};
pub use geometry::{Point2, Rect};
