//! Singularity, cusp and configuration-space analysis for planar 3-RPR
//! parallel manipulators.
//!
//! The geometric primitives in [`geometry`] and [`poly`] are generic over the
//! scalar type; the analysis layers above them work in `f64` through the
//! aliases exported here.

pub mod atlas;
pub mod cs;
pub mod cusp;
pub mod dk;
pub mod error;
pub mod export;
pub mod geometry;
pub mod motion;
pub mod planner;
pub mod poly;
pub mod scalar;
pub mod winding;

pub use error::{Error, Result};
pub use geometry::AspectLabel;
pub use scalar::Real;

pub type Geometry = geometry::Geometry<f64>;
pub type Pose = geometry::Pose<f64>;
pub type JointVector = geometry::JointVector<f64>;
pub type JacobianPair = geometry::JacobianPair<f64>;
pub type LegLine = geometry::LegLine<f64>;
