//! Persistent homology of k-distance filtrations and their behaviour under
//! random linear projections.
//!
//! The numerical core is generic over the [`Scalar`] type (`f32` or `f64`);
//! the aliases at the crate root fix it to `f64`, which is what the
//! experiment pipeline uses.

pub mod combinatorics;
pub mod error;
pub mod experiment;
pub mod filtration;
pub mod geometry;
pub mod kdistance;
pub mod meb;
pub mod persistence;
pub mod projection;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = geometry::Point<f64>;
pub type WeightedPoint = geometry::WeightedPoint<f64>;
pub type PointCloud = geometry::PointCloud<f64>;
pub type WeightedCloud = geometry::WeightedCloud<f64>;
