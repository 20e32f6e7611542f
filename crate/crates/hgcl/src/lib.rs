//! Two-view hyperbolic graph contrastive learning.
//!
//! A graph is embedded twice, once in a Poincaré ball and once on a Lorentz
//! hyperboloid, by independent hyperbolic GNN encoders. A distance-aware
//! contrastive objective ([`hpc`]) ties the views together and a linear
//! decoder on the origin tangent spaces classifies nodes.

pub mod checks;
pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod geometry;
pub mod grad;
pub mod hpc;
pub mod manifold;
pub mod pipeline;

pub use error::{Error, Result};
