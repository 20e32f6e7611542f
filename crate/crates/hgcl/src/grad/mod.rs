//! Minimal reverse-mode differentiation, finite-difference checking and Adam.

mod adam;
mod check;
mod sparse;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use check::{grad_check, GradCheck, DEFAULT_MAX_COORDS};
pub use sparse::CsrMatrix;
pub use tape::{Gradients, Tape, Tensor, Var};

pub(crate) use tape::{compensated_sum, sigmoid};
