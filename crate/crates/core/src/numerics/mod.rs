//! Dense linear algebra and randomness primitives.
//!
//! Everything here is deterministic: the same inputs (and the same [`Rng`]
//! state) give bit-identical outputs.

mod eigen;
pub(crate) mod matrix;
mod polyfit;
mod rng;
mod scalar;

pub use eigen::{sym_eigen, SymEigen};
pub use matrix::{matmul, Matrix};
pub use polyfit::{poly_eval, polyfit};
pub use rng::{gaussian, Rng};
pub use scalar::Real;
