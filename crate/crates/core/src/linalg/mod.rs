//! Dense and sparse containers plus the handful of kernels the model needs.
//!
//! Row-parallel kernels split work into fixed row blocks and every reduction
//! sums its partials in block order, so results are bitwise identical for any
//! rayon pool size. Running inside a one-thread pool is the reference mode.

mod dense;
mod rng;
mod sparse;

pub use dense::{dot, elementwise, relu, sigmoid, DenseMatrix, Elementwise};
pub use rng::Rng;
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};

/// Glorot (Xavier) normal initialization: i.i.d. `N(0, 2 / (rows + cols))`.
pub fn glorot_normal_init(rows: usize, cols: usize, rng: &mut Rng) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "glorot init needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let std = (2.0 / (rows + cols) as f64).sqrt();
    Ok(DenseMatrix::from_fn(rows, cols, |_, _| std * rng.normal()))
}
