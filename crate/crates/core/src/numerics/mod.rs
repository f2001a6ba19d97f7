//! Numeric substrate shared by every other module: dense row-major
//! matrices and vectors, a splittable counter-based RNG, numerically
//! stable reductions, 2-D PCA, Spearman rank correlation, and a
//! central-difference gradient checker.

mod grad_check;
mod linalg;
mod pca;
mod rng;
mod stats;

pub use grad_check::grad_check;
pub use linalg::{Matrix, Vector};
pub use pca::{pca_2d, Pca2d};
pub use rng::Rng;
pub use stats::spearman;

use crate::{Error, Result};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type for the core math. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + 'static
{
    /// Converts an `f64` literal, for constants in generic code.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// Converts to `f64`, for serialization and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Real for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + std::iter::Sum
        + std::fmt::Debug
        + std::fmt::Display
        + Default
        + 'static
{
}

/// Computes ln Σ exp(xᵢ) with the maximum subtracted before
/// exponentiation, so no intermediate overflows for finite inputs.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> Result<T> {
    if xs.is_empty() {
        return Err(Error::EmptyReduction);
    }
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return Ok(m);
    }
    let sum: T = xs.iter().map(|&x| (x - m).exp()).sum();
    Ok(m + sum.ln())
}
