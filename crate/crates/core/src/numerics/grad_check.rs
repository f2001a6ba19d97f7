//! Central-difference gradient verification. Every hand-derived backward
//! pass in this crate is validated against this checker.

use super::Real;
use crate::{Error, Result};

/// Compares `analytic` against central differences of `f` around `x0`.
///
/// Each coordinate i is probed with (f(x + εeᵢ) - f(x - εeᵢ)) / 2ε and the
/// relative error |analytic - numeric| / max(1, |numeric|) is taken; the
/// maximum over coordinates is returned. The step must lie in (0, 1e-2].
///
/// # Errors
/// Rejects an out-of-range step, a length mismatch, and any probe at which
/// `f` is non-finite.
pub fn grad_check<T, F>(mut f: F, analytic: &[T], x0: &[T], eps: T) -> Result<T>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    if !(eps > T::zero() && eps <= T::of(1e-2)) {
        return Err(Error::Domain("grad_check step must lie in (0, 1e-2]"));
    }
    if analytic.len() != x0.len() {
        return Err(Error::ShapeMismatch(format!(
            "gradient has {} coordinates, point has {}",
            analytic.len(),
            x0.len()
        )));
    }
    let mut x = x0.to_vec();
    let mut worst = T::zero();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let fp = f(&x)?;
        x[i] = orig - eps;
        let fm = f(&x)?;
        x[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFiniteProbe(i));
        }
        let numeric = (fp - fm) / (T::of(2.0) * eps);
        let rel = (analytic[i] - numeric).abs() / T::one().max(numeric.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}
