//! Rank statistics for the similarity benchmarks.

use super::Real;
use crate::{Error, Result};

/// Spearman rank correlation with average ranks for ties.
///
/// # Errors
/// The inputs must have equal length of at least 2; either side having
/// zero rank variance (all values tied) is reported as degenerate.
pub fn spearman<T: Real>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch(format!(
            "spearman inputs of length {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Domain("spearman needs at least two observations"));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    pearson(&rx, &ry)
}

/// Fractional ranks (1-based); tied values share the mean of their positions.
fn average_ranks<T: Real>(xs: &[T]) -> Vec<T> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("comparable values"));
    let mut ranks = vec![T::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank mean, 1-based.
        let shared = T::of((i + j) as f64 / 2.0 + 1.0);
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson<T: Real>(xs: &[T], ys: &[T]) -> Result<T> {
    let n = T::of(xs.len() as f64);
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let mut cov = T::zero();
    let mut vx = T::zero();
    let mut vy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx <= T::zero() {
        return Err(Error::DegenerateRanks("left side has zero rank variance"));
    }
    if vy <= T::zero() {
        return Err(Error::DegenerateRanks("right side has zero rank variance"));
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}
