//! Two-component PCA for embedding export. Power iteration with
//! orthogonal deflation on the sample covariance; plenty at desk scale
//! where the input is a few thousand unit vectors of dimension ≤ 64.

use super::{Matrix, Real};
use crate::{Error, Result};

/// Projection of N points onto their top two principal components.
#[derive(Debug, Clone)]
pub struct Pca2d<T> {
    /// N×2 coordinates of each input point.
    pub coords: Matrix<T>,
    /// 2×d component directions (unit rows; zero row when the data has
    /// no variance in a second direction).
    pub components: Matrix<T>,
    /// Variance captured by each component, non-increasing.
    pub explained: [T; 2],
    /// True when the input had no variance at all; coords are all zero.
    pub degenerate: bool,
}

/// Projects `points` (N×d) onto their top two principal components.
///
/// Components are ordered by explained variance and sign-fixed so the
/// largest-magnitude entry of each direction is positive, making the
/// output deterministic and translation-invariant.
///
/// # Errors
/// Needs at least 2 points of dimension at least 2, all finite.
pub fn pca_2d<T: Real>(points: &Matrix<T>) -> Result<Pca2d<T>> {
    let n = points.rows();
    let d = points.cols();
    if n < 2 || d < 2 {
        return Err(Error::Domain("pca_2d needs at least 2 points of dimension 2"));
    }
    if !points.is_finite() {
        return Err(Error::NonFinite("pca_2d input"));
    }

    let inv_n = T::one() / T::of(n as f64);
    let mut mean = vec![T::zero(); d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(points.row(i)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m *= inv_n;
    }

    let mut centered = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            centered[(i, j)] = points[(i, j)] - mean[j];
        }
    }

    let mut cov = Matrix::zeros(d, d);
    for i in 0..n {
        let row = centered.row(i);
        for j in 0..d {
            for k in j..d {
                cov[(j, k)] += row[j] * row[k];
            }
        }
    }
    let inv_nm1 = T::one() / T::of((n - 1) as f64);
    for j in 0..d {
        for k in j..d {
            let v = cov[(j, k)] * inv_nm1;
            cov[(j, k)] = v;
            cov[(k, j)] = v;
        }
    }

    let total: T = (0..d).map(|j| cov[(j, j)]).sum();
    let scale = points
        .as_slice()
        .iter()
        .fold(T::zero(), |acc, &x| acc.max(x.abs()));
    if total <= T::epsilon() * T::of(100.0) * (T::one() + scale * scale) {
        return Ok(Pca2d {
            coords: Matrix::zeros(n, 2),
            components: Matrix::zeros(2, d),
            explained: [T::zero(); 2],
            degenerate: true,
        });
    }

    let (v1, lambda1) = power_iteration(&cov, None);
    let (mut v2, mut lambda2) = power_iteration(&cov, Some(&v1));
    if lambda2 <= lambda1 * T::of(1e-13) {
        v2 = vec![T::zero(); d];
        lambda2 = T::zero();
    }

    let mut components = Matrix::zeros(2, d);
    components.row_mut(0).copy_from_slice(&fix_sign(v1));
    components.row_mut(1).copy_from_slice(&fix_sign(v2));

    let mut coords = Matrix::zeros(n, 2);
    for i in 0..n {
        let row = centered.row(i);
        for c in 0..2 {
            coords[(i, c)] = components
                .row(c)
                .iter()
                .zip(row)
                .map(|(&a, &b)| a * b)
                .sum();
        }
    }

    Ok(Pca2d {
        coords,
        components,
        explained: [lambda1, lambda2],
        degenerate: false,
    })
}

/// Leading eigenpair of a PSD matrix, orthogonal to `against` if given.
/// Iterates until the eigenpair residual ‖Sv - λv‖ is at rounding level
/// relative to λ, so the returned direction is accurate to ~residual/gap.
fn power_iteration<T: Real>(s: &Matrix<T>, against: Option<&[T]>) -> (Vec<T>, T) {
    let d = s.cols();
    let tol = T::epsilon() * T::of(100.0);
    let mut v: Vec<T> = (0..d).map(|j| T::one() / T::of((j + 1) as f64)).collect();
    project_out(&mut v, against);
    normalize_or_zero(&mut v);
    let mut lambda = T::zero();
    for _ in 0..50_000 {
        let mut r = s.matvec(&v);
        project_out(&mut r, against);
        lambda = r.iter().zip(&v).map(|(&a, &b)| a * b).sum();
        let resid = r
            .iter()
            .zip(&v)
            .map(|(&ri, &vi)| (ri - lambda * vi).powi(2))
            .sum::<T>()
            .sqrt();
        let nr = r.iter().map(|&x| x * x).sum::<T>().sqrt();
        if nr <= T::epsilon() {
            return (vec![T::zero(); d], T::zero());
        }
        for (vi, &ri) in v.iter_mut().zip(&r) {
            *vi = ri / nr;
        }
        if resid <= tol * lambda.abs().max(T::epsilon()) {
            break;
        }
    }
    (v, lambda.max(T::zero()))
}

fn project_out<T: Real>(v: &mut [T], against: Option<&[T]>) {
    if let Some(u) = against {
        let proj: T = v.iter().zip(u).map(|(&a, &b)| a * b).sum();
        for (x, &ux) in v.iter_mut().zip(u) {
            *x -= proj * ux;
        }
    }
}

fn normalize_or_zero<T: Real>(v: &mut [T]) {
    let n = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    if n > T::epsilon() {
        for x in v {
            *x /= n;
        }
    }
}

fn fix_sign<T: Real>(mut v: Vec<T>) -> Vec<T> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < T::zero() {
        for x in &mut v {
            *x = -*x;
        }
    }
    v
}
