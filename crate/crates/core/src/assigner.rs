//! Balanced soft cluster assignment.
//!
//! Sinkhorn-Knopp iteration turns a score matrix between prototypes and a
//! batch of representations into a transport plan whose columns are exact
//! per-event assignment distributions and whose rows spread total mass
//! evenly across prototypes. Iterations run in the log domain so small
//! regularizers stay numerically stable, and a final linear pass makes
//! each column sum to one exactly.

use crate::losses::PrototypeBank;
use crate::numerics::{log_sum_exp, Matrix, Real, Vector};
use crate::{Error, Result};

/// Relative row-sum deviation below which a plan counts as converged.
const ROW_TOL: f64 = 1e-6;

/// A transport plan over a batch: M × B, strictly positive, columns
/// summing to one, rows approximately B/M.
#[derive(Debug, Clone)]
pub struct Assignment<T> {
    /// Assignment matrix, prototypes × events.
    pub q: Matrix<T>,
    /// Whether the worst relative row-sum deviation fell below 1e-6.
    pub converged: bool,
    /// Number of row/column update rounds performed.
    pub iterations: usize,
    /// Worst relative deviation of a row sum from its target B/M.
    pub max_row_violation: T,
}

impl<T: Real> Assignment<T> {
    /// The assignment distribution of one event (one column).
    pub fn event_assignment(&self, b: usize) -> Vec<T> {
        (0..self.q.rows()).map(|m| self.q[(m, b)]).collect()
    }
}

/// Raw similarity scores `c_m · z_b`, arranged prototypes × events.
pub fn init_scores<T: Real>(
    bank: &PrototypeBank<T>,
    batch: &[Vector<T>],
) -> Result<Matrix<T>> {
    if batch.is_empty() {
        return Err(Error::Domain("assignment requires a non-empty batch"));
    }
    let m = bank.n_prototypes();
    let mut scores = Matrix::zeros(m, batch.len());
    for (b, z) in batch.iter().enumerate() {
        for (i, s) in bank.scores(z)?.into_iter().enumerate() {
            scores[(i, b)] = s;
        }
    }
    Ok(scores)
}

/// Runs `n_iters` rounds of log-domain row/column scaling on
/// `exp(scores / eps)`, then normalizes columns exactly.
///
/// With `n_iters = 0` this degenerates to an independent per-column
/// softmax at temperature `eps`.
pub fn sinkhorn_knopp<T: Real>(
    scores: &Matrix<T>,
    eps: T,
    n_iters: usize,
) -> Result<Assignment<T>> {
    let m = scores.rows();
    let b = scores.cols();
    if m == 0 || b == 0 {
        return Err(Error::Domain(
            "assignment requires at least one prototype and one event",
        ));
    }
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(Error::Domain("entropic regularizer must be positive"));
    }
    if !scores.is_finite() {
        return Err(Error::NonFinite("assignment scores"));
    }
    // Global shift keeps every exponential in range; the final plan is
    // invariant to it because the column scaling absorbs constants.
    let max = scores
        .as_slice()
        .iter()
        .fold(T::neg_infinity(), |acc, &x| acc.max(x));
    let mut log_k = Matrix::zeros(m, b);
    for (lk, &s) in log_k.as_mut_slice().iter_mut().zip(scores.as_slice()) {
        *lk = (s - max) / eps;
    }
    let row_target = T::of(b as f64 / m as f64);
    let log_row_target = row_target.ln();
    let mut alpha = vec![T::zero(); m];
    let mut beta = vec![T::zero(); b];
    let mut buf = vec![T::zero(); b.max(m)];
    for _ in 0..n_iters {
        for i in 0..m {
            for (t, (&lk, &be)) in buf.iter_mut().zip(log_k.row(i).iter().zip(&beta)) {
                *t = lk + be;
            }
            alpha[i] = log_row_target - log_sum_exp(&buf[..b])?;
        }
        for (j, be) in beta.iter_mut().enumerate() {
            for (i, t) in buf.iter_mut().enumerate().take(m) {
                *t = log_k[(i, j)] + alpha[i];
            }
            *be = -log_sum_exp(&buf[..m])?;
        }
    }
    let mut q = Matrix::zeros(m, b);
    for i in 0..m {
        for j in 0..b {
            q[(i, j)] = (log_k[(i, j)] + alpha[i] + beta[j]).exp();
        }
    }
    for j in 0..b {
        let mut mass = T::zero();
        for i in 0..m {
            mass += q[(i, j)];
        }
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::NonFinite("assignment column mass"));
        }
        for i in 0..m {
            q[(i, j)] /= mass;
        }
    }
    let mut violation = T::zero();
    for i in 0..m {
        let sum: T = q.row(i).iter().copied().sum();
        violation = violation.max(((sum - row_target) / row_target).abs());
    }
    Ok(Assignment {
        converged: violation <= T::of(ROW_TOL),
        iterations: n_iters,
        max_row_violation: violation,
        q,
    })
}

/// Scores a batch against the bank and balances the assignment. A batch
/// smaller than the number of prototypes cannot cover every prototype,
/// which is worth a warning but not an error.
pub fn assign_batch<T: Real>(
    bank: &PrototypeBank<T>,
    batch: &[Vector<T>],
    eps: T,
    n_iters: usize,
) -> Result<Assignment<T>> {
    if batch.len() < bank.n_prototypes() {
        log::warn!(
            "batch of {} events cannot balance {} prototypes",
            batch.len(),
            bank.n_prototypes()
        );
    }
    let scores = init_scores(bank, batch)?;
    sinkhorn_knopp(&scores, eps, n_iters)
}
