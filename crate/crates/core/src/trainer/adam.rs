//! Bias-corrected Adam over one flat parameter group.

use crate::numerics::Real;
use crate::{Error, Result};

/// First/second moment accumulators for one parameter group.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: u64,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> AdamState<T> {
    /// Fresh optimizer with beta1=0.9, beta2=0.999, eps=1e-8.
    pub fn new(n_params: usize, lr: T) -> Result<AdamState<T>> {
        if !(lr > T::zero()) || !lr.is_finite() {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if n_params == 0 {
            return Err(Error::Config("empty parameter group".into()));
        }
        Ok(AdamState {
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            t: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
        })
    }

    pub fn lr(&self) -> T {
        self.lr
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One in-place update: `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer holds {} parameters, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let t = T::of(self.t as f64);
        let bc1 = T::one() - self.beta1.powf(t);
        let bc2 = T::one() - self.beta2.powf(t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (T::one() - self.beta1) * g;
            *v = self.beta2 * *v + (T::one() - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
