use serde::{Deserialize, Serialize};

use super::real::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are created on the first step
/// and matched to parameters by position.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Apply one update using the gradients currently stored in `params`.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer holds {} moment buffers for {} parameters",
                self.m.len(),
                params.len()
            )));
        }
        for (i, p) in params.iter().enumerate() {
            if self.m[i].len() != p.len() || self.v[i].len() != p.len() {
                return Err(Error::Shape(format!(
                    "optimizer buffer {i} has {} values, parameter has {}",
                    self.m[i].len(),
                    p.len()
                )));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let lr_t = c.lr * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t));
        let (b1, b2) = (T::from_f64_lossy(c.beta1), T::from_f64_lossy(c.beta2));
        let (lr_t, eps) = (T::from_f64_lossy(lr_t), T::from_f64_lossy(c.eps));
        // the eps placement matches the bias-corrected form m_hat / (sqrt(v_hat) + eps)
        let eps_hat = eps * T::from_f64_lossy((1.0 - c.beta2.powi(t)).sqrt());
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let (data, grad) = p.data_and_grad_mut();
            let Some(grad) = grad else { continue };
            for (((x, &g), mi), vi) in data.iter_mut().zip(grad.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                *x = *x - lr_t * *mi / (vi.sqrt() + eps_hat);
            }
        }
        Ok(())
    }
}
