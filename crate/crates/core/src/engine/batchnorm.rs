use super::layer::{Layer, Mode, NamedTensor, NamedTensorMut};
use super::real::Real;
use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

pub const DEFAULT_BN_EPS: f64 = 1e-5;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.99;

/// Per-channel batch normalization over `N x H x W`.
///
/// Running statistics follow `running = momentum * running + (1 - momentum) * batch`.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Real> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        let s = Shape::new(1, channels, 1, 1);
        BatchNorm2d {
            gamma: Tensor::full(s, T::one()).requires_grad(),
            beta: Tensor::zeros(s).requires_grad(),
            running_mean: Tensor::zeros(s),
            running_var: Tensor::full(s, T::one()),
            momentum: DEFAULT_BN_MOMENTUM,
            eps: DEFAULT_BN_EPS,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

impl<T: Real> Layer<T> for BatchNorm2d<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let s = input.shape();
        if s.c != self.channels() {
            return Err(Error::ChannelMismatch {
                expected: self.channels(),
                actual: s.c,
            });
        }
        let plane = s.plane();
        let count = s.n * plane;
        if count == 0 {
            return Err(Error::Dimension(format!("empty batch {s}")));
        }
        let eps = T::from_f64_lossy(self.eps);
        let (mean, var): (Vec<T>, Vec<T>) = if mode.is_train() {
            let m = T::from_usize(count).unwrap_or_else(T::one);
            let stats: (Vec<T>, Vec<T>) = (0..s.c)
                .map(|c| {
                    let mut sum = T::zero();
                    for n in 0..s.n {
                        sum = sum + input.sample(n)[c * plane..(c + 1) * plane].iter().copied().sum();
                    }
                    let mean = sum / m;
                    let mut sq = T::zero();
                    for n in 0..s.n {
                        for &v in &input.sample(n)[c * plane..(c + 1) * plane] {
                            sq = sq + (v - mean) * (v - mean);
                        }
                    }
                    (mean, sq / m)
                })
                .unzip();
            let mom = T::from_f64_lossy(self.momentum);
            let one_m = T::one() - mom;
            for c in 0..s.c {
                let rm = &mut self.running_mean.data_mut()[c];
                *rm = mom * *rm + one_m * stats.0[c];
                let rv = &mut self.running_var.data_mut()[c];
                *rv = mom * *rv + one_m * stats.1[c];
            }
            stats
        } else {
            (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            )
        };

        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = Tensor::zeros(s);
        let mut out = Tensor::zeros(s);
        for n in 0..s.n {
            let x = input.sample(n);
            for c in 0..s.c {
                let (g, b) = (self.gamma.data()[c], self.beta.data()[c]);
                for i in c * plane..(c + 1) * plane {
                    let xh = (x[i] - mean[c]) * inv_std[c];
                    xhat.sample_mut(n)[i] = xh;
                    out.sample_mut(n)[i] = g * xh + b;
                }
            }
        }
        self.cache = mode.is_train().then_some(BnCache { xhat, inv_std });
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or(Error::NoForwardCache)?;
        let s = cache.xhat.shape();
        grad_output.expect_shape(s, "batch norm backward")?;
        let plane = s.plane();
        let m = T::from_usize(s.n * plane).unwrap_or_else(T::one);
        let mut dgamma = vec![T::zero(); s.c];
        let mut dbeta = vec![T::zero(); s.c];
        for n in 0..s.n {
            let (go, xh) = (grad_output.sample(n), cache.xhat.sample(n));
            for c in 0..s.c {
                for i in c * plane..(c + 1) * plane {
                    dbeta[c] = dbeta[c] + go[i];
                    dgamma[c] = dgamma[c] + go[i] * xh[i];
                }
            }
        }
        let mut dx = Tensor::zeros(s);
        for n in 0..s.n {
            let (go, xh) = (grad_output.sample(n), cache.xhat.sample(n));
            let out = dx.sample_mut(n);
            for c in 0..s.c {
                let g = self.gamma.data()[c];
                let k = g * cache.inv_std[c];
                for i in c * plane..(c + 1) * plane {
                    // dx = g / sigma * (dy - mean(dy) - xhat * mean(dy * xhat))
                    out[i] = k * (go[i] - dbeta[c] / m - xh[i] * dgamma[c] / m);
                }
            }
        }
        self.gamma.accumulate_grad(&dgamma);
        self.beta.accumulate_grad(&dbeta);
        Ok(dx)
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<NamedTensor<'a, T>>) {
        out.push((format!("{prefix}gamma"), &self.gamma));
        out.push((format!("{prefix}beta"), &self.beta));
        out.push((format!("{prefix}running_mean"), &self.running_mean));
        out.push((format!("{prefix}running_var"), &self.running_var));
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedTensorMut<'a, T>>) {
        out.push((format!("{prefix}gamma"), &mut self.gamma));
        out.push((format!("{prefix}beta"), &mut self.beta));
        out.push((format!("{prefix}running_mean"), &mut self.running_mean));
        out.push((format!("{prefix}running_var"), &mut self.running_var));
    }
}
