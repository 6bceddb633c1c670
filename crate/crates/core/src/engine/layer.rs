use super::real::Real;
use super::tensor::Tensor;
use crate::error::Result;

pub type NamedTensor<'a, T> = (String, &'a Tensor<T>);
pub type NamedTensorMut<'a, T> = (String, &'a mut Tensor<T>);

/// Forward-pass mode. Train mode uses batch statistics in batch norm and
/// caches whatever the backward pass needs; infer mode does neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

impl Mode {
    pub fn is_train(self) -> bool {
        self == Mode::Train
    }
}

/// A differentiable block with explicit forward and backward passes.
///
/// `backward` takes the gradient of a scalar loss w.r.t. the output of the
/// most recent train-mode `forward`, accumulates parameter gradients, and
/// returns the gradient w.r.t. the input.
pub trait Layer<T: Real> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>>;

    /// All state tensors (trainable or not) with stable dotted names.
    fn tensors<'a>(&'a self, _prefix: &str, _out: &mut Vec<NamedTensor<'a, T>>) {}

    fn tensors_mut<'a>(&'a mut self, _prefix: &str, _out: &mut Vec<NamedTensorMut<'a, T>>) {}

    fn named_tensors(&self) -> Vec<NamedTensor<'_, T>> {
        let mut out = Vec::new();
        self.tensors("", &mut out);
        out
    }

    fn named_tensors_mut(&mut self) -> Vec<NamedTensorMut<'_, T>> {
        let mut out = Vec::new();
        self.tensors_mut("", &mut out);
        out
    }

    /// Trainable tensors, in a fixed order.
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.named_tensors_mut()
            .into_iter()
            .map(|(_, t)| t)
            .filter(|t| t.is_trainable())
            .collect()
    }

    fn zero_grad(&mut self) {
        for t in self.params_mut() {
            t.zero_grad();
        }
    }

    /// Total number of stored values, running statistics included.
    fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

/// Applies layers one after another.
pub struct Sequential<T> {
    layers: Vec<(String, Box<dyn Layer<T> + Send>)>,
}

impl<T: Real> Default for Sequential<T> {
    fn default() -> Self {
        Sequential { layers: Vec::new() }
    }
}

impl<T: Real> Sequential<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, name: &str, layer: impl Layer<T> + Send + 'static) -> Self {
        self.layers.push((name.to_string(), Box::new(layer)));
        self
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl<T: Real> Layer<T> for Sequential<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for (_, layer) in &mut self.layers {
            x = layer.forward(&x, mode)?;
        }
        Ok(x)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad_output.clone();
        for (_, layer) in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<NamedTensor<'a, T>>) {
        for (name, layer) in &self.layers {
            layer.tensors(&format!("{prefix}{name}."), out);
        }
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedTensorMut<'a, T>>) {
        for (name, layer) in &mut self.layers {
            layer.tensors_mut(&format!("{prefix}{name}."), out);
        }
    }
}
