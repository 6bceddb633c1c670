use super::kink;
use super::layer::{Layer, Mode};
use super::real::Real;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

pub fn sigmoid_scalar<T: Real>(v: T) -> T {
    // split on sign so exp never overflows
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Gradient through ReLU given its output (subgradient 0 at the kink).
pub fn relu_backward<T: Real>(grad_output: &Tensor<T>, output: &Tensor<T>) -> Result<Tensor<T>> {
    grad_output.expect_shape(output.shape(), "relu backward")?;
    let mut g = grad_output.clone();
    for (gv, &o) in g.data_mut().iter_mut().zip(output.data()) {
        if o <= T::zero() {
            *gv = T::zero();
        }
    }
    Ok(g)
}

pub fn sigmoid_backward<T: Real>(grad_output: &Tensor<T>, output: &Tensor<T>) -> Result<Tensor<T>> {
    grad_output.expect_shape(output.shape(), "sigmoid backward")?;
    let mut g = grad_output.clone();
    for (gv, &s) in g.data_mut().iter_mut().zip(output.data()) {
        *gv = *gv * s * (T::one() - s);
    }
    Ok(g)
}

#[derive(Debug, Clone, Default)]
pub struct Relu<T> {
    output: Option<Tensor<T>>,
}

impl<T: Real> Relu<T> {
    pub fn new() -> Self {
        Relu { output: None }
    }
}

impl<T: Real> Layer<T> for Relu<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if kink::recording() {
            kink::record_signs(input.data());
        }
        let y = relu(input);
        self.output = mode.is_train().then(|| y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        relu_backward(grad_output, self.output.as_ref().ok_or(Error::NoForwardCache)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid<T> {
    output: Option<Tensor<T>>,
}

impl<T: Real> Sigmoid<T> {
    pub fn new() -> Self {
        Sigmoid { output: None }
    }
}

impl<T: Real> Layer<T> for Sigmoid<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = sigmoid(input);
        self.output = mode.is_train().then(|| y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        sigmoid_backward(grad_output, self.output.as_ref().ok_or(Error::NoForwardCache)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Shape;

    #[test]
    fn relu_values() {
        let x = Tensor::<f64>::new(Shape::new(1, 1, 1, 3), vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid_scalar(0.0f64), 0.5);
        assert!(sigmoid_scalar(-1000.0f64) >= 0.0);
        assert!((sigmoid_scalar(1000.0f32) - 1.0).abs() < 1e-7);
        let a = sigmoid_scalar(1.3f64);
        let b = sigmoid_scalar(-1.3f64);
        assert!((a + b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backward_without_forward_fails() {
        let mut r = Relu::<f32>::new();
        assert!(matches!(
            r.backward(&Tensor::zeros(Shape::new(1, 1, 1, 1))),
            Err(Error::NoForwardCache)
        ));
    }
}
