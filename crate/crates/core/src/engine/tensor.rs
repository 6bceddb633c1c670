use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

/// `N x C x H x W` shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn sample(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense NCHW array with an optional gradient buffer. Parameters carry a
/// gradient, activations and running statistics do not.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "{} values for shape {shape}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.len()],
            grad: None,
        }
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.len()],
            grad: None,
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize) -> T) -> Self {
        Tensor {
            shape,
            data: (0..shape.len()).map(&mut f).collect(),
            grad: None,
        }
    }

    /// Standard normal entries scaled by `std`.
    pub fn randn<R: Rng + ?Sized>(shape: Shape, std: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| {
            let z: f64 = StandardNormal.sample(rng);
            T::from_f64_lossy(z * std)
        })
    }

    pub fn uniform<R: Rng + ?Sized>(shape: Shape, lo: f64, hi: f64, rng: &mut R) -> Self {
        Self::from_fn(shape, |_| T::from_f64_lossy(rng.random_range(lo..hi)))
    }

    /// Attach a zeroed gradient buffer, marking this tensor as trainable.
    pub fn requires_grad(mut self) -> Self {
        self.grad = Some(vec![T::zero(); self.data.len()]);
        self
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [T]> {
        self.grad.as_deref_mut()
    }

    pub fn is_trainable(&self) -> bool {
        self.grad.is_some()
    }

    /// Split borrow of values and gradient.
    pub fn data_and_grad_mut(&mut self) -> (&mut [T], Option<&mut [T]>) {
        (&mut self.data, self.grad.as_deref_mut())
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Add `delta` into the gradient buffer.
    pub fn accumulate_grad(&mut self, delta: &[T]) {
        if let Some(g) = &mut self.grad {
            for (a, &b) in g.iter_mut().zip(delta) {
                *a = *a + b;
            }
        }
    }

    pub fn sample(&self, n: usize) -> &[T] {
        let s = self.shape.sample();
        &self.data[n * s..(n + 1) * s]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [T] {
        let s = self.shape.sample();
        &mut self.data[n * s..(n + 1) * s]
    }

    pub fn reshape(mut self, shape: Shape) -> Result<Self> {
        if shape.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {} into {shape}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Self> {
        self.expect_shape(other.shape, "add")?;
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
            grad: None,
        })
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) -> Result<()> {
        self.expect_shape(other.shape, "add")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    /// `sum(self * other)` in index order.
    pub fn dot(&self, other: &Tensor<T>) -> Result<T> {
        self.expect_shape(other.shape, "dot")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize(self.len().max(1)).unwrap_or_else(T::one)
    }

    pub fn expect_shape(&self, shape: Shape, what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::Shape(format!(
                "{what}: expected {shape}, got {}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Element-wise cast to another precision.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_lossy(v.as_f64()))
                .collect(),
            grad: self.grad.as_ref().map(|g| vec![U::zero(); g.len()]),
        }
    }
}

/// Channel concatenation `[a | b]`.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if (sa.n, sa.h, sa.w) != (sb.n, sb.h, sb.w) {
        return Err(Error::Shape(format!("cannot concatenate {sa} and {sb}")));
    }
    let shape = Shape::new(sa.n, sa.c + sb.c, sa.h, sa.w);
    let mut data = Vec::with_capacity(shape.len());
    for n in 0..sa.n {
        data.extend_from_slice(a.sample(n));
        data.extend_from_slice(b.sample(n));
    }
    Tensor::new(shape, data)
}

/// Inverse of [`concat_channels`] for gradients: first `c_first` channels, then the rest.
pub fn split_channels<T: Real>(x: &Tensor<T>, c_first: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = x.shape();
    if c_first > s.c {
        return Err(Error::Shape(format!("cannot split {c_first} channels from {s}")));
    }
    let sa = Shape::new(s.n, c_first, s.h, s.w);
    let sb = Shape::new(s.n, s.c - c_first, s.h, s.w);
    let mut da = Vec::with_capacity(sa.len());
    let mut db = Vec::with_capacity(sb.len());
    for n in 0..s.n {
        let sample = x.sample(n);
        let cut = c_first * s.plane();
        da.extend_from_slice(&sample[..cut]);
        db.extend_from_slice(&sample[cut..]);
    }
    Ok((Tensor::new(sa, da)?, Tensor::new(sb, db)?))
}
