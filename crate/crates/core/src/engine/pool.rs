use super::kink;
use super::layer::{Layer, Mode};
use super::real::Real;
use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

/// Max pooling with a square window. Trailing rows/columns that do not fill
/// a window are dropped. The backward pass routes each window's gradient to
/// its first maximal element in row-major order.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub window: usize,
    pub stride: usize,
    argmax: Option<(Shape, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(window: usize, stride: usize) -> Self {
        MaxPool2d {
            window,
            stride,
            argmax: None,
        }
    }

    fn out_dims(&self, s: Shape) -> Result<(usize, usize)> {
        if self.window == 0 || self.stride == 0 {
            return Err(Error::InvalidParameter("pool window and stride must be positive".into()));
        }
        if s.h < self.window || s.w < self.window {
            return Err(Error::Dimension(format!(
                "{}x{} pool does not fit a {}x{} input",
                self.window, self.window, s.h, s.w
            )));
        }
        Ok((
            (s.h - self.window) / self.stride + 1,
            (s.w - self.window) / self.stride + 1,
        ))
    }
}

impl Default for MaxPool2d {
    fn default() -> Self {
        Self::new(2, 2)
    }
}

pub fn max_pool<T: Real>(input: &Tensor<T>, window: usize, stride: usize) -> Result<Tensor<T>> {
    MaxPool2d::new(window, stride).forward(input, Mode::Infer)
}

impl<T: Real> Layer<T> for MaxPool2d {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let s = input.shape();
        let (oh, ow) = self.out_dims(s)?;
        let out_shape = Shape::new(s.n, s.c, oh, ow);
        let mut out = Vec::with_capacity(out_shape.len());
        let mut idx = Vec::with_capacity(out_shape.len());
        for nc in 0..s.n * s.c {
            let base = nc * s.plane();
            let plane = &input.data()[base..base + s.plane()];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = oy * self.stride * s.w + ox * self.stride;
                    for ky in 0..self.window {
                        for kx in 0..self.window {
                            let i = (oy * self.stride + ky) * s.w + ox * self.stride + kx;
                            if plane[i] > plane[best] {
                                best = i;
                            }
                        }
                    }
                    out.push(plane[best]);
                    idx.push(base + best);
                }
            }
        }
        if kink::recording() {
            kink::record_indices(&idx);
        }
        self.argmax = mode.is_train().then_some((s, idx));
        Tensor::new(out_shape, out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let (s, idx) = self.argmax.as_ref().ok_or(Error::NoForwardCache)?;
        if grad_output.len() != idx.len() {
            return Err(Error::Shape(format!(
                "max pool backward: {} gradients for {} windows",
                grad_output.len(),
                idx.len()
            )));
        }
        let mut dx = Tensor::zeros(*s);
        for (&i, &g) in idx.iter().zip(grad_output.data()) {
            dx.data_mut()[i] = dx.data()[i] + g;
        }
        Ok(dx)
    }
}
