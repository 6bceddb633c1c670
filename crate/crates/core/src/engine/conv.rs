//! 2-D convolution and transposed convolution via im2col + gemm.
//!
//! Weights are stored as `(out, in, kh, kw)` in a [`Shape`] (`n = out`,
//! `c = in`). A transposed convolution reuses the same array as the adjoint
//! of the convolution with that weight, so it maps `n` channels back to `c`
//! channels (the PyTorch `ConvTranspose2d` layout).

use rand::Rng;

use super::layer::{Layer, Mode, NamedTensor, NamedTensorMut};
use super::real::{gemm, Layout, Real};
use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn conv(input: Shape, kh: usize, kw: usize, stride: usize, pad: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        if input.h + 2 * pad < kh || input.w + 2 * pad < kw {
            return Err(Error::Dimension(format!(
                "{kh}x{kw} kernel with padding {pad} does not fit a {}x{} input",
                input.h, input.w
            )));
        }
        Ok(Geometry {
            c: input.c,
            h: input.h,
            w: input.w,
            kh,
            kw,
            stride,
            pad,
            oh: (input.h + 2 * pad - kh) / stride + 1,
            ow: (input.w + 2 * pad - kw) / stride + 1,
        })
    }

    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }
}

fn im2col<T: Real>(x: &[T], g: &Geometry, out: &mut [T]) {
    let (p, s) = (g.pad as isize, g.stride as isize);
    let cols = g.cols();
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut out[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let iy = oy as isize * s + ki as isize - p;
                    let seg = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        seg.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in seg.iter_mut().enumerate() {
                        let ix = ox as isize * s + kj as isize - p;
                        *v = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(cols_buf: &[T], g: &Geometry, x: &mut [T]) {
    let (p, s) = (g.pad as isize, g.stride as isize);
    let cols = g.cols();
    for c in 0..g.c {
        let plane = &mut x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols_buf[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let iy = oy as isize * s + ki as isize - p;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let ix = ox as isize * s + kj as isize - p;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

fn check_bias<T: Real>(bias: Option<&Tensor<T>>, channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.len() != channels {
            return Err(Error::Shape(format!(
                "bias has {} entries for {channels} channels",
                b.len()
            )));
        }
    }
    Ok(())
}

fn add_bias<T: Real>(out: &mut [T], bias: Option<&Tensor<T>>, plane: usize) {
    if let Some(b) = bias {
        for (chunk, &bv) in out.chunks_mut(plane).zip(b.data()) {
            chunk.iter_mut().for_each(|v| *v = *v + bv);
        }
    }
}

/// Cross-correlation of `input (N, Cin, H, W)` with `weight (Cout, Cin, kh, kw)`.
pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (xs, ws) = (input.shape(), weight.shape());
    if xs.c != ws.c {
        return Err(Error::ChannelMismatch {
            expected: ws.c,
            actual: xs.c,
        });
    }
    check_bias(bias, ws.n)?;
    let g = Geometry::conv(xs, ws.h, ws.w, stride, padding)?;
    let out_shape = Shape::new(xs.n, ws.n, g.oh, g.ow);
    let mut out = Tensor::zeros(out_shape);
    let (k, p) = (g.rows(), g.cols());
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); k * p] };
    for n in 0..xs.n {
        let x = input.sample(n);
        let b: &[T] = if g.is_pointwise() {
            x
        } else {
            im2col(x, &g, &mut cols);
            &cols
        };
        let o = out.sample_mut(n);
        gemm(ws.n, k, p, weight.data(), Layout::Normal, b, Layout::Normal, T::zero(), o);
        add_bias(o, bias, p);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<ConvGrads<T>> {
    let (xs, ws) = (input.shape(), weight.shape());
    let g = Geometry::conv(xs, ws.h, ws.w, stride, padding)?;
    grad_out.expect_shape(Shape::new(xs.n, ws.n, g.oh, g.ow), "conv2d backward")?;
    let (k, p) = (g.rows(), g.cols());
    let mut dx = Tensor::zeros(xs);
    let mut dw = Tensor::zeros(ws);
    let mut db = Tensor::zeros(Shape::new(1, ws.n, 1, 1));
    let mut cols = vec![T::zero(); k * p];
    let mut dcols = vec![T::zero(); k * p];
    for n in 0..xs.n {
        let go = grad_out.sample(n);
        let x = input.sample(n);
        let b: &[T] = if g.is_pointwise() {
            x
        } else {
            im2col(x, &g, &mut cols);
            &cols
        };
        // dW += dOut (Cout x P) * cols^T (P x K)
        gemm(ws.n, p, k, go, Layout::Normal, b, Layout::Transposed, T::one(), dw.data_mut());
        for (c, chunk) in go.chunks(p).enumerate() {
            db.data_mut()[c] = db.data()[c] + chunk.iter().copied().sum();
        }
        // dcols = W^T (K x Cout) * dOut (Cout x P)
        if g.is_pointwise() {
            gemm(k, ws.n, p, weight.data(), Layout::Transposed, go, Layout::Normal, T::zero(), dx.sample_mut(n));
        } else {
            gemm(k, ws.n, p, weight.data(), Layout::Transposed, go, Layout::Normal, T::zero(), &mut dcols);
            col2im(&dcols, &g, dx.sample_mut(n));
        }
    }
    Ok(ConvGrads {
        input: dx,
        weight: dw,
        bias: db,
    })
}

fn transposed_geometry(input: Shape, weight: Shape, stride: usize) -> Result<Geometry> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    if input.c != weight.n {
        return Err(Error::ChannelMismatch {
            expected: weight.n,
            actual: input.c,
        });
    }
    if input.h == 0 || input.w == 0 {
        return Err(Error::Dimension(format!("empty input {input}")));
    }
    // geometry of the forward convolution whose adjoint this is
    let out_h = (input.h - 1) * stride + weight.h;
    let out_w = (input.w - 1) * stride + weight.w;
    let g = Geometry::conv(Shape::new(1, weight.c, out_h, out_w), weight.h, weight.w, stride, 0)?;
    debug_assert_eq!((g.oh, g.ow), (input.h, input.w));
    Ok(g)
}

/// Transposed convolution, output size `(H - 1) * stride + kh`.
pub fn conv_transpose2d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
) -> Result<Tensor<T>> {
    let (xs, ws) = (input.shape(), weight.shape());
    let g = transposed_geometry(xs, ws, stride)?;
    check_bias(bias, ws.c)?;
    let out_shape = Shape::new(xs.n, ws.c, g.h, g.w);
    let mut out = Tensor::zeros(out_shape);
    let (k, p) = (g.rows(), g.cols());
    let mut cols = vec![T::zero(); k * p];
    for n in 0..xs.n {
        // cols (K x P) = W^T (K x Cin_t) * x (Cin_t x P)
        gemm(k, ws.n, p, weight.data(), Layout::Transposed, input.sample(n), Layout::Normal, T::zero(), &mut cols);
        let o = out.sample_mut(n);
        col2im(&cols, &g, o);
        add_bias(o, bias, g.h * g.w);
    }
    Ok(out)
}

pub fn conv_transpose2d_backward<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
) -> Result<ConvGrads<T>> {
    let (xs, ws) = (input.shape(), weight.shape());
    let g = transposed_geometry(xs, ws, stride)?;
    grad_out.expect_shape(Shape::new(xs.n, ws.c, g.h, g.w), "transposed conv backward")?;
    let (k, p) = (g.rows(), g.cols());
    let mut dx = Tensor::zeros(xs);
    let mut dw = Tensor::zeros(ws);
    let mut db = Tensor::zeros(Shape::new(1, ws.c, 1, 1));
    let mut dcols = vec![T::zero(); k * p];
    let plane = g.h * g.w;
    for n in 0..xs.n {
        let go = grad_out.sample(n);
        im2col(go, &g, &mut dcols);
        // dx (Cin_t x P) = W (Cin_t x K) * dcols (K x P)
        gemm(ws.n, k, p, weight.data(), Layout::Normal, &dcols, Layout::Normal, T::zero(), dx.sample_mut(n));
        // dW (Cin_t x K) += x (Cin_t x P) * dcols^T (P x K)
        gemm(ws.n, p, k, input.sample(n), Layout::Normal, &dcols, Layout::Transposed, T::one(), dw.data_mut());
        for (c, chunk) in go.chunks(plane).enumerate() {
            db.data_mut()[c] = db.data()[c] + chunk.iter().copied().sum();
        }
    }
    Ok(ConvGrads {
        input: dx,
        weight: dw,
        bias: db,
    })
}

/// He (fan-in) scaled Gaussian.
fn he_weight<T: Real, R: Rng + ?Sized>(shape: Shape, fan_in: usize, rng: &mut R) -> Tensor<T> {
    Tensor::randn(shape, (2.0 / fan_in.max(1) as f64).sqrt(), rng).requires_grad()
}

#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
    cached_input: Option<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let shape = Shape::new(out_channels, in_channels, kernel, kernel);
        Conv2d {
            weight: he_weight(shape, in_channels * kernel * kernel, rng),
            bias: Tensor::zeros(Shape::new(1, out_channels, 1, 1)).requires_grad(),
            stride,
            padding,
            cached_input: None,
        }
    }

    /// Stride-1 convolution with "same" zero padding (odd kernels).
    pub fn same<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        Self::new(in_channels, out_channels, kernel, 1, kernel / 2, rng)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape().c
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape().n
    }
}

impl<T: Real> Layer<T> for Conv2d<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let out = conv2d(input, &self.weight, Some(&self.bias), self.stride, self.padding)?;
        self.cached_input = mode.is_train().then(|| input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self.cached_input.as_ref().ok_or(Error::NoForwardCache)?;
        let g = conv2d_backward(grad_output, input, &self.weight, self.stride, self.padding)?;
        self.weight.accumulate_grad(g.weight.data());
        self.bias.accumulate_grad(g.bias.data());
        Ok(g.input)
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<NamedTensor<'a, T>>) {
        out.push((format!("{prefix}weight"), &self.weight));
        out.push((format!("{prefix}bias"), &self.bias));
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedTensorMut<'a, T>>) {
        out.push((format!("{prefix}weight"), &mut self.weight));
        out.push((format!("{prefix}bias"), &mut self.bias));
    }
}

#[derive(Debug, Clone)]
pub struct ConvTranspose2d<T> {
    /// `(in, out, kh, kw)`.
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    cached_input: Option<Tensor<T>>,
}

impl<T: Real> ConvTranspose2d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let shape = Shape::new(in_channels, out_channels, kernel, kernel);
        // each output pixel sees in_channels * (kernel / stride)^2 inputs
        let taps = (kernel * kernel / (stride * stride)).max(1);
        ConvTranspose2d {
            weight: he_weight(shape, in_channels * taps, rng),
            bias: Tensor::zeros(Shape::new(1, out_channels, 1, 1)).requires_grad(),
            stride,
            cached_input: None,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape().c
    }
}

impl<T: Real> Layer<T> for ConvTranspose2d<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let out = conv_transpose2d(input, &self.weight, Some(&self.bias), self.stride)?;
        self.cached_input = mode.is_train().then(|| input.clone());
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self.cached_input.as_ref().ok_or(Error::NoForwardCache)?;
        let g = conv_transpose2d_backward(grad_output, input, &self.weight, self.stride)?;
        self.weight.accumulate_grad(g.weight.data());
        self.bias.accumulate_grad(g.bias.data());
        Ok(g.input)
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<NamedTensor<'a, T>>) {
        out.push((format!("{prefix}weight"), &self.weight));
        out.push((format!("{prefix}bias"), &self.bias));
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedTensorMut<'a, T>>) {
        out.push((format!("{prefix}weight"), &mut self.weight));
        out.push((format!("{prefix}bias"), &mut self.bias));
    }
}
