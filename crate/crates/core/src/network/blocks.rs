use rand::Rng;

use super::spec::{EncoderStageSpec, RsbSpec, SkipMode};
use crate::engine::{
    BatchNorm2d, Conv2d, ConvTranspose2d, Layer, MaxPool2d, Mode, NamedTensor, NamedTensorMut, Real, Relu,
    Sequential, Tensor,
};
use crate::error::{Error, Result};

/// Residual skip block built from an [`RsbSpec`].
pub struct ResidualBlock<T> {
    main: Sequential<T>,
    shortcut: Option<Sequential<T>>,
    out: Relu<T>,
}

impl<T: Real> ResidualBlock<T> {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, spec: &RsbSpec, rng: &mut R) -> Result<Self> {
        if spec.skip == SkipMode::FromInput && (spec.stride != 1 || in_channels != spec.filters) {
            return Err(Error::Spec(format!(
                "input shortcut needs stride 1 and matching widths, got {in_channels} -> {} stride {}",
                spec.filters, spec.stride
            )));
        }
        let b = spec.bottleneck;
        let main = Sequential::new()
            .push("conv1", Conv2d::new(in_channels, b, 1, spec.stride, 0, rng))
            .push("bn1", BatchNorm2d::new(b))
            .push("relu1", Relu::new())
            .push("conv2", Conv2d::same(b, b, spec.kernel, rng))
            .push("bn2", BatchNorm2d::new(b))
            .push("relu2", Relu::new())
            .push("conv3", Conv2d::new(b, spec.filters, 1, 1, 0, rng))
            .push("bn3", BatchNorm2d::new(spec.filters));
        let shortcut = match spec.skip {
            SkipMode::FromInput => None,
            SkipMode::FromIntermediateConv => Some(
                Sequential::new()
                    .push("conv", Conv2d::new(in_channels, spec.filters, 1, spec.stride, 0, rng))
                    .push("bn", BatchNorm2d::new(spec.filters)),
            ),
        };
        Ok(ResidualBlock {
            main,
            shortcut,
            out: Relu::new(),
        })
    }
}

impl<T: Real> Layer<T> for ResidualBlock<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut y = self.main.forward(input, mode)?;
        match &mut self.shortcut {
            Some(s) => y.add_assign(&s.forward(input, mode)?)?,
            None => y.add_assign(input)?,
        }
        self.out.forward(&y, mode)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.out.backward(grad_output)?;
        let mut dx = self.main.backward(&g)?;
        match &mut self.shortcut {
            Some(s) => dx.add_assign(&s.backward(&g)?)?,
            None => dx.add_assign(&g)?,
        }
        Ok(dx)
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<NamedTensor<'a, T>>) {
        self.main.tensors(prefix, out);
        if let Some(s) = &self.shortcut {
            s.tensors(&format!("{prefix}shortcut."), out);
        }
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedTensorMut<'a, T>>) {
        self.main.tensors_mut(prefix, out);
        if let Some(s) = &mut self.shortcut {
            s.tensors_mut(&format!("{prefix}shortcut."), out);
        }
    }
}

/// Build one encoder stage; returns the layer and its output width.
pub fn encoder_stage<T: Real, R: Rng + ?Sized>(
    in_channels: usize,
    spec: &EncoderStageSpec,
    rng: &mut R,
) -> Result<(Sequential<T>, usize)> {
    let mut seq = Sequential::new();
    let mut c = in_channels;
    match spec {
        EncoderStageSpec::Stem {
            filters,
            kernel,
            down_filters,
        } => {
            seq = seq
                .push("conv", Conv2d::same(c, *filters, *kernel, rng))
                .push("bn", BatchNorm2d::new(*filters))
                .push("relu", Relu::new())
                .push("down", Conv2d::new(*filters, *down_filters, 3, 2, 1, rng))
                .push("down_bn", BatchNorm2d::new(*down_filters))
                .push("down_relu", Relu::new());
            c = *down_filters;
        }
        EncoderStageSpec::Residual { blocks } => {
            for (i, b) in blocks.iter().enumerate() {
                seq = seq.push(&format!("rsb{i}"), ResidualBlock::new(c, b, rng)?);
                c = b.filters;
            }
        }
        EncoderStageSpec::Vgg { filters } => {
            for (i, &f) in filters.iter().enumerate() {
                seq = seq
                    .push(&format!("conv{i}"), Conv2d::same(c, f, 3, rng))
                    .push(&format!("relu{i}"), Relu::new());
                c = f;
            }
            seq = seq.push("pool", MaxPool2d::default());
        }
    }
    Ok((seq, c))
}

/// 3x3 conv + BN + ReLU, then 2x2 stride-2 transposed conv + ReLU.
pub fn decoder_body<T: Real, R: Rng + ?Sized>(
    in_channels: usize,
    filters: usize,
    up_filters: usize,
    rng: &mut R,
) -> Sequential<T> {
    Sequential::new()
        .push("conv", Conv2d::same(in_channels, filters, 3, rng))
        .push("bn", BatchNorm2d::new(filters))
        .push("relu", Relu::new())
        .push("up", ConvTranspose2d::new(filters, up_filters, 2, 2, rng))
        .push("up_relu", Relu::new())
}

pub fn head_body<T: Real, R: Rng + ?Sized>(
    in_channels: usize,
    up_filters: Option<usize>,
    kernel: usize,
    outputs: usize,
    rng: &mut R,
) -> Sequential<T> {
    let mut seq = Sequential::new();
    let mut c = in_channels;
    if let Some(up) = up_filters {
        seq = seq
            .push("up", ConvTranspose2d::new(c, up, 2, 2, rng))
            .push("up_relu", Relu::new());
        c = up;
    }
    seq.push("conv", Conv2d::same(c, outputs, kernel, rng))
}
