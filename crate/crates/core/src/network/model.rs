use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::blocks::{decoder_body, encoder_stage, head_body};
use super::spec::{NetworkSpec, ShapeTrace};
use crate::engine::{
    concat_channels, sigmoid, sigmoid_backward, split_channels, Layer, Mode, NamedTensor, NamedTensorMut, Real,
    Sequential, Shape, Tensor,
};
use crate::error::{Error, Result};

struct SkipBlock<T> {
    skip: Option<usize>,
    /// Channels of the running tensor before the skip is appended.
    own_channels: usize,
    body: Sequential<T>,
}

/// SUIM-Net encoder-decoder instantiated from a [`NetworkSpec`].
///
/// As a [`Layer`], `forward` returns per-channel probabilities and
/// `backward` expects the gradient w.r.t. those probabilities. Training
/// goes through [`Network::forward_logits`] and [`Network::backward_logits`]
/// so the sigmoid and cross-entropy gradients can be fused.
pub struct Network<T> {
    spec: NetworkSpec,
    trace: ShapeTrace,
    encoder: Vec<Sequential<T>>,
    decoder: Vec<SkipBlock<T>>,
    head: SkipBlock<T>,
    probs: Option<Tensor<T>>,
}

impl<T: Real> Network<T> {
    /// Instantiate with He-scaled Gaussian weights drawn from `spec.seed`.
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        let trace = spec.trace()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut c = 3;
        let mut encoder = Vec::with_capacity(spec.encoder.len());
        for stage in &spec.encoder {
            let (seq, out) = encoder_stage(c, stage, &mut rng)?;
            encoder.push(seq);
            c = out;
        }
        let widths: Vec<usize> = trace.encoder.iter().map(|s| s.channels).collect();
        let skip_width = |s: Option<usize>| s.map_or(0, |i| widths[i]);
        let mut decoder = Vec::with_capacity(spec.decoder.len());
        for d in &spec.decoder {
            decoder.push(SkipBlock {
                skip: d.skip,
                own_channels: c,
                body: decoder_body(c + skip_width(d.skip), d.filters, d.up_filters, &mut rng),
            });
            c = d.up_filters;
        }
        let head = SkipBlock {
            skip: spec.head.skip,
            own_channels: c,
            body: head_body(
                c + skip_width(spec.head.skip),
                spec.head.up_filters,
                spec.head.kernel,
                spec.num_output_channels,
                &mut rng,
            ),
        };
        Ok(Network {
            spec: spec.clone(),
            trace,
            encoder,
            decoder,
            head,
            probs: None,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn trace(&self) -> &ShapeTrace {
        &self.trace
    }

    pub fn output_channels(&self) -> usize {
        self.spec.num_output_channels
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        let s = input.shape();
        let r = self.spec.input_resolution;
        if s.c != 3 {
            return Err(Error::ChannelMismatch {
                expected: 3,
                actual: s.c,
            });
        }
        if (s.w, s.h) != (r.width, r.height) {
            return Err(Error::Dimension(format!(
                "network expects {r} input, got {}x{}",
                s.w, s.h
            )));
        }
        Ok(())
    }

    /// Pre-sigmoid outputs, `N x outputs x H x W`.
    pub fn forward_logits(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut feats: Vec<Tensor<T>> = Vec::with_capacity(self.encoder.len());
        let mut x = input.clone();
        for stage in &mut self.encoder {
            x = stage.forward(&x, mode)?;
            feats.push(x.clone());
        }
        for block in self.decoder.iter_mut().chain(std::iter::once(&mut self.head)) {
            if let Some(s) = block.skip {
                x = concat_channels(&x, &feats[s])?;
            }
            x = block.body.forward(&x, mode)?;
        }
        Ok(x)
    }

    /// Backpropagate a gradient w.r.t. the logits of the last train-mode
    /// forward pass; returns the gradient w.r.t. the input batch.
    pub fn backward_logits(&mut self, grad_logits: &Tensor<T>) -> Result<Tensor<T>> {
        let mut skip_grads: Vec<Option<Tensor<T>>> = vec![None; self.encoder.len()];
        let mut g = grad_logits.clone();
        for block in std::iter::once(&mut self.head).chain(self.decoder.iter_mut().rev()) {
            g = block.body.backward(&g)?;
            if let Some(s) = block.skip {
                let (own, skip) = split_channels(&g, block.own_channels)?;
                match &mut skip_grads[s] {
                    Some(acc) => acc.add_assign(&skip)?,
                    slot => *slot = Some(skip),
                }
                g = own;
            }
        }
        for (i, stage) in self.encoder.iter_mut().enumerate().rev() {
            if let Some(extra) = &skip_grads[i] {
                g.add_assign(extra)?;
            }
            g = stage.backward(&g)?;
        }
        Ok(g)
    }

    /// Per-channel probabilities in infer mode.
    pub fn predict(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(sigmoid(&self.forward_logits(input, Mode::Infer)?))
    }

    /// Random probe batch used for round-trip and determinism checks.
    pub fn probe_input(&self, batch: usize, seed: u64) -> Tensor<T> {
        let r = self.spec.input_resolution;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::uniform(Shape::new(batch, 3, r.height, r.width), 0.0, 1.0, &mut rng)
    }

    /// One line per encoder stage and decoder block with output shape and
    /// parameter count.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} network, input {}x3, {} outputs\n",
            self.spec.variant.to_string().to_uppercase(),
            self.spec.input_resolution,
            self.spec.num_output_channels
        );
        for (i, (stage, shape)) in self.encoder.iter().zip(&self.trace.encoder).enumerate() {
            out += &format!("  encoder {i:<2} {shape:<14} {:>10}\n", stage.param_count());
        }
        for (i, (block, shape)) in self.decoder.iter().zip(&self.trace.decoder).enumerate() {
            out += &format!("  decoder {i:<2} {shape:<14} {:>10}\n", block.body.param_count());
        }
        out += &format!(
            "  head       {:<14} {:>10}\n",
            self.trace.output.to_string(),
            self.head.body.param_count()
        );
        out += &format!("  total                     {:>10}\n", self.param_count());
        out
    }
}

impl<T: Real> Layer<T> for Network<T> {
    fn forward(&mut self, input: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let p = sigmoid(&self.forward_logits(input, mode)?);
        self.probs = mode.is_train().then(|| p.clone());
        Ok(p)
    }

    fn backward(&mut self, grad_output: &Tensor<T>) -> Result<Tensor<T>> {
        let p = self.probs.as_ref().ok_or(Error::NoForwardCache)?;
        let g = sigmoid_backward(grad_output, p)?;
        self.backward_logits(&g)
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<NamedTensor<'a, T>>) {
        for (i, s) in self.encoder.iter().enumerate() {
            s.tensors(&format!("{prefix}enc{i}."), out);
        }
        for (i, d) in self.decoder.iter().enumerate() {
            d.body.tensors(&format!("{prefix}dec{i}."), out);
        }
        self.head.body.tensors(&format!("{prefix}head."), out);
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<NamedTensorMut<'a, T>>) {
        for (i, s) in self.encoder.iter_mut().enumerate() {
            s.tensors_mut(&format!("{prefix}enc{i}."), out);
        }
        for (i, d) in self.decoder.iter_mut().enumerate() {
            d.body.tensors_mut(&format!("{prefix}dec{i}."), out);
        }
        self.head.body.tensors_mut(&format!("{prefix}head."), out);
    }
}
