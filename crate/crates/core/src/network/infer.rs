use std::path::Path;

use image::RgbImage;

use super::model::Network;
use crate::dataset_io::{image_to_tensor, read_rgb};
use crate::engine::{Real, Tensor};
use crate::error::{Error, Result};
use crate::metrics::{threshold_soft_map, SoftStack};
use crate::palette::{BinaryMap, Category, ClassConfig, ClassMode, LabelMap};
use crate::resample::resize_bilinear;

/// Result of running a network on one image.
#[derive(Debug, Clone, PartialEq)]
pub enum InferOutput {
    Labels(LabelMap),
    Saliency(BinaryMap),
}

/// Class for one pixel: among channels strictly above `cutoff`, the one with
/// the highest score wins (lowest channel on ties); no channel means background.
pub fn resolve_pixel(scores: &[f32], config: &ClassConfig, cutoff: f32) -> u8 {
    let mut best: Option<(usize, f32)> = None;
    for (c, &s) in scores.iter().enumerate() {
        if s > cutoff && best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.and_then(|(c, _)| config.class_of_channel(c))
        .unwrap_or(Category::BW.index())
}

pub fn resolve_labels(soft: &SoftStack, config: &ClassConfig, cutoff: f32) -> Result<LabelMap> {
    if soft.channels != config.output_channels() {
        return Err(Error::ChannelMismatch {
            expected: config.output_channels(),
            actual: soft.channels,
        });
    }
    let plane = soft.width * soft.height;
    let mut scores = vec![0.0f32; soft.channels];
    let labels = (0..plane)
        .map(|i| {
            for (c, s) in scores.iter_mut().enumerate() {
                *s = soft.data[c * plane + i];
            }
            resolve_pixel(&scores, config, cutoff)
        })
        .collect();
    LabelMap::new(soft.width, soft.height, labels)
}

/// Soft stack for sample `n` of an `N x C x H x W` output tensor.
pub fn soft_stack<T: Real>(output: &Tensor<T>, n: usize) -> Result<SoftStack> {
    let s = output.shape();
    if n >= s.n {
        return Err(Error::Dimension(format!("sample {n} of a batch of {}", s.n)));
    }
    SoftStack::new(s.c, s.w, s.h, output.sample(n).iter().map(|v| v.as_f64() as f32).collect())
}

/// Run `net` on an image (resized to the network resolution) and resolve
/// the outputs at `cutoff`.
pub fn infer_image<T: Real>(net: &mut Network<T>, img: &RgbImage, cutoff: f32) -> Result<(InferOutput, SoftStack)> {
    let r = net.spec().input_resolution;
    let resized;
    let img = if (img.width() as usize, img.height() as usize) == (r.width, r.height) {
        img
    } else {
        resized = resize_bilinear(img, r.width, r.height)?;
        &resized
    };
    let probs = net.predict(&image_to_tensor(img))?;
    let soft = soft_stack(&probs, 0)?;
    let mode = net.spec().class_mode()?;
    let out = match mode {
        ClassMode::Saliency1 => InferOutput::Saliency(threshold_soft_map(soft.channel(0), soft.width, soft.height, cutoff)?),
        _ => InferOutput::Labels(resolve_labels(&soft, &ClassConfig::new(mode), cutoff)?),
    };
    Ok((out, soft))
}

pub fn infer_file<T: Real>(net: &mut Network<T>, path: impl AsRef<Path>, cutoff: f32) -> Result<(InferOutput, SoftStack)> {
    infer_image(net, &read_rgb(path)?, cutoff)
}
