use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::model::Network;
use crate::augment::{apply_pair, sample_transform, AugmentParams};
use crate::dataset_io::{batch_to_tensor, targets_to_tensor, Sample};
use crate::engine::{bce_loss, sigmoid, sigmoid_bce_backward, Adam, AdamConfig, Layer, Mode, Real, Tensor};
use crate::error::{Error, Result};
use crate::palette::{ClassConfig, LabelMap};
use crate::resample::{resize_bilinear, resize_labels_nearest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Paired augmentation applied to every training sample, if any.
    pub augment: Option<AugmentParams>,
    /// Fraction of samples held out for validation loss.
    pub validation_split: f64,
    pub seed: u64,
    pub checkpoint_dir: Option<PathBuf>,
    /// Write `epoch_NNNN.ckpt` every this many epochs (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 8,
            adam: AdamConfig::default(),
            augment: Some(AugmentParams::default()),
            validation_split: 0.0,
            seed: 0,
            checkpoint_dir: None,
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Mean pre-update batch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Validation loss per epoch; empty without a validation split.
    pub val_loss: Vec<f64>,
    pub steps: usize,
    pub checkpoints: Vec<PathBuf>,
}

/// One forward/backward/update on a batch. Returns the loss before the update.
pub fn train_step<T: Real>(net: &mut Network<T>, images: &Tensor<T>, targets: &Tensor<T>, adam: &mut Adam<T>) -> Result<f64> {
    let logits = net.forward_logits(images, Mode::Train)?;
    let probs = sigmoid(&logits);
    let loss = bce_loss(&probs, targets)?.as_f64();
    net.zero_grad();
    net.backward_logits(&sigmoid_bce_backward(&probs, targets)?)?;
    adam.step(&mut net.params_mut())?;
    Ok(loss)
}

/// Infer-mode loss over `samples`, in batches.
pub fn evaluate_loss<T: Real>(net: &mut Network<T>, samples: &[&Sample], batch_size: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to evaluate".into()));
    }
    let config = ClassConfig::new(net.spec().class_mode()?);
    let mut total = 0.0;
    for chunk in samples.chunks(batch_size.max(1)) {
        let (x, y) = batch(chunk.iter().copied(), &config);
        total += bce_loss(&net.predict(&x)?, &y)?.as_f64() * chunk.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Fraction of output elements whose thresholded probability matches the target.
pub fn pixel_accuracy<T: Real>(probs: &Tensor<T>, targets: &Tensor<T>, cutoff: f64) -> Result<f64> {
    probs.expect_shape(targets.shape(), "pixel accuracy")?;
    let hits = probs
        .data()
        .iter()
        .zip(targets.data())
        .filter(|(&p, &t)| (p.as_f64() > cutoff) == (t.as_f64() > 0.5))
        .count();
    Ok(hits as f64 / probs.len().max(1) as f64)
}

fn batch<'a, T: Real>(samples: impl Iterator<Item = &'a Sample>, config: &ClassConfig) -> (Tensor<T>, Tensor<T>) {
    let (imgs, masks): (Vec<_>, Vec<&LabelMap>) = samples.map(|s| (&s.image, &s.mask)).unzip();
    (batch_to_tensor(&imgs), targets_to_tensor(&masks, config))
}

/// Bring a sample to the network resolution if it is not already there.
pub fn fit_sample<T: Real>(net: &Network<T>, s: &Sample) -> Result<Sample> {
    let r = net.spec().input_resolution;
    if (s.image.width() as usize, s.image.height() as usize) == (r.width, r.height)
        && (s.mask.width(), s.mask.height()) == (r.width, r.height)
    {
        return Ok(s.clone());
    }
    Ok(Sample {
        image: resize_bilinear(&s.image, r.width, r.height)?,
        mask: resize_labels_nearest(&s.mask, r.width, r.height)?,
    })
}

/// Train with a fresh optimizer built from `config.adam`.
pub fn fit<T: Real>(net: &mut Network<T>, samples: &[Sample], config: &TrainConfig) -> Result<History> {
    let mut adam = Adam::new(config.adam);
    fit_with(net, samples, config, &mut adam)
}

/// Train for `config.epochs` epochs. Sample order, validation split and
/// augmentation draws all come from one generator seeded with `config.seed`.
pub fn fit_with<T: Real>(
    net: &mut Network<T>,
    samples: &[Sample],
    config: &TrainConfig,
    adam: &mut Adam<T>,
) -> Result<History> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.validation_split) {
        return Err(Error::InvalidParameter(format!(
            "validation split {} is outside [0, 1)",
            config.validation_split
        )));
    }
    if let Some(a) = &config.augment {
        a.validate()?;
    }
    let class_config = ClassConfig::new(net.spec().class_mode()?);
    let samples: Vec<Sample> = samples.iter().map(|s| fit_sample(net, s)).collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((samples.len() as f64) * config.validation_split).floor() as usize;
    if n_val >= samples.len() {
        return Err(Error::InvalidParameter("validation split leaves no training samples".into()));
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val: Vec<&Sample> = val_idx.iter().map(|&i| &samples[i]).collect();

    let mut history = History::default();
    for epoch in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(config.batch_size) {
            let batch_samples: Vec<Sample> = match &config.augment {
                Some(params) => chunk
                    .iter()
                    .map(|&i| {
                        let t = sample_transform(params, &mut rng);
                        let (image, mask) = apply_pair(&samples[i].image, &samples[i].mask, &t)?;
                        Ok(Sample { image, mask })
                    })
                    .collect::<Result<_>>()?,
                None => chunk.iter().map(|&i| samples[i].clone()).collect(),
            };
            let (x, y) = batch(batch_samples.iter(), &class_config);
            total += train_step(net, &x, &y, adam)? * chunk.len() as f64;
            history.steps += 1;
        }
        let epoch_loss = total / train_idx.len() as f64;
        history.train_loss.push(epoch_loss);
        if !val.is_empty() {
            history.val_loss.push(evaluate_loss(net, &val, config.batch_size)?);
        }
        log::info!("epoch {} loss {epoch_loss:.6}", epoch + 1);
        if let Some(dir) = &config.checkpoint_dir {
            if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
                let path = dir.join(format!("epoch_{:04}.ckpt", epoch + 1));
                save_checkpoint(net, Some(adam), &path)?;
                history.checkpoints.push(path);
            }
        }
    }
    Ok(history)
}
