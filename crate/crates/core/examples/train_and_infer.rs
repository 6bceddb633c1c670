//! End to end on disk: write a corpus, train with a validation split,
//! checkpoint, reload, segment the images and score the result.
//!
//! cargo run --release --example train_and_infer -- [work_dir]

use std::collections::BTreeMap;
use std::path::PathBuf;

use suimkit::dataset_io::{load_corpus, scan_corpus, write_mask};
use suimkit::engine::AdamConfig;
use suimkit::metrics::{evaluate_suite, EvalOptions, Prediction};
use suimkit::network::{fit, infer_image, load_checkpoint, save_checkpoint, InferOutput, Network, NetworkSpec, TrainConfig};
use suimkit::palette::{Category, ClassConfig, ClassMode, DEFAULT_THRESHOLD};
use suimkit::resample::Resolution;
use suimkit::synth::{scenes, write_corpus};

fn main() -> anyhow::Result<()> {
    let work = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("suimkit-train"));
    let corpus = work.join("corpus");
    let palette = [Category::HD, Category::WR, Category::RO, Category::RI, Category::FV];
    write_corpus(&corpus, &scenes(24, 80, 60, &palette, 500)?)?;

    let manifest = scan_corpus(&corpus)?;
    let res = Resolution::new(64, 48);
    let samples = load_corpus(&manifest, Some(res), DEFAULT_THRESHOLD)?;
    let spec = NetworkSpec::rsb_scaled(5, res, 16).with_seed(1);
    let mut net = Network::<f32>::build(&spec)?;
    let config = TrainConfig {
        epochs: 80,
        batch_size: 4,
        adam: AdamConfig { lr: 3e-3, ..Default::default() },
        validation_split: 0.25,
        seed: 1,
        ..Default::default()
    };
    let history = fit(&mut net, &samples, &config)?;
    for (i, (t, v)) in history.train_loss.iter().zip(&history.val_loss).enumerate() {
        println!("epoch {:>2}  train {t:.4}  val {v:.4}", i + 1);
    }

    let ckpt = work.join("model.ckpt");
    save_checkpoint(&net, None, &ckpt)?;
    let (mut net, _) = load_checkpoint::<f32>(&ckpt)?;

    let mut preds = BTreeMap::new();
    let mut gts = BTreeMap::new();
    for (entry, sample) in manifest.pairs.iter().zip(&samples) {
        let (out, _) = infer_image(&mut net, &sample.image, 0.5)?;
        if let InferOutput::Labels(map) = out {
            write_mask(work.join("pred").join(format!("{}.png", entry.stem)), &map)?;
            preds.insert(entry.stem.clone(), Prediction::Labels(map));
            gts.insert(entry.stem.clone(), sample.mask.clone());
        }
    }
    let report = evaluate_suite(&preds, &gts, &EvalOptions::new(ClassConfig::new(ClassMode::Major5)))?;
    print!("\n{}", report.to_csv());
    println!("outputs in {}", work.display());
    Ok(())
}
