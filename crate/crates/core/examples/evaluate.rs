//! Score degraded predictions against ground truth and print the
//! per-category table (mean and population standard deviation).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use suimkit::metrics::{evaluate_suite, EvalOptions, Prediction, SoftStack};
use suimkit::palette::{derive_saliency, ClassConfig, ClassMode, LabelMap};
use suimkit::synth::random_shapes;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut gts = BTreeMap::new();
    let mut preds = BTreeMap::new();
    let mut soft = BTreeMap::new();
    for i in 0..10 {
        let gt = random_shapes(48, 32, &mut rng);
        // drop about 10% of the labels to background
        let labels = gt
            .labels()
            .iter()
            .map(|&l| if rng.random_bool(0.1) { 0 } else { l })
            .collect();
        let pred = LabelMap::new(48, 32, labels)?;
        let sal = derive_saliency(&pred);
        let probs = sal.data.iter().map(|&v| if v == 1 { 0.7 } else { 0.2 }).collect();
        let stem = format!("img{i:02}");
        soft.insert(stem.clone(), Prediction::Soft(SoftStack::new(1, 48, 32, probs)?));
        preds.insert(stem.clone(), Prediction::Labels(pred));
        gts.insert(stem, gt);
    }

    let report = evaluate_suite(&preds, &gts, &EvalOptions::new(ClassConfig::new(ClassMode::Major5)))?;
    println!("major five categories over {} images", report.n_images);
    for (name, s) in &report.per_category {
        println!("  {name:<3} F {:.3} ± {:.3}  mIOU {:.3} ± {:.3}  (n={})", s.f_mean, s.f_spread, s.iou_mean, s.iou_spread, s.n);
    }
    let c = report.combined;
    println!("  all F {:.3} ± {:.3}  mIOU {:.3} ± {:.3}", c.f_mean, c.f_spread, c.iou_mean, c.iou_spread);

    let sal = evaluate_suite(&soft, &gts, &EvalOptions::new(ClassConfig::new(ClassMode::Saliency1)))?;
    print!("\nsaliency from soft maps at cutoff 0.5\n{}", sal.to_csv());
    Ok(())
}
