//! Region similarity (F score / dice) and IOU, per category and combined.
//!
//! Degenerate counts are defined rather than left as NaN: when both the
//! prediction and the ground truth are empty the score is 1.0, when only
//! one of them is empty it is 0.0.
//!
//! Aggregation over images reports `mean ± sqrt(population variance)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::palette::{to_channels, BinaryMap, ClassConfig, LabelMap};

/// Default cutoff for soft (probability) outputs.
pub const DEFAULT_CUTOFF: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts with prediction and ground truth swapped.
    pub fn swapped(&self) -> Self {
        ConfusionCounts {
            tp: self.tp,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tn,
        }
    }

    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

pub fn confusion_slices(pred: &[u8], gt: &[u8]) -> Result<ConfusionCounts> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "prediction has {} pixels, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.iter().zip(gt) {
        match (p != 0, g != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn confusion(pred: &BinaryMap, gt: &BinaryMap) -> Result<ConfusionCounts> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::Shape(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    confusion_slices(&pred.data, &gt.data)
}

/// Dice coefficient `2PR / (P + R)`.
pub fn f_score(c: &ConfusionCounts) -> f64 {
    match (c.tp + c.fp > 0, c.tp + c.fn_ > 0) {
        (false, false) => 1.0,
        (true, false) | (false, true) => 0.0,
        (true, true) => {
            if c.tp == 0 {
                return 0.0;
            }
            let p = c.precision().unwrap_or(0.0);
            let r = c.recall().unwrap_or(0.0);
            2.0 * p * r / (p + r)
        }
    }
}

/// Overlap over union, `tp / (tp + fp + fn)`.
pub fn iou(c: &ConfusionCounts) -> f64 {
    let union = c.tp + c.fp + c.fn_;
    if union == 0 {
        return 1.0;
    }
    c.tp as f64 / union as f64
}

/// Soft per-channel outputs, channel-major (`C x H x W`), values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftStack {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl SoftStack {
    pub fn new(channels: usize, width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * width * height {
            return Err(Error::Dimension(format!(
                "{} values for a {channels}x{height}x{width} stack",
                data.len()
            )));
        }
        Ok(SoftStack {
            channels,
            width,
            height,
            data,
        })
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.width * self.height;
        &self.data[c * plane..(c + 1) * plane]
    }
}

/// Binarize a soft map: 1 where the value is strictly above `cutoff`.
pub fn threshold_soft(soft: &[f32], cutoff: f32) -> Vec<u8> {
    soft.iter().map(|&v| u8::from(v > cutoff)).collect()
}

pub fn threshold_soft_map(soft: &[f32], width: usize, height: usize, cutoff: f32) -> Result<BinaryMap> {
    BinaryMap::new(width, height, threshold_soft(soft, cutoff))
}

/// What a model produced for one image.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Labels(LabelMap),
    Soft(SoftStack),
}

impl Prediction {
    fn dims(&self) -> (usize, usize) {
        match self {
            Prediction::Labels(m) => (m.width(), m.height()),
            Prediction::Soft(s) => (s.width, s.height),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub config: ClassConfig,
    pub cutoff: f32,
    /// Only count a category in an image when it occurs in the prediction or
    /// the ground truth.
    pub presence_rule: bool,
}

impl EvalOptions {
    pub fn new(config: ClassConfig) -> Self {
        EvalOptions {
            config,
            cutoff: DEFAULT_CUTOFF,
            presence_rule: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryScore {
    pub name: String,
    pub f: f64,
    pub iou: f64,
    pub counts: ConfusionCounts,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScores {
    pub categories: Vec<CategoryScore>,
    pub combined_f: f64,
    pub combined_iou: f64,
}

pub fn evaluate_pair(pred: &Prediction, gt: &LabelMap, opts: &EvalOptions) -> Result<PairScores> {
    let (pw, ph) = pred.dims();
    if (pw, ph) != (gt.width(), gt.height()) {
        return Err(Error::Shape(format!(
            "prediction is {pw}x{ph}, ground truth {}x{}",
            gt.width(),
            gt.height()
        )));
    }
    let cfg = &opts.config;
    let channels = cfg.output_channels();
    let gt_stack = to_channels(gt, cfg);

    let pred_planes: Vec<Vec<u8>> = match pred {
        Prediction::Labels(map) => {
            let stack = to_channels(map, cfg);
            (0..channels).map(|c| stack.channel(c).to_vec()).collect()
        }
        Prediction::Soft(soft) => {
            if soft.channels != channels {
                return Err(Error::ChannelMismatch {
                    expected: channels,
                    actual: soft.channels,
                });
            }
            (0..channels)
                .map(|c| threshold_soft(soft.channel(c), opts.cutoff))
                .collect()
        }
    };

    let mut categories = Vec::with_capacity(channels);
    for (c, plane) in pred_planes.iter().enumerate() {
        let counts = confusion_slices(plane, gt_stack.channel(c))?;
        categories.push(CategoryScore {
            name: cfg.channel_names()[c].to_string(),
            f: f_score(&counts),
            iou: iou(&counts),
            present: counts.tp + counts.fp + counts.fn_ > 0,
            counts,
        });
    }

    let counted: Vec<&CategoryScore> = categories
        .iter()
        .filter(|s| s.present || !opts.presence_rule)
        .collect();
    // no category anywhere in the image: every absence was predicted correctly
    let (combined_f, combined_iou) = if counted.is_empty() {
        (1.0, 1.0)
    } else {
        let n = counted.len() as f64;
        (
            counted.iter().map(|s| s.f).sum::<f64>() / n,
            counted.iter().map(|s| s.iou).sum::<f64>() / n,
        )
    };

    Ok(PairScores {
        categories,
        combined_f,
        combined_iou,
    })
}

/// `mean ± sqrt(population variance)` over a set of per-image scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub f_mean: f64,
    pub f_spread: f64,
    pub iou_mean: f64,
    pub iou_spread: f64,
    pub n: usize,
}

/// Mean and population standard deviation, summed in slice order.
pub fn mean_spread(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ScoreSummary {
    pub fn from_rows(f: &[f64], iou: &[f64]) -> Self {
        let (f_mean, f_spread) = mean_spread(f);
        let (iou_mean, iou_spread) = mean_spread(iou);
        ScoreSummary {
            f_mean,
            f_spread,
            iou_mean,
            iou_spread,
            n: f.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRow {
    pub stem: String,
    pub scores: PairScores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub mode: String,
    pub per_category: Vec<(String, ScoreSummary)>,
    pub combined: ScoreSummary,
    pub n_images: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub per_image: Vec<ImageRow>,
}

/// Evaluate every prediction against the ground truth with the same stem.
///
/// Stems present on only one side are reported as warnings. Images are
/// scored in parallel; aggregation walks them in stem order.
pub fn evaluate_suite(
    preds: &BTreeMap<String, Prediction>,
    gts: &BTreeMap<String, LabelMap>,
    opts: &EvalOptions,
) -> Result<ScoreReport> {
    let mut warnings = Vec::new();
    for stem in preds.keys().filter(|s| !gts.contains_key(*s)) {
        warnings.push(format!("prediction '{stem}' has no ground truth"));
    }
    for stem in gts.keys().filter(|s| !preds.contains_key(*s)) {
        warnings.push(format!("ground truth '{stem}' has no prediction"));
    }
    let pairs: Vec<(&String, &Prediction, &LabelMap)> = preds
        .iter()
        .filter_map(|(stem, p)| gts.get(stem).map(|g| (stem, p, g)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no prediction/ground-truth pairs".into()));
    }

    let rows: Vec<ImageRow> = pairs
        .par_iter()
        .map(|(stem, p, g)| {
            evaluate_pair(p, g, opts).map(|scores| ImageRow {
                stem: (*stem).clone(),
                scores,
            })
        })
        .collect::<Result<_>>()?;

    let names = opts.config.channel_names();
    let per_category = names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let (f, i): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .map(|r| &r.scores.categories[c])
                .filter(|s| s.present || !opts.presence_rule)
                .map(|s| (s.f, s.iou))
                .unzip();
            (name.to_string(), ScoreSummary::from_rows(&f, &i))
        })
        .collect();
    let (cf, ci): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .map(|r| (r.scores.combined_f, r.scores.combined_iou))
        .unzip();

    Ok(ScoreReport {
        mode: opts.config.mode().to_string(),
        per_category,
        combined: ScoreSummary::from_rows(&cf, &ci),
        n_images: rows.len(),
        warnings,
        per_image: rows,
    })
}

fn fmt_score(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

impl ScoreReport {
    /// One row per category plus `combined`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,f_mean,f_spread,iou_mean,iou_spread,n\n");
        let rows = self
            .per_category
            .iter()
            .map(|(n, s)| (n.as_str(), s))
            .chain(std::iter::once(("combined", &self.combined)));
        for (name, s) in rows {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{}",
                fmt_score(s.f_mean),
                fmt_score(s.f_spread),
                fmt_score(s.iou_mean),
                fmt_score(s.iou_spread),
                s.n
            );
        }
        out
    }

    pub fn per_image_csv(&self) -> String {
        let mut out = String::from("stem");
        if let Some(first) = self.per_image.first() {
            for c in &first.scores.categories {
                let _ = write!(out, ",{0}_f,{0}_iou", c.name);
            }
        }
        out.push_str(",combined_f,combined_iou\n");
        for row in &self.per_image {
            out.push_str(&row.stem);
            for c in &row.scores.categories {
                if c.present {
                    let _ = write!(out, ",{:.6},{:.6}", c.f, c.iou);
                } else {
                    out.push_str(",,");
                }
            }
            let _ = writeln!(
                out,
                ",{:.6},{:.6}",
                row.scores.combined_f, row.scores.combined_iou
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::palette::{Category, ClassMode};
    use proptest::prelude::*;

    fn bm(w: usize, h: usize, d: &[u8]) -> BinaryMap {
        BinaryMap::new(w, h, d.to_vec()).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let ones = bm(2, 2, &[1, 1, 1, 1]);
        let zeros = bm(2, 2, &[0, 0, 0, 0]);
        let c = confusion(&ones, &ones).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (4, 0, 0, 0));
        let c = confusion(&ones, &zeros).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (0, 4, 0, 0));
        let c = confusion(&bm(4, 1, &[1, 1, 0, 0]), &bm(4, 1, &[1, 0, 1, 0])).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 1, 1, 1));
        assert!(confusion(&bm(4, 1, &[0; 4]), &bm(2, 2, &[0; 4])).is_err());
    }

    #[test]
    fn score_examples() {
        let c = ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 1 };
        assert!((f_score(&c) - 0.5).abs() < 1e-15);
        // dice via counts
        assert!((f_score(&c) - 2.0 / 4.0).abs() < 1e-15);
        assert!((iou(&c) - 1.0 / 3.0).abs() < 1e-15);

        let same = ConfusionCounts { tp: 7, fp: 0, fn_: 0, tn: 3 };
        assert_eq!(f_score(&same), 1.0);
        assert_eq!(iou(&same), 1.0);

        let disjoint = ConfusionCounts { tp: 0, fp: 3, fn_: 2, tn: 1 };
        assert_eq!(f_score(&disjoint), 0.0);
        assert_eq!(iou(&disjoint), 0.0);
    }

    #[test]
    fn degenerate_scores() {
        let empty = ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 9 };
        assert_eq!(f_score(&empty), 1.0);
        assert_eq!(iou(&empty), 1.0);
        let only_pred = ConfusionCounts { tp: 0, fp: 2, fn_: 0, tn: 7 };
        assert_eq!(f_score(&only_pred), 0.0);
        assert_eq!(f_score(&only_pred.swapped()), 0.0);
    }

    #[test]
    fn thresholding_is_strict() {
        assert_eq!(threshold_soft(&[0.9, 0.1], 0.5), vec![1, 0]);
        assert_eq!(threshold_soft(&[0.5; 6], 0.5), vec![0; 6]);
    }

    #[test]
    fn pair_identical_scores_one() {
        let gt = LabelMap::new(3, 2, vec![1, 3, 4, 5, 6, 0]).unwrap();
        for mode in [ClassMode::Full8, ClassMode::Major5, ClassMode::Saliency1] {
            let opts = EvalOptions::new(ClassConfig::new(mode));
            let row = evaluate_pair(&Prediction::Labels(gt.clone()), &gt, &opts).unwrap();
            assert!(row.categories.iter().all(|c| c.f == 1.0 && c.iou == 1.0));
            assert_eq!((row.combined_f, row.combined_iou), (1.0, 1.0));
        }
    }

    #[test]
    fn missed_diver_scores_zero() {
        let mut gt = LabelMap::filled(4, 4, Category::BW).unwrap();
        gt.set(2, 1, Category::HD);
        let pred = LabelMap::filled(4, 4, Category::BW).unwrap();
        let opts = EvalOptions::new(ClassConfig::new(ClassMode::Major5));
        let row = evaluate_pair(&Prediction::Labels(pred), &gt, &opts).unwrap();
        assert_eq!(row.categories[0].f, 0.0);
        assert_eq!(row.categories[0].iou, 0.0);
        assert_eq!(row.combined_f, 0.0);
    }

    #[test]
    fn soft_prediction_channel_mismatch() {
        let gt = LabelMap::filled(2, 2, Category::BW).unwrap();
        let soft = SoftStack::new(3, 2, 2, vec![0.0; 12]).unwrap();
        let opts = EvalOptions::new(ClassConfig::new(ClassMode::Major5));
        assert!(matches!(
            evaluate_pair(&Prediction::Soft(soft), &gt, &opts),
            Err(Error::ChannelMismatch { expected: 5, actual: 3 })
        ));
    }

    #[test]
    fn population_spread() {
        let (m, s) = mean_spread(&[0.4, 0.8]);
        assert!((m - 0.6).abs() < 1e-15);
        assert!((s - 0.2).abs() < 1e-15);
    }

    #[test]
    fn suite_single_perfect_pair() {
        let gt = LabelMap::new(2, 2, vec![1, 3, 4, 6]).unwrap();
        let opts = EvalOptions::new(ClassConfig::new(ClassMode::Major5));
        let preds = BTreeMap::from([("a".to_string(), Prediction::Labels(gt.clone()))]);
        let gts = BTreeMap::from([("a".to_string(), gt)]);
        let report = evaluate_suite(&preds, &gts, &opts).unwrap();
        assert_eq!(report.combined.f_mean, 1.0);
        assert_eq!(report.combined.f_spread, 0.0);
        let csv = report.to_csv();
        let names: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(names, ["HD", "WR", "RO", "RI", "FV", "combined"]);
    }

    #[test]
    fn suite_reports_orphans_and_rejects_empty() {
        let gt = LabelMap::filled(2, 2, Category::HD).unwrap();
        let opts = EvalOptions::new(ClassConfig::new(ClassMode::Saliency1));
        let preds = BTreeMap::from([
            ("a".to_string(), Prediction::Labels(gt.clone())),
            ("lonely".to_string(), Prediction::Labels(gt.clone())),
        ]);
        let gts = BTreeMap::from([("a".to_string(), gt.clone())]);
        let report = evaluate_suite(&preds, &gts, &opts).unwrap();
        assert_eq!(report.n_images, 1);
        assert_eq!(report.warnings.len(), 1);

        let none = BTreeMap::from([("b".to_string(), gt)]);
        assert!(matches!(
            evaluate_suite(&preds, &none, &opts),
            Err(Error::EmptyInput(_))
        ));
    }

    fn counts_strategy() -> impl Strategy<Value = ConfusionCounts> {
        (0u64..50, 0u64..50, 0u64..50, 0u64..50).prop_map(|(tp, fp, fn_, tn)| ConfusionCounts { tp, fp, fn_, tn })
    }

    proptest! {
        #[test]
        fn scores_symmetric_and_ordered(c in counts_strategy()) {
            prop_assert_eq!(f_score(&c), f_score(&c.swapped()));
            prop_assert_eq!(iou(&c), iou(&c.swapped()));
            let (f, j) = (f_score(&c), iou(&c));
            prop_assert!(j <= f + 1e-15);
            prop_assert!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&j));
            if c.tp > 0 {
                prop_assert!((f - 2.0 * j / (1.0 + j)).abs() < 1e-12);
                if f < 1.0 {
                    prop_assert!(j < f);
                }
            }
        }

        #[test]
        fn scores_invariant_under_pixel_permutation(
            pairs in proptest::collection::vec((0u8..2, 0u8..2), 1..64),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let (p, g): (Vec<u8>, Vec<u8>) = pairs.iter().copied().unzip();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (ps, gs): (Vec<u8>, Vec<u8>) = shuffled.into_iter().unzip();
            let a = confusion_slices(&p, &g).unwrap();
            let b = confusion_slices(&ps, &gs).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
