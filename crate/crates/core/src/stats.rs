//! Corpus statistics: category occurrence, pairwise co-occurrence
//! correlation, and the distribution of per-image mean channel intensity.

use std::fmt::Write as _;

use image::RgbImage;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::palette::{Category, LabelMap};

/// 8x8 correlation table; `None` where an indicator has zero variance.
pub type CorrelationMatrix = [[Option<f64>; 8]; 8];

fn presence(mask: &LabelMap) -> [bool; 8] {
    let h = mask.histogram();
    h.map(|n| n > 0)
}

/// Number of images containing at least one pixel of each category.
pub fn occurrence_counts(masks: &[LabelMap]) -> Result<[usize; 8]> {
    if masks.is_empty() {
        return Err(Error::EmptyInput("no masks".into()));
    }
    let rows: Vec<[bool; 8]> = masks.par_iter().map(presence).collect();
    let mut counts = [0usize; 8];
    for row in &rows {
        for (c, &p) in row.iter().enumerate() {
            counts[c] += usize::from(p);
        }
    }
    Ok(counts)
}

/// Phi coefficient between every pair of category presence indicators.
pub fn occurrence_correlation(masks: &[LabelMap]) -> Result<CorrelationMatrix> {
    if masks.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "correlation needs at least 2 masks, got {}",
            masks.len()
        )));
    }
    let rows: Vec<[bool; 8]> = masks.par_iter().map(presence).collect();
    let n = rows.len() as f64;
    let ones: Vec<f64> = (0..8)
        .map(|c| rows.iter().filter(|r| r[c]).count() as f64)
        .collect();

    let mut out = [[None; 8]; 8];
    for a in 0..8 {
        let var_a = ones[a] * (n - ones[a]);
        if var_a == 0.0 {
            continue;
        }
        out[a][a] = Some(1.0);
        for b in (a + 1)..8 {
            let var_b = ones[b] * (n - ones[b]);
            if var_b == 0.0 {
                continue;
            }
            let both = rows.iter().filter(|r| r[a] && r[b]).count() as f64;
            let phi = ((n * both - ones[a] * ones[b]) / (var_a * var_b).sqrt()).clamp(-1.0, 1.0);
            out[a][b] = Some(phi);
            out[b][a] = Some(phi);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntensityHistogram {
    pub bins: usize,
    /// Per-image mean of the R, G and B channels.
    pub means: Vec<[f64; 3]>,
    /// Image counts per bin for R, G and B.
    pub counts: [Vec<usize>; 3],
}

impl IntensityHistogram {
    pub fn bin_of(value: f64, bins: usize) -> usize {
        ((value / 255.0 * bins as f64).floor() as usize).min(bins - 1)
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.bins)
            .map(|i| 255.0 * i as f64 / self.bins as f64)
            .collect()
    }
}

pub fn image_channel_means(img: &RgbImage) -> [f64; 3] {
    let mut sums = [0u64; 3];
    for p in img.pixels() {
        for c in 0..3 {
            sums[c] += u64::from(p.0[c]);
        }
    }
    let n = (img.width() as u64 * img.height() as u64).max(1) as f64;
    sums.map(|s| s as f64 / n)
}

/// Histogram of per-image mean intensity, `bins` equal-width bins on `[0, 255]`.
pub fn intensity_distribution(images: &[RgbImage], bins: usize) -> Result<IntensityHistogram> {
    if images.is_empty() {
        return Err(Error::EmptyInput("no images".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be at least 1".into()));
    }
    let means: Vec<[f64; 3]> = images.par_iter().map(image_channel_means).collect();
    let mut counts = [vec![0usize; bins], vec![0usize; bins], vec![0usize; bins]];
    for m in &means {
        for c in 0..3 {
            counts[c][IntensityHistogram::bin_of(m[c], bins)] += 1;
        }
    }
    Ok(IntensityHistogram {
        bins,
        means,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub n_images: usize,
    pub occurrence: [usize; 8],
    pub correlation: Option<CorrelationMatrix>,
    pub intensity: Option<IntensityHistogram>,
}

impl CorpusStats {
    pub fn compute(masks: &[LabelMap], images: &[RgbImage], bins: usize) -> Result<Self> {
        let occurrence = occurrence_counts(masks)?;
        let correlation = if masks.len() >= 2 {
            Some(occurrence_correlation(masks)?)
        } else {
            None
        };
        let intensity = if images.is_empty() {
            None
        } else {
            Some(intensity_distribution(images, bins)?)
        };
        Ok(CorpusStats {
            n_images: masks.len(),
            occurrence,
            correlation,
            intensity,
        })
    }
}

pub fn occurrence_csv(counts: &[usize; 8]) -> String {
    let mut out = String::from("category,images\n");
    for cat in Category::ALL {
        let _ = writeln!(out, "{},{}", cat.code(), counts[cat.index() as usize]);
    }
    out
}

pub fn correlation_csv(m: &CorrelationMatrix) -> String {
    let mut out = String::from("category");
    for cat in Category::ALL {
        let _ = write!(out, ",{}", cat.code());
    }
    out.push('\n');
    for (a, row) in m.iter().enumerate() {
        out.push_str(Category::ALL[a].code());
        for v in row {
            match v {
                Some(v) => {
                    let _ = write!(out, ",{v:.6}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn intensity_csv(h: &IntensityHistogram) -> String {
    let mut out = String::from("bin_low,bin_high,red,green,blue\n");
    let edges = h.bin_edges();
    for b in 0..h.bins {
        let _ = writeln!(
            out,
            "{:.3},{:.3},{},{},{}",
            edges[b],
            edges[b + 1],
            h.counts[0][b],
            h.counts[1][b],
            h.counts[2][b]
        );
    }
    out
}
