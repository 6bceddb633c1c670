//! Small raster charts for corpus statistics. Axes and labels are left to
//! the CSV tables; the images only show shape.

use image::{Rgb, RgbImage};

use crate::palette::Category;
use crate::stats::{CorrelationMatrix, IntensityHistogram};

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([40, 40, 40]);
const MISSING: Rgb<u8> = Rgb([200, 200, 200]);

fn canvas(width: u32, height: u32) -> RgbImage {
    RgbImage::from_pixel(width, height, BG)
}

fn fill(img: &mut RgbImage, x0: u32, y0: u32, x1: u32, y1: u32, color: Rgb<u8>) {
    for y in y0..y1.min(img.height()) {
        for x in x0..x1.min(img.width()) {
            img.put_pixel(x, y, color);
        }
    }
}

fn line(img: &mut RgbImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), color: Rgb<u8>) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let x = (x0 + t * (x1 - x0)).round();
        let y = (y0 + t * (y1 - y0)).round();
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

/// One bar per category, colored with its palette color. The black and
/// white codes are drawn in dark and light gray.
pub fn occurrence_bars(counts: &[usize; 8]) -> RgbImage {
    let (bar, gap, height, margin) = (32u32, 8u32, 200u32, 10u32);
    let width = 2 * margin + 8 * bar + 7 * gap;
    let mut img = canvas(width, height + 2 * margin);
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let base = margin + height;
    for cat in Category::ALL {
        let i = cat.index() as u32;
        let h = (counts[i as usize] as f64 / top * height as f64).round() as u32;
        let x = margin + i * (bar + gap);
        let color = match cat {
            Category::BW => Rgb([64, 64, 64]),
            Category::SR => Rgb([192, 192, 192]),
            c => Rgb(c.color()),
        };
        fill(&mut img, x, base - h, x + bar, base, color);
    }
    fill(&mut img, margin, base, width - margin, base + 1, AXIS);
    img
}

/// Blue-white-red heatmap of a correlation matrix; undefined cells are gray.
pub fn correlation_heatmap(m: &CorrelationMatrix) -> RgbImage {
    let cell = 24u32;
    let mut img = canvas(8 * cell, 8 * cell);
    for (a, row) in m.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            let color = match v {
                None => MISSING,
                Some(v) => diverging(*v),
            };
            let (x, y) = (b as u32 * cell, a as u32 * cell);
            fill(&mut img, x, y, x + cell, y + cell, color);
        }
    }
    img
}

fn diverging(v: f64) -> Rgb<u8> {
    let t = v.clamp(-1.0, 1.0);
    let fade = |s: f64| (255.0 * (1.0 - s)).round() as u8;
    if t >= 0.0 {
        Rgb([255, fade(t), fade(t)])
    } else {
        Rgb([fade(-t), fade(-t), 255])
    }
}

/// Red, green and blue polylines over the histogram bins.
pub fn intensity_lines(h: &IntensityHistogram) -> RgbImage {
    let (width, height, margin) = (512u32, 200u32, 10u32);
    let mut img = canvas(width + 2 * margin, height + 2 * margin);
    let top = h.counts.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let colors = [Rgb([220, 30, 30]), Rgb([30, 160, 30]), Rgb([30, 30, 220])];
    let base = (margin + height) as f64;
    let x_of = |b: usize| {
        let centre = if h.bins == 1 { 0.5 } else { b as f64 / (h.bins - 1) as f64 };
        margin as f64 + centre * width as f64
    };
    for (counts, color) in h.counts.iter().zip(colors) {
        let pts: Vec<(f64, f64)> = counts
            .iter()
            .enumerate()
            .map(|(b, &n)| (x_of(b), base - n as f64 / top * height as f64))
            .collect();
        for w in pts.windows(2) {
            line(&mut img, w[0], w[1], color);
        }
        if let [p] = pts.as_slice() {
            line(&mut img, *p, *p, color);
        }
    }
    fill(&mut img, margin, margin + height, margin + width, margin + height + 1, AXIS);
    img
}
