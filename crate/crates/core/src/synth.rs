//! Deterministic synthetic scenes for tests, examples and smoke runs.
//!
//! A scene is a blue-green water gradient with a few filled discs and
//! rectangles. Each object category gets its own body color, so the image
//! alone determines the mask.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset_io::{write_mask, write_rgb, Sample};
use crate::error::{Error, Result};
use crate::palette::{Category, LabelMap};

/// Body color painted into the image for each category.
pub fn body_color(cat: Category) -> [u8; 3] {
    match cat {
        Category::BW => [20, 70, 110],
        Category::HD => [230, 200, 60],
        Category::PF => [90, 200, 90],
        Category::WR => [120, 80, 50],
        Category::RO => [230, 60, 40],
        Category::RI => [200, 120, 200],
        Category::FV => [250, 140, 20],
        Category::SR => [180, 170, 140],
    }
}

/// Uniformly random labels.
pub fn random_labels(width: usize, height: usize, rng: &mut impl Rng) -> LabelMap {
    let labels = (0..width * height).map(|_| rng.random_range(0..8u8)).collect();
    LabelMap::new(width, height, labels).expect("labels are in range")
}

/// Labels drawn from a handful of shapes, so category presence varies
/// from map to map.
pub fn random_shapes(width: usize, height: usize, rng: &mut impl Rng) -> LabelMap {
    let mut map = LabelMap::filled(width, height, Category::BW).expect("positive size");
    let n = rng.random_range(0..5);
    for _ in 0..n {
        let cat = Category::ALL[rng.random_range(1..8)];
        paint_shape(&mut map, None, cat, rng);
    }
    map
}

fn paint_shape(map: &mut LabelMap, mut img: Option<&mut RgbImage>, cat: Category, rng: &mut impl Rng) {
    let (w, h) = (map.width(), map.height());
    let cx = rng.random_range(0..w) as f64;
    let cy = rng.random_range(0..h) as f64;
    let r = rng.random_range(w.min(h) as f64 / 8.0..=w.min(h) as f64 / 3.0);
    let disc = rng.random_bool(0.5);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let inside = if disc {
                dx * dx + dy * dy <= r * r
            } else {
                dx.abs() <= r && dy.abs() <= r * 0.6
            };
            if inside {
                map.set(x, y, cat);
                if let Some(img) = img.as_deref_mut() {
                    img.put_pixel(x as u32, y as u32, Rgb(body_color(cat)));
                }
            }
        }
    }
}

/// One image/mask pair drawn from `seed`, using categories from `palette`.
pub fn scene(width: usize, height: usize, palette: &[Category], seed: u64) -> Result<Sample> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension("scene size must be positive".into()));
    }
    if palette.is_empty() {
        return Err(Error::EmptyInput("scene needs at least one category".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let water = body_color(Category::BW);
    let mut image = RgbImage::from_fn(width as u32, height as u32, |_, y| {
        let t = y as f64 / height as f64;
        Rgb([water[0], water[1] + (30.0 * t) as u8, water[2] - (30.0 * t) as u8])
    });
    let mut mask = LabelMap::filled(width, height, Category::BW)?;
    for _ in 0..rng.random_range(1..=3) {
        let cat = palette[rng.random_range(0..palette.len())];
        paint_shape(&mut mask, Some(&mut image), cat, &mut rng);
    }
    Ok(Sample { image, mask })
}

/// `n` scenes with seeds `seed, seed + 1, ...`.
pub fn scenes(n: usize, width: usize, height: usize, palette: &[Category], seed: u64) -> Result<Vec<Sample>> {
    (0..n as u64).map(|i| scene(width, height, palette, seed + i)).collect()
}

/// Write scenes as `images/NNNN.png` and `masks/NNNN.png` under `root`.
pub fn write_corpus(root: impl AsRef<Path>, samples: &[Sample]) -> Result<()> {
    let root = root.as_ref();
    for (i, s) in samples.iter().enumerate() {
        write_rgb(root.join("images").join(format!("{i:04}.png")), &s.image)?;
        write_mask(root.join("masks").join(format!("{i:04}.png")), &s.mask)?;
    }
    Ok(())
}
