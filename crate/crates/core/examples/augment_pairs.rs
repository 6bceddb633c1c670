//! Paired augmentation: the same random affine transform moves an image
//! and its mask, with bilinear and nearest-neighbor resampling.
//!
//! cargo run --example augment_pairs -- [out_dir]

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use suimkit::augment::{apply_pair, sample_transform, AugmentParams};
use suimkit::dataset_io::{write_mask, write_rgb};
use suimkit::palette::Category;
use suimkit::synth::scene;

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("suimkit-augment"));
    let sample = scene(96, 72, &[Category::HD, Category::FV, Category::RO], 4)?;
    // much wider than the training defaults so the effect is visible
    let params = AugmentParams {
        rotation_range: 25.0,
        width_shift: 0.15,
        height_shift: 0.15,
        shear: 10.0,
        zoom: 0.2,
        ..AugmentParams::default()
    };
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    write_rgb(out.join("original.png"), &sample.image)?;
    write_mask(out.join("original_mask.png"), &sample.mask)?;
    for i in 0..6 {
        let t = sample_transform(&params, &mut rng);
        let (img, mask) = apply_pair(&sample.image, &sample.mask, &t)?;
        println!(
            "{i}: rotate {:+.3} rad, shift ({:+.3}, {:+.3}), shear {:+.3}, zoom ({:.3}, {:.3}), flip {}",
            t.rotation, t.shift_cols, t.shift_rows, t.shear, t.zoom_cols, t.zoom_rows, t.flip
        );
        write_rgb(out.join(format!("aug{i}.png")), &img)?;
        write_mask(out.join(format!("aug{i}_mask.png")), &mask)?;
    }
    println!("pairs in {}", out.display());
    Ok(())
}
