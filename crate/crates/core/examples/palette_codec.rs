//! Mask palette codec: decode a noisy color mask, re-encode it, split it
//! into per-category channels and derive the saliency map.

use image::Rgb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use suimkit::palette::{
    decode_mask, derive_saliency, encode_mask, to_channels, Category, ClassConfig, ClassMode, DEFAULT_THRESHOLD,
};
use suimkit::synth::random_shapes;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let map = random_shapes(24, 12, &mut rng);

    // JPEG-like noise on the palette colors
    let mut noisy = encode_mask(&map);
    for p in noisy.pixels_mut() {
        *p = Rgb(p.0.map(|v| (v as i32 + rng.random_range(-50..=50)).clamp(0, 255) as u8));
    }
    let decoded = decode_mask(&noisy, DEFAULT_THRESHOLD)?;
    println!("noisy mask decodes exactly: {}", decoded == map);

    for cat in Category::ALL {
        let n = map.histogram()[cat.index() as usize];
        println!("{:>2} {:<34} {:?} {n:>4} px", cat.code(), cat.description(), cat.color());
    }

    let config = ClassConfig::new(ClassMode::Major5);
    let stack = to_channels(&map, &config);
    for (c, name) in config.channel_names().iter().enumerate() {
        println!("channel {name}: {} px", stack.channel(c).iter().filter(|&&v| v == 1).count());
    }

    let sal = derive_saliency(&map);
    println!("salient pixels: {} of {}", sal.count_ones(), sal.data.len());
    for y in 0..sal.height {
        let row: String = (0..sal.width)
            .map(|x| if sal.data[y * sal.width + x] == 1 { '#' } else { '.' })
            .collect();
        println!("  {row}");
    }
    Ok(())
}
