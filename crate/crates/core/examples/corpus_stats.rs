//! Category occurrence, co-occurrence correlation and intensity
//! distribution of a synthetic corpus, with CSV tables and PNG charts.
//!
//! cargo run --example corpus_stats -- [out_dir]

use std::path::PathBuf;

use suimkit::dataset_io::write_rgb;
use suimkit::palette::Category;
use suimkit::plots::{correlation_heatmap, intensity_lines, occurrence_bars};
use suimkit::stats::{correlation_csv, intensity_csv, occurrence_csv, CorpusStats};
use suimkit::synth::scenes;

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("suimkit-stats"));
    let samples = scenes(40, 64, 48, &Category::ALL[1..], 0)?;
    let masks: Vec<_> = samples.iter().map(|s| s.mask.clone()).collect();
    let images: Vec<_> = samples.iter().map(|s| s.image.clone()).collect();
    let stats = CorpusStats::compute(&masks, &images, 16)?;

    print!("{}", occurrence_csv(&stats.occurrence));
    if let Some(m) = &stats.correlation {
        print!("\n{}", correlation_csv(m));
        write_rgb(out.join("correlation.png"), &correlation_heatmap(m))?;
    }
    if let Some(h) = &stats.intensity {
        print!("\n{}", intensity_csv(h));
        write_rgb(out.join("intensity.png"), &intensity_lines(h))?;
    }
    write_rgb(out.join("occurrence.png"), &occurrence_bars(&stats.occurrence))?;
    println!("\ncharts in {}", out.display());
    Ok(())
}
