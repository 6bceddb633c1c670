//! Overfit a small RSB network on eight synthetic 64x64 scenes and report
//! the loss curve and pixel accuracy.
//!
//! cargo run --release --example overfit -- [steps] [lr]

use suimkit::dataset_io::{batch_to_tensor, targets_to_tensor};
use suimkit::engine::{sigmoid, Adam, AdamConfig, Mode};
use suimkit::network::{pixel_accuracy, train_step, Network, NetworkSpec};
use suimkit::palette::{Category, ClassConfig, ClassMode};
use suimkit::resample::Resolution;
use suimkit::synth::scenes;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let lr: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1e-3);

    let palette = [Category::HD, Category::WR, Category::RO, Category::RI, Category::FV];
    let samples = scenes(8, 64, 64, &palette, 100)?;
    let config = ClassConfig::new(ClassMode::Major5);
    let images: Vec<_> = samples.iter().map(|s| &s.image).collect();
    let masks: Vec<_> = samples.iter().map(|s| &s.mask).collect();
    let x = batch_to_tensor::<f32>(&images);
    let y = targets_to_tensor::<f32>(&masks, &config);

    let spec = NetworkSpec::rsb_scaled(5, Resolution::new(64, 64), 8).with_seed(7);
    let mut net = Network::<f32>::build(&spec)?;
    let mut adam = Adam::new(AdamConfig { lr, ..Default::default() });
    let start = std::time::Instant::now();
    let mut first = None;
    for step in 0..steps {
        let loss = train_step(&mut net, &x, &y, &mut adam)?;
        first.get_or_insert(loss);
        if step % 20 == 0 || step + 1 == steps {
            println!("step {step:4}  loss {loss:.5}");
        }
    }
    let probs = sigmoid(&net.forward_logits(&x, Mode::Train)?);
    let final_loss = suimkit::engine::bce_loss(&probs, &y)?;
    let acc = pixel_accuracy(&probs, &y, 0.5)?;
    let infer_acc = pixel_accuracy(&net.predict(&x)?, &y, 0.5)?;
    println!(
        "loss {:.5} -> {:.5} ({:.1}%), accuracy {:.2}% (batch stats) {:.2}% (running stats), {:.1}s",
        first.unwrap_or(f64::NAN),
        final_loss,
        100.0 * final_loss as f64 / first.unwrap_or(f64::NAN),
        100.0 * acc,
        100.0 * infer_acc,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
