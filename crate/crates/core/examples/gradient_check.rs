//! Central finite differences against analytic gradients for each layer
//! type and for a small SUIM-Net.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use suimkit::engine::gradcheck::{check_layer, jitter_params, GradCheckReport};
use suimkit::engine::{BatchNorm2d, Conv2d, ConvTranspose2d, Layer, MaxPool2d, Relu, Shape, Sigmoid, Tensor};
use suimkit::network::{Network, NetworkSpec};
use suimkit::resample::Resolution;

fn show(name: &str, r: &GradCheckReport) {
    println!(
        "{name:<14} max rel error {:.2e} over {:>4} coords ({} skipped at kinks)",
        r.max_rel_error(),
        r.checked(),
        r.excluded()
    );
}

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = |s: Shape| Tensor::<f64>::randn(s, 1.0, &mut ChaCha8Rng::seed_from_u64(s.len() as u64));

    let mut layers: Vec<(&str, Box<dyn Layer<f64>>, Shape)> = vec![
        ("conv 3x3 s2", Box::new(Conv2d::new(3, 4, 3, 2, 1, &mut rng)), Shape::new(2, 3, 7, 7)),
        ("tconv 2x2 s2", Box::new(ConvTranspose2d::new(3, 2, 2, 2, &mut rng)), Shape::new(2, 3, 3, 3)),
        ("batch norm", Box::new(BatchNorm2d::new(3)), Shape::new(4, 3, 3, 3)),
        ("relu", Box::new(Relu::new()), Shape::new(1, 2, 4, 4)),
        ("sigmoid", Box::new(Sigmoid::new()), Shape::new(1, 2, 4, 4)),
        ("max pool", Box::new(MaxPool2d::default()), Shape::new(1, 2, 4, 4)),
    ];
    for (name, layer, shape) in layers.iter_mut() {
        show(name, &check_layer(layer.as_mut(), &x(*shape), 80, 1)?);
    }

    let spec = NetworkSpec::rsb_scaled(5, Resolution::new(16, 16), 8).with_seed(3);
    let mut net = Network::<f64>::build(&spec)?;
    // nonzero biases keep ReLU inputs off exact zeros
    jitter_params(&mut net, 0.1, 4);
    let input = net.probe_input(2, 5);
    let report = check_layer(&mut net, &input, 12, 11)?;
    show("SUIM-Net RSB", &report);
    if let Some(w) = report.worst() {
        println!("worst tensor: {} ({:.2e})", w.name, w.max_rel_error);
    }
    Ok(())
}
