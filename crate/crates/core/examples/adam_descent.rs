//! Adam on a badly scaled quadratic, using the toolkit's tensors and
//! gradient slots directly.

use suimkit::engine::{Adam, AdamConfig, Shape, Tensor};

fn main() -> anyhow::Result<()> {
    // f(x, y) = x^2 + 100 y^2
    let scale = [1.0, 100.0];
    let mut p = Tensor::<f64>::new(Shape::new(1, 1, 1, 2), vec![3.0, -2.0])?.requires_grad();
    let mut adam = Adam::new(AdamConfig { lr: 0.05, ..Default::default() });
    for step in 0..=300 {
        let g: Vec<f64> = p.data().iter().zip(scale).map(|(v, s)| 2.0 * s * v).collect();
        if step % 50 == 0 {
            let f: f64 = p.data().iter().zip(scale).map(|(v, s)| s * v * v).sum();
            println!("step {step:>3}  x {:+.5}  y {:+.5}  f {f:.6}", p.data()[0], p.data()[1]);
        }
        p.zero_grad();
        p.accumulate_grad(&g);
        adam.step(&mut [&mut p])?;
    }
    Ok(())
}
