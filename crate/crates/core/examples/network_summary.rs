//! Layer-by-layer shapes and parameter counts of the reference networks.

use suimkit::engine::Layer;
use suimkit::network::{Network, NetworkSpec, Variant};

fn main() -> anyhow::Result<()> {
    for variant in [Variant::Rsb, Variant::Vgg] {
        let spec = NetworkSpec::reference(variant, 5);
        let net = Network::<f32>::build(&spec)?;
        print!("{}", net.summary());
        println!("  residual skip blocks: {}\n", spec.rsb_count());
    }
    let spec = NetworkSpec::rsb_reference(5);
    println!("spec as JSON:\n{}", spec.to_json()?);
    let net = Network::<f32>::build(&spec)?;
    let largest = net
        .named_tensors()
        .into_iter()
        .max_by_key(|(_, t)| t.len())
        .map(|(n, t)| format!("{n} {:?}", t.shape().dims()));
    println!("largest tensor: {}", largest.unwrap_or_default());
    Ok(())
}
