//! Finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kink;
use super::layer::{Layer, Mode};
use super::tensor::Tensor;
use crate::error::Result;

/// Central-difference step.
pub const STEP: f64 = 1e-5;

/// Denominator floor for the relative error. Projected losses over a few
/// thousand outputs carry roundoff near 1e-9 in their central differences,
/// and gradients that cancel exactly (a conv bias feeding batch norm) are
/// analytically zero, so gradients below the floor are compared in absolute
/// terms against `tolerance * REL_FLOOR`.
pub const REL_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub checked: usize,
    /// Coordinates skipped because a perturbation changed the activation
    /// pattern of a ReLU or max-pool layer.
    pub excluded: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.entries.iter().map(|e| e.checked).sum()
    }

    pub fn excluded(&self) -> usize {
        self.entries.iter().map(|e| e.excluded).sum()
    }

    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

fn pick(len: usize, max: usize, rng: &mut impl Rng) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        let mut v = sample(rng, len, max).into_vec();
        v.sort_unstable();
        v
    }
}

/// Compare `analytic` against central differences of `f` at `x` for the
/// given coordinates. `x` is restored before returning.
pub fn check_gradient(
    name: &str,
    x: &mut [f64],
    analytic: &[f64],
    coords: &[usize],
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<GradCheckEntry> {
    let mut worst = 0.0f64;
    for &i in coords {
        let orig = x[i];
        x[i] = orig + STEP;
        let up = f(x)?;
        x[i] = orig - STEP;
        let down = f(x)?;
        x[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(GradCheckEntry {
        name: name.to_string(),
        checked: coords.len(),
        excluded: 0,
        max_rel_error: worst,
    })
}

/// Central difference of `eval(delta)` at `delta = 0`, or `None` when either
/// side lands on a different linear piece than `base`.
fn guarded_difference(base: u64, mut eval: impl FnMut(f64) -> Result<f64>) -> Result<Option<f64>> {
    let (up, fu) = kink::fingerprint(|| eval(STEP));
    let (down, fd) = kink::fingerprint(|| eval(-STEP));
    let (up, down) = (up?, down?);
    Ok((fu == base && fd == base).then(|| (up - down) / (2.0 * STEP)))
}

/// Check input and parameter gradients of `layer` at `input` against the
/// scalar loss `sum(r * layer(x))` for a fixed random projection `r`.
/// At most `max_coords` coordinates are sampled per tensor. Coordinates
/// whose perturbation crosses a ReLU or max-pool kink are excluded and
/// counted.
pub fn check_layer<L: Layer<f64> + ?Sized>(
    layer: &mut L,
    input: &Tensor<f64>,
    max_coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (y, base) = kink::fingerprint(|| layer.forward(input, Mode::Train));
    let y = y?;
    let r = Tensor::<f64>::randn(y.shape(), 1.0, &mut rng);
    layer.zero_grad();
    let dx = layer.backward(&r)?;

    let mut report = GradCheckReport::default();
    let coords = pick(input.len(), max_coords, &mut rng);
    let mut entry = GradCheckEntry {
        name: "input".into(),
        checked: 0,
        excluded: 0,
        max_rel_error: 0.0,
    };
    let mut x = input.clone();
    for &i in &coords {
        let numeric = guarded_difference(base, |delta| {
            x.data_mut()[i] += delta;
            let out = layer.forward(&x, Mode::Train).and_then(|o| o.dot(&r));
            x.data_mut()[i] = input.data()[i];
            out
        })?;
        tally(&mut entry, dx.data()[i], numeric);
    }
    report.entries.push(entry);

    let params: Vec<(String, Vec<f64>)> = layer
        .named_tensors()
        .into_iter()
        .filter_map(|(n, t)| t.grad().map(|g| (n, g.to_vec())))
        .collect();
    for (pi, (name, analytic)) in params.iter().enumerate() {
        let mut entry = GradCheckEntry {
            name: name.clone(),
            checked: 0,
            excluded: 0,
            max_rel_error: 0.0,
        };
        for i in pick(analytic.len(), max_coords, &mut rng) {
            let numeric = guarded_difference(base, |delta| {
                let orig = nth_trainable(layer, pi).data()[i];
                nth_trainable(layer, pi).data_mut()[i] = orig + delta;
                let out = layer.forward(input, Mode::Train).and_then(|o| o.dot(&r));
                nth_trainable(layer, pi).data_mut()[i] = orig;
                out
            })?;
            tally(&mut entry, analytic[i], numeric);
        }
        report.entries.push(entry);
    }
    Ok(report)
}

fn tally(entry: &mut GradCheckEntry, analytic: f64, numeric: Option<f64>) {
    match numeric {
        Some(n) => {
            entry.checked += 1;
            entry.max_rel_error = entry.max_rel_error.max(relative_error(analytic, n));
        }
        None => entry.excluded += 1,
    }
}

/// Add Gaussian noise of scale `std` to every trainable tensor. Fresh
/// networks have zero biases, which puts ReLUs after a ReLU-fed layer
/// exactly on their kink wherever all inputs are zero; jittering moves the
/// check to a generic point.
pub fn jitter_params<L: Layer<f64> + ?Sized>(layer: &mut L, std: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in layer.params_mut() {
        let noise = Tensor::<f64>::randn(t.shape(), std, &mut rng);
        for (v, n) in t.data_mut().iter_mut().zip(noise.data()) {
            *v += n;
        }
    }
}

fn nth_trainable<L: Layer<f64> + ?Sized>(layer: &mut L, n: usize) -> &mut Tensor<f64> {
    layer
        .params_mut()
        .into_iter()
        .nth(n)
        .expect("parameter list is stable across calls")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{BatchNorm2d, Conv2d, ConvTranspose2d, MaxPool2d, Relu, Shape, Sigmoid};

    fn input(shape: Shape, seed: u64) -> Tensor<f64> {
        Tensor::randn(shape, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn quadratic() {
        let mut x = vec![1.0, -2.0, 0.5];
        let analytic: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let e = check_gradient("q", &mut x, &analytic, &[0, 1, 2], |v| Ok(v.iter().map(|a| a * a).sum())).unwrap();
        assert!(e.max_rel_error < 1e-8);
        assert_eq!(x, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut x = vec![1.0];
        let e = check_gradient("q", &mut x, &[3.0], &[0], |v| Ok(v[0] * v[0])).unwrap();
        assert!(e.max_rel_error > 0.1);
    }

    #[test]
    fn linear_map_is_exact() {
        // a 1x1 convolution is linear in each coordinate separately
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut c = Conv2d::<f64>::new(4, 3, 1, 1, 0, &mut rng);
        let r = check_layer(&mut c, &input(Shape::new(2, 4, 3, 3), 9), 200, 0).unwrap();
        assert!(r.max_rel_error() < 1e-8, "{r:?}");
        assert_eq!(r.excluded(), 0);
    }

    #[test]
    fn conv_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut c = Conv2d::<f64>::new(3, 4, 3, 2, 1, &mut rng);
        let r = check_layer(&mut c, &input(Shape::new(2, 3, 7, 6), 1), 60, 0).unwrap();
        assert!(r.max_rel_error() < 1e-6, "{r:?}");
        let mut t = ConvTranspose2d::<f64>::new(3, 2, 2, 2, &mut rng);
        let r = check_layer(&mut t, &input(Shape::new(2, 3, 3, 4), 2), 60, 0).unwrap();
        assert!(r.max_rel_error() < 1e-6, "{r:?}");
    }

    #[test]
    fn batchnorm_and_activations() {
        let mut bn = BatchNorm2d::<f64>::new(3);
        let r = check_layer(&mut bn, &input(Shape::new(2, 3, 4, 4), 4), 100, 0).unwrap();
        assert!(r.max_rel_error() < 1e-5, "{r:?}");
        let r = check_layer(&mut Relu::new(), &input(Shape::new(1, 2, 3, 3), 5), 100, 0).unwrap();
        assert!(r.max_rel_error() < 1e-6, "{r:?}");
        let r = check_layer(&mut Sigmoid::new(), &input(Shape::new(1, 2, 3, 3), 6), 100, 0).unwrap();
        assert!(r.max_rel_error() < 1e-6, "{r:?}");
        let r = check_layer(&mut MaxPool2d::default(), &input(Shape::new(1, 2, 4, 4), 7), 100, 0).unwrap();
        assert!(r.max_rel_error() < 1e-6, "{r:?}");
    }
}
