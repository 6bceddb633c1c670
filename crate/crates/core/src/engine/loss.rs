use super::real::Real;
use super::tensor::Tensor;
use crate::error::Result;

/// Probability clamp applied before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy of probabilities `pred` against 0/1 `target`.
pub fn bce_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    pred.expect_shape(target.shape(), "bce loss")?;
    let eps = T::from_f64_lossy(BCE_EPS);
    let hi = T::one() - eps;
    let total: T = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let p = p.max(eps).min(hi);
            -(t * p.ln() + (T::one() - t) * (T::one() - p).ln())
        })
        .sum();
    Ok(total / T::from_usize(pred.len().max(1)).unwrap_or_else(T::one))
}

/// Gradient of [`bce_loss`] w.r.t. `pred`; zero where the clamp is active.
pub fn bce_loss_backward<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    pred.expect_shape(target.shape(), "bce loss backward")?;
    let eps = T::from_f64_lossy(BCE_EPS);
    let hi = T::one() - eps;
    let m = T::from_usize(pred.len().max(1)).unwrap_or_else(T::one);
    let mut g = Tensor::zeros(pred.shape());
    for ((gv, &p), &t) in g.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        *gv = if p < eps || p > hi {
            T::zero()
        } else {
            (p - t) / (p * (T::one() - p)) / m
        };
    }
    Ok(g)
}

/// Gradient of `bce_loss(sigmoid(z), target)` w.r.t. the logits `z`,
/// given `prob = sigmoid(z)`. This is `(p - t) / M` and stays finite when
/// the sigmoid saturates.
pub fn sigmoid_bce_backward<T: Real>(prob: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    prob.expect_shape(target.shape(), "sigmoid bce backward")?;
    let m = T::from_usize(prob.len().max(1)).unwrap_or_else(T::one);
    let mut g = Tensor::zeros(prob.shape());
    for ((gv, &p), &t) in g.data_mut().iter_mut().zip(prob.data()).zip(target.data()) {
        *gv = (p - t) / m;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Shape;

    #[test]
    fn perfect_prediction_near_zero() {
        let t = Tensor::<f64>::new(Shape::new(1, 1, 2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(bce_loss(&t, &t).unwrap() <= 1e-6);
    }

    #[test]
    fn half_is_ln2() {
        let p = Tensor::<f64>::full(Shape::new(2, 3, 2, 2), 0.5);
        let t = Tensor::<f64>::from_fn(p.shape(), |i| (i % 2) as f64);
        assert!((bce_loss(&p, &t).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let p = Tensor::<f64>::zeros(Shape::new(1, 1, 2, 2));
        let t = Tensor::<f64>::zeros(Shape::new(1, 2, 2, 2));
        assert!(bce_loss(&p, &t).is_err());
        assert!(bce_loss_backward(&p, &t).is_err());
    }
}
