use super::ShapeError;
use crate::Scalar;

/// Mean squared error between probability vectors and one-hot targets,
/// averaged over batch and classes.
///
/// Returns the loss and, per sample, its gradient with respect to the
/// probabilities: `2 (p - t) / (batch * n_classes)`.
pub fn mse_loss<T: Scalar>(probs: &[Vec<T>], targets: &[usize]) -> Result<(f64, Vec<Vec<T>>), ShapeError> {
    if probs.len() != targets.len() {
        return Err(ShapeError::Length {
            expected: probs.len(),
            actual: targets.len(),
        });
    }
    if probs.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let k = probs[0].len();
    let denom = (probs.len() * k) as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(probs.len());
    for (p, &t) in probs.iter().zip(targets) {
        let (sq, g) = mse_sample(p, t, denom)?;
        total += sq;
        grads.push(g);
    }
    Ok((total / denom, grads))
}

/// Sum of squared errors for one sample and its share of the gradient of a
/// mean taken over `denom` terms.
pub(crate) fn mse_sample<T: Scalar>(p: &[T], target: usize, denom: f64) -> Result<(f64, Vec<T>), ShapeError> {
    if target >= p.len() {
        return Err(ShapeError::Target {
            class: target,
            n_classes: p.len(),
        });
    }
    let scale = T::of(2.0 / denom);
    let mut sq = 0.0;
    let grad = p
        .iter()
        .enumerate()
        .map(|(c, &v)| {
            let diff = if c == target { v - T::one() } else { v };
            sq += diff.wide() * diff.wide();
            scale * diff
        })
        .collect();
    Ok((sq, grad))
}
