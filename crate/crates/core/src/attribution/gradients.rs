//! Input-space gradient attributions.

use rayon::prelude::*;

use super::config::{gaussian_like, interpolate, riemann_alpha, sample_rng, RiemannRule};
use crate::error::{shape_err, Error, Result};
use crate::model::ModelGraph;
use crate::tensor::Tensor;

/// Gradient of the class logit with respect to the input.
pub fn vanilla_gradients(model: &ModelGraph, x: &Tensor, class_index: usize) -> Result<Tensor> {
    Ok(model.input_gradient(x, class_index)?.1)
}

/// Element-wise mean of tensors, accumulated in `f64` in slice order.
pub(crate) fn mean_of(tensors: &[Tensor]) -> Result<Tensor> {
    let first = tensors
        .first()
        .ok_or_else(|| Error::Config("cannot average zero tensors".into()))?;
    let mut acc = vec![0.0f64; first.len()];
    for t in tensors {
        if t.shape() != first.shape() {
            return Err(shape_err("mean", "mixed shapes"));
        }
        for (a, &v) in acc.iter_mut().zip(t.data()) {
            *a += v as f64;
        }
    }
    let n = tensors.len() as f64;
    Tensor::from_vec(first.shape(), acc.into_iter().map(|v| (v / n) as f32).collect())
}

/// Midpoint-rule average of the input gradient along
/// `x + I * (alpha - 1)`, i.e. the straight line from `x - I` to `x`.
pub fn path_integral(
    model: &ModelGraph,
    x: &Tensor,
    perturbation: &Tensor,
    class_index: usize,
    steps: usize,
) -> Result<Tensor> {
    if steps == 0 {
        return Err(Error::Config("path integral needs at least one step".into()));
    }
    let baseline = x.sub(perturbation)?;
    let grads = (0..steps)
        .into_par_iter()
        .map(|i| {
            let alpha = riemann_alpha(i, steps, RiemannRule::Midpoint);
            vanilla_gradients(model, &interpolate(x, &baseline, alpha)?, class_index)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_of(&grads)
}

/// `(x - x') * mean_alpha grad F(x' + alpha (x - x'))` with `steps` midpoint
/// samples.
pub fn integrated_gradients(
    model: &ModelGraph,
    x: &Tensor,
    baseline: &Tensor,
    class_index: usize,
    steps: usize,
) -> Result<Tensor> {
    if baseline.shape() != x.shape() {
        return Err(shape_err(
            "integrated_gradients",
            format!("baseline {:?} vs input {:?}", baseline.shape(), x.shape()),
        ));
    }
    let diff = x.sub(baseline)?;
    let avg = path_integral(model, x, &diff, class_index, steps)?;
    diff.mul(&avg)
}

/// Noise draws `eps_j ~ N(0, sigma^2)` shared by the SmoothGrad variants.
pub fn smoothgrad_noise(shape: &[usize], sigma: f32, n: usize, seed: u64) -> Result<Vec<Tensor>> {
    if !(sigma >= 0.0) {
        return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
    }
    (0..n)
        .map(|j| {
            if sigma == 0.0 {
                Ok(Tensor::zeros(shape))
            } else {
                gaussian_like(shape, sigma, &mut sample_rng(seed, j as u64))
            }
        })
        .collect()
}

/// Mean gradient over `n` Gaussian-perturbed copies of `x`.
pub fn smoothgrad(
    model: &ModelGraph,
    x: &Tensor,
    class_index: usize,
    sigma: f32,
    n: usize,
    seed: u64,
) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::Config("smoothgrad needs n >= 1".into()));
    }
    let noise = smoothgrad_noise(x.shape(), sigma, n, seed)?;
    let grads = noise
        .par_iter()
        .map(|eps| vanilla_gradients(model, &x.add(eps)?, class_index))
        .collect::<Result<Vec<_>>>()?;
    mean_of(&grads)
}

/// SmoothGrad written as a single-point path integral:
/// `mean_j (x + eps_j) * grad F(x + eps_j)`. The gradient factor is the
/// one [`smoothgrad`] averages for the same seed; the extra multiplier is
/// the evaluation point itself.
pub fn smoothgrad_as_path(
    model: &ModelGraph,
    x: &Tensor,
    class_index: usize,
    sigma: f32,
    n: usize,
    seed: u64,
) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::Config("smoothgrad needs n >= 1".into()));
    }
    let noise = smoothgrad_noise(x.shape(), sigma, n, seed)?;
    let terms = noise
        .par_iter()
        .map(|eps| {
            let point = x.add(eps)?;
            point.mul(&vanilla_gradients(model, &point, class_index)?)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_of(&terms)
}

/// `|I . phi - (f_c(x) - f_c(x - I))|` on pre-softmax logits.
pub fn completeness_residual(
    model: &ModelGraph,
    x: &Tensor,
    perturbation: &Tensor,
    class_index: usize,
    attribution: &Tensor,
) -> Result<f64> {
    if attribution.shape() != perturbation.shape() {
        return Err(shape_err(
            "completeness_residual",
            format!("attribution {:?} vs perturbation {:?}", attribution.shape(), perturbation.shape()),
        ));
    }
    let predicted = perturbation.dot(attribution)?;
    let actual = model.class_score(x, class_index)? as f64
        - model.class_score(&x.sub(perturbation)?, class_index)? as f64;
    Ok((predicted - actual).abs())
}
