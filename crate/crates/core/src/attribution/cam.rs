//! Class activation maps: Grad-CAM, Integrated Grad-CAM, the generalized
//! perturbation score and Expected Grad-CAM.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{
    interpolate, riemann_alpha, sample_rng, AttributionConfig, BaselineDistribution, DifferenceScaling,
    RiemannRule, SmoothingPoint,
};
use super::saliency::{weighted_map, CoarseSaliency};
use crate::error::{shape_err, Error, Result};
use crate::model::{ActivationTrace, ModelGraph};
use crate::tensor::Tensor;

/// Stream offset for the draws behind the kernel normaliser, keeping them
/// disjoint from the per-sample streams `0..n`.
const NORMALIZER_STREAM: u64 = 1 << 62;

fn spatial_dims(layer: &str, a: &Tensor) -> Result<(usize, usize)> {
    match *a.shape() {
        [k, h, w] => Ok((k, h * w)),
        _ => Err(Error::NonSpatialLayer {
            layer: layer.to_string(),
            shape: a.shape().to_vec(),
        }),
    }
}

/// Per-unit spatial mean, `1/Z sum_ij g_kij`.
pub fn gap_weights(grads: &Tensor) -> Result<Vec<f64>> {
    let [k, h, w] = *grads.shape() else {
        return Err(shape_err("gap", format!("expected (K,s,s), got {:?}", grads.shape())));
    };
    let z = (h * w) as f64;
    Ok((0..k)
        .map(|unit| grads.data()[unit * h * w..][..h * w].iter().map(|&v| v as f64).sum::<f64>() / z)
        .collect())
}

/// Per-unit `1/Z sum_ij d_kij g_kij`.
fn scaled_gap(diff: &Tensor, grads: &Tensor) -> Result<Vec<f64>> {
    if diff.shape() != grads.shape() {
        return Err(shape_err("cam weights", format!("{:?} vs {:?}", diff.shape(), grads.shape())));
    }
    let [k, h, w] = *grads.shape() else {
        return Err(shape_err("cam weights", format!("expected (K,s,s), got {:?}", grads.shape())));
    };
    let plane = h * w;
    Ok((0..k)
        .map(|unit| {
            let d = &diff.data()[unit * plane..][..plane];
            let g = &grads.data()[unit * plane..][..plane];
            d.iter().zip(g).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() / plane as f64
        })
        .collect())
}

fn coarse(
    model: &ModelGraph,
    weights: &[f64],
    activations: &Tensor,
    layer: &str,
    class_index: usize,
) -> Result<CoarseSaliency> {
    let [_, h, w] = model.input_shape();
    Ok(CoarseSaliency {
        map: weighted_map(weights, activations)?,
        weights: weights.iter().map(|&v| v as f32).collect(),
        target_layer: layer.to_string(),
        class_index,
        input_hw: (h, w),
    })
}

/// Grad-CAM from an existing trace.
pub fn grad_cam_from_trace(model: &ModelGraph, trace: &ActivationTrace, class_index: usize) -> Result<CoarseSaliency> {
    spatial_dims(&trace.target_layer, &trace.activations)?;
    let weights = gap_weights(&trace.grads)?;
    coarse(model, &weights, &trace.activations, &trace.target_layer, class_index)
}

pub fn grad_cam(model: &ModelGraph, x: &Tensor, class_index: usize, target_layer: &str) -> Result<CoarseSaliency> {
    let trace = model.forward_with_trace(x, class_index, target_layer)?;
    grad_cam_from_trace(model, &trace, class_index)
}

/// Integrated Grad-CAM weights for one baseline: the layer difference
/// `A(x) - A(x')` times the midpoint-rule mean of the target-layer
/// gradients along the straight input path, spatially averaged.
fn integrated_weights(
    model: &ModelGraph,
    x: &Tensor,
    baseline: &Tensor,
    a_x: &Tensor,
    class_index: usize,
    layer: &str,
    steps: usize,
) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Config("integrated grad-cam needs at least one step".into()));
    }
    let a_base = model.activations(baseline, layer)?;
    let diff = a_x.sub(&a_base)?;
    let grads = (0..steps)
        .into_par_iter()
        .map(|i| {
            let alpha = riemann_alpha(i, steps, RiemannRule::Midpoint);
            let a = model.activations(&interpolate(x, baseline, alpha)?, layer)?;
            Ok(model.trace_from(layer, &a, class_index)?.1)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = super::gradients::mean_of(&grads)?;
    scaled_gap(&diff, &mean)
}

/// Grad-CAM with path-integrated gradients from a single baseline.
pub fn integrated_gradcam(
    model: &ModelGraph,
    x: &Tensor,
    baseline: &Tensor,
    class_index: usize,
    target_layer: &str,
    steps: usize,
) -> Result<CoarseSaliency> {
    model.check_class(class_index)?;
    if baseline.shape() != x.shape() {
        return Err(shape_err("integrated_gradcam", "baseline shape differs from input"));
    }
    let a_x = model.activations(x, target_layer)?;
    spatial_dims(target_layer, &a_x)?;
    let weights = integrated_weights(model, x, baseline, &a_x, class_index, target_layer, steps)?;
    coarse(model, &weights, &a_x, target_layer, class_index)
}

/// A discrete distribution over input perturbations `I`.
#[derive(Debug, Clone)]
pub struct PerturbationSet {
    pub perturbations: Vec<Tensor>,
    pub probs: Vec<f64>,
}

impl PerturbationSet {
    pub fn new(perturbations: Vec<Tensor>, probs: Vec<f64>) -> Result<Self> {
        if perturbations.is_empty() {
            return Err(Error::Config("perturbation set is empty".into()));
        }
        if probs.len() != perturbations.len() {
            return Err(Error::Config(format!(
                "{} probabilities for {} perturbations",
                probs.len(),
                perturbations.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Config("perturbation probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("perturbation probabilities sum to {total}, not 1")));
        }
        Ok(Self { perturbations, probs })
    }

    pub fn single(perturbation: Tensor) -> Self {
        Self {
            perturbations: vec![perturbation],
            probs: vec![1.0],
        }
    }
}

/// `sum_I p(I) T(I)` where `T(I)` are the Integrated Grad-CAM weights along
/// the linear path from `x - I` to `x`. A zero perturbation is a point path
/// and contributes nothing.
pub fn generalized_cam_score(
    model: &ModelGraph,
    x: &Tensor,
    class_index: usize,
    target_layer: &str,
    set: &PerturbationSet,
    steps: usize,
) -> Result<CoarseSaliency> {
    model.check_class(class_index)?;
    let a_x = model.activations(x, target_layer)?;
    let (k, _) = spatial_dims(target_layer, &a_x)?;
    let mut total = vec![0.0f64; k];
    for (pert, &p) in set.perturbations.iter().zip(&set.probs) {
        if pert.shape() != x.shape() {
            return Err(shape_err("generalized_cam_score", format!("perturbation {:?} vs input {:?}", pert.shape(), x.shape())));
        }
        if p == 0.0 || pert.data().iter().all(|&v| v == 0.0) {
            continue;
        }
        let w = integrated_weights(model, x, &x.sub(pert)?, &a_x, class_index, target_layer, steps)?;
        for (t, v) in total.iter_mut().zip(w) {
            *t += p * v;
        }
    }
    coarse(model, &total, &a_x, target_layer, class_index)
}

/// Expected Grad-CAM output with Monte-Carlo diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ExpectedGradCam {
    pub saliency: CoarseSaliency,
    /// `T_s[k]`, one row per Monte-Carlo sample.
    pub per_sample_weights: Vec<Vec<f32>>,
    /// Spatial mean of the raw gradient `Delta_s` per unit, one row per sample.
    pub gradient_factors: Vec<Vec<f32>>,
    /// `y_c(x) / mean_eta y_c(x + eta)`; exactly 1 for the identity kernel.
    pub kernel_normalizer: f32,
}

impl ExpectedGradCam {
    pub fn weights(&self) -> &[f32] {
        &self.saliency.weights
    }
}

struct SampleTerms {
    weights: Vec<f64>,
    factors: Vec<f64>,
}

/// Monte-Carlo Expected Grad-CAM. Sample `s` draws a baseline `x'`, an
/// `alpha` and kernel noise `eta` from its own stream, takes the
/// target-layer gradient `Delta` at `gamma(alpha) + eta`, and contributes
/// `T_s[k] = 1/Z sum_ij (A(x) - A(x'))_kij Delta_kij`. The weights are the
/// sample mean of `T_s`; the map is `relu(sum_k w_k A_k(x))`.
pub fn expected_gradcam(
    model: &ModelGraph,
    x: &Tensor,
    class_index: usize,
    target_layer: &str,
    config: &AttributionConfig,
) -> Result<ExpectedGradCam> {
    config.validate()?;
    model.check_class(class_index)?;
    let a_x = model.activations(x, target_layer)?;
    let (k, _) = spatial_dims(target_layer, &a_x)?;

    // deterministic baselines share one set of activations
    let fixed_base = match &config.baseline {
        BaselineDistribution::Constant(_) | BaselineDistribution::Fixed(_) => {
            let b = config.baseline.sample(x, &mut sample_rng(config.seed, 0))?;
            let a = model.activations(&b, target_layer)?;
            Some(a)
        }
        _ => None,
    };

    let terms = (0..config.n_samples)
        .into_par_iter()
        .map(|s| sample_terms(model, x, &a_x, fixed_base.as_ref(), class_index, target_layer, config, s))
        .collect::<Result<Vec<_>>>()?;

    let mut mean = vec![0.0f64; k];
    for t in &terms {
        for (m, &v) in mean.iter_mut().zip(&t.weights) {
            *m += v;
        }
    }
    let n = config.n_samples as f64;
    mean.iter_mut().for_each(|m| *m /= n);

    let kernel_normalizer = kernel_normalizer(model, x, class_index, config)?;
    if config.apply_kernel_normalizer {
        mean.iter_mut().for_each(|m| *m *= kernel_normalizer);
    }
    let to_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
    Ok(ExpectedGradCam {
        saliency: coarse(model, &mean, &a_x, target_layer, class_index)?,
        per_sample_weights: terms.iter().map(|t| to_f32(&t.weights)).collect(),
        gradient_factors: terms.iter().map(|t| to_f32(&t.factors)).collect(),
        kernel_normalizer: kernel_normalizer as f32,
    })
}

#[allow(clippy::too_many_arguments)]
fn sample_terms(
    model: &ModelGraph,
    x: &Tensor,
    a_x: &Tensor,
    fixed_base: Option<&Tensor>,
    class_index: usize,
    layer: &str,
    config: &AttributionConfig,
    s: usize,
) -> Result<SampleTerms> {
    let mut rng = sample_rng(config.seed, s as u64);
    let baseline = config.baseline.sample(x, &mut rng)?;
    let alpha = config.path.alpha(s, &mut rng)?;
    let a_base = match fixed_base {
        Some(a) => a.clone(),
        None => model.activations(&baseline, layer)?,
    };
    let interpolated = match config.smoothing_point {
        SmoothingPoint::Interpolated => Some(config.path.point(x, &baseline, alpha, &mut rng)?),
        SmoothingPoint::Input => None,
    };
    let k = a_x.shape()[0];
    let mut weights = vec![0.0f64; k];
    let mut factors = vec![0.0f64; k];
    let draws = config.kernel.sample_count;
    for _ in 0..draws {
        let (eval, a_in) = match &interpolated {
            Some(point) => (config.kernel.apply(point, x, &mut rng)?, None),
            None => {
                let noisy = config.kernel.apply(x, x, &mut rng)?;
                let point = config.path.point(&noisy, &baseline, alpha, &mut rng)?;
                let a_noisy = model.activations(&noisy, layer)?;
                (point, Some(a_noisy))
            }
        };
        let a_eval = model.activations(&eval, layer)?;
        let (_, delta) = model.trace_from(layer, &a_eval, class_index)?;
        let w = match config.difference {
            DifferenceScaling::LayerActivation => {
                let diff = a_in.as_ref().unwrap_or(a_x).sub(&a_base)?;
                scaled_gap(&diff, &delta)?
            }
            DifferenceScaling::Disabled => gap_weights(&delta)?,
        };
        for (acc, v) in weights.iter_mut().zip(w) {
            *acc += v;
        }
        for (acc, v) in factors.iter_mut().zip(gap_weights(&delta)?) {
            *acc += v;
        }
    }
    let d = draws as f64;
    weights.iter_mut().for_each(|v| *v /= d);
    factors.iter_mut().for_each(|v| *v /= d);
    Ok(SampleTerms { weights, factors })
}

fn kernel_normalizer(model: &ModelGraph, x: &Tensor, class_index: usize, config: &AttributionConfig) -> Result<f64> {
    if config.kernel.is_identity() {
        return Ok(1.0);
    }
    let draws = config.n_samples * config.kernel.sample_count;
    let scores = (0..draws)
        .into_par_iter()
        .map(|j| {
            let mut rng = sample_rng(config.seed, NORMALIZER_STREAM + j as u64);
            model.class_score(&config.kernel.apply(x, x, &mut rng)?, class_index)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = scores.iter().map(|&v| v as f64).sum::<f64>() / draws as f64;
    let clean = model.class_score(x, class_index)? as f64;
    if mean == 0.0 {
        return Ok(1.0);
    }
    Ok(clean / mean)
}
