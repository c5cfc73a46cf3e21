//! Insertion/deletion, pixel flipping and infidelity.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::protocol::{ranking, PerturbationProtocol};
use crate::attribution::sample_rng;
use crate::data::image::gaussian_blur;
use crate::error::{shape_err, Error, Result};
use crate::model::ModelGraph;
use crate::tensor::Tensor;

/// A score curve over the fraction of pixels changed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub fractions: Vec<f64>,
    pub values: Vec<f64>,
    pub auc: f64,
}

impl Curve {
    fn new(fractions: Vec<f64>, values: Vec<f64>) -> Self {
        let auc = trapezoid_auc(&fractions, &values);
        Self { fractions, values, auc }
    }
}

pub fn trapezoid_auc(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[0] + y[1]) / 2.0 * (x[1] - x[0]))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InsertionDeletion {
    pub insertion: Curve,
    pub deletion: Curve,
    pub ins_minus_del: f64,
}

fn check_saliency(x: &Tensor, saliency: &Tensor) -> Result<(usize, usize)> {
    let [_, h, w] = *x.shape() else {
        return Err(shape_err("metric", format!("input must be (C,H,W), got {:?}", x.shape())));
    };
    if saliency.shape() != [h, w] {
        return Err(shape_err(
            "metric",
            format!("saliency {:?} does not match input spatial dims ({h}, {w})", saliency.shape()),
        ));
    }
    Ok((h, w))
}

fn check_normalized(saliency: &Tensor) -> Result<()> {
    if saliency.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Config("saliency map must be normalised to [0, 1]".into()));
    }
    Ok(())
}

/// Moves pixels from `start` to `target` in `order`, `step` at a time, and
/// scores every intermediate image including both ends.
fn perturbation_curve(
    start: &Tensor,
    target: &Tensor,
    order: &[usize],
    step: usize,
    score: impl Fn(&Tensor) -> Result<f64> + Sync,
) -> Result<Curve> {
    let c = start.shape()[0];
    let plane = order.len();
    let mut images = vec![start.clone()];
    let mut cur = start.to_vec();
    let mut done = 0;
    let mut fractions = vec![0.0];
    while done < plane {
        let next = (done + step).min(plane);
        for &p in &order[done..next] {
            for ch in 0..c {
                cur[ch * plane + p] = target.data()[ch * plane + p];
            }
        }
        done = next;
        images.push(Tensor::from_vec(start.shape(), cur.clone())?);
        fractions.push(done as f64 / plane as f64);
    }
    let values = images.par_iter().map(&score).collect::<Result<Vec<_>>>()?;
    Ok(Curve::new(fractions, values))
}

fn probability(model: &ModelGraph, class_index: usize) -> impl Fn(&Tensor) -> Result<f64> + Sync + '_ {
    move |img| Ok(model.probabilities(img)?.data()[class_index] as f64)
}

fn logit(model: &ModelGraph, class_index: usize) -> impl Fn(&Tensor) -> Result<f64> + Sync + '_ {
    move |img| Ok(model.class_score(img, class_index)? as f64)
}

/// Insertion starts from the blurred image and restores pixels in
/// `protocol.order`; deletion starts from `x` and replaces pixels with the
/// protocol's replacement. Both score the class probability.
pub fn insertion_deletion_auc(
    model: &ModelGraph,
    x: &Tensor,
    saliency: &Tensor,
    class_index: usize,
    protocol: &PerturbationProtocol,
) -> Result<InsertionDeletion> {
    protocol.validate()?;
    model.check_class(class_index)?;
    let (h, w) = check_saliency(x, saliency)?;
    check_normalized(saliency)?;
    let order = ranking(saliency, protocol.order);
    let step = protocol.step(h * w);
    let blurred = gaussian_blur(x, protocol.insertion_blur)?;
    let insertion = perturbation_curve(&blurred, x, &order, step, probability(model, class_index))?;
    let removed = protocol.replacement.reference(x)?;
    let deletion = perturbation_curve(x, &removed, &order, step, probability(model, class_index))?;
    Ok(InsertionDeletion {
        ins_minus_del: insertion.auc - deletion.auc,
        insertion,
        deletion,
    })
}

/// Class-logit curve while flipping pixels to the replacement value in
/// `protocol.order`.
pub fn pixel_flipping_curve(
    model: &ModelGraph,
    x: &Tensor,
    saliency: &Tensor,
    class_index: usize,
    protocol: &PerturbationProtocol,
) -> Result<Curve> {
    protocol.validate()?;
    model.check_class(class_index)?;
    let (h, w) = check_saliency(x, saliency)?;
    check_normalized(saliency)?;
    let order = ranking(saliency, protocol.order);
    let removed = protocol.replacement.reference(x)?;
    perturbation_curve(x, &removed, &order, protocol.step(h * w), logit(model, class_index))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfidelityEstimate {
    /// Mean of the squared completeness gaps.
    pub value: f64,
    /// Standard error of `value`.
    pub std_error: f64,
    /// Same estimate after rescaling the attribution by the least-squares
    /// factor `beta`, which removes the arbitrary scale of saliency maps.
    pub scaled_value: f64,
    pub beta: f64,
    /// Per-draw `I . phi` and `f(x) - f(x - I)`.
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
}

/// Square patch `(top, left, bottom, right)` of draw `draw`, centred on a
/// uniform pixel and clipped to the image.
pub fn infidelity_patch(h: usize, w: usize, patch: usize, seed: u64, draw: usize) -> (usize, usize, usize, usize) {
    let mut rng = sample_rng(seed, draw as u64);
    let cy = rng.random_range(0..h);
    let cx = rng.random_range(0..w);
    let top = cy.saturating_sub(patch / 2);
    let left = cx.saturating_sub(patch / 2);
    let bottom = (cy + patch - patch / 2).min(h);
    let right = (cx + patch - patch / 2).min(w);
    (top, left, bottom, right)
}

/// Perturbation `I` that zeroes the patch of `x`, so `x - I` has a black
/// square.
pub fn patch_perturbation(x: &Tensor, rect: (usize, usize, usize, usize)) -> Result<Tensor> {
    let [c, h, w] = *x.shape() else {
        return Err(shape_err("infidelity", format!("expected (C,H,W), got {:?}", x.shape())));
    };
    let (top, left, bottom, right) = rect;
    let mut data = vec![0.0f32; x.len()];
    for ch in 0..c {
        for i in top..bottom {
            for j in left..right {
                let k = ch * h * w + i * w + j;
                data[k] = x.data()[k];
            }
        }
    }
    Tensor::from_vec(x.shape(), data)
}

/// Monte-Carlo estimate of `E_I[(I . phi - (f_c(x) - f_c(x - I)))^2]`
/// with `phi` the `(H, W)` saliency broadcast over channels and `f_c` the
/// class logit.
pub fn infidelity(
    model: &ModelGraph,
    x: &Tensor,
    saliency: &Tensor,
    class_index: usize,
    n_perturbations: usize,
    patch_size: usize,
    seed: u64,
) -> Result<InfidelityEstimate> {
    model.check_class(class_index)?;
    let (h, w) = check_saliency(x, saliency)?;
    if patch_size == 0 || patch_size > h.min(w) {
        return Err(Error::Config(format!("patch size {patch_size} does not fit a {h}x{w} image")));
    }
    if n_perturbations == 0 {
        return Err(Error::Config("infidelity needs at least one perturbation".into()));
    }
    let c = x.shape()[0];
    let phi = Tensor::from_vec(x.shape(), (0..c).flat_map(|_| saliency.data().iter().copied()).collect())?;
    let clean = model.class_score(x, class_index)? as f64;
    let pairs = (0..n_perturbations)
        .into_par_iter()
        .map(|d| {
            let pert = patch_perturbation(x, infidelity_patch(h, w, patch_size, seed, d))?;
            let predicted = pert.dot(&phi)?;
            let actual = clean - model.class_score(&x.sub(&pert)?, class_index)? as f64;
            Ok((predicted, actual))
        })
        .collect::<Result<Vec<_>>>()?;
    let (predicted, actual): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let sq: Vec<f64> = predicted.iter().zip(&actual).map(|(p, a)| (p - a).powi(2)).collect();
    let n = sq.len() as f64;
    let value = sq.iter().sum::<f64>() / n;
    let std_error = if sq.len() > 1 {
        (sq.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    let pp: f64 = predicted.iter().map(|p| p * p).sum();
    let beta = if pp > 0.0 {
        predicted.iter().zip(&actual).map(|(p, a)| p * a).sum::<f64>() / pp
    } else {
        0.0
    };
    let scaled_value = predicted.iter().zip(&actual).map(|(p, a)| (beta * p - a).powi(2)).sum::<f64>() / n;
    Ok(InfidelityEstimate {
        value,
        std_error,
        scaled_value,
        beta,
        predicted,
        actual,
    })
}
