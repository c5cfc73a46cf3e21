//! Feature-scaling saturation study: how target-layer embeddings and class
//! scores evolve along `alpha * x`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{interpolate, sample_rng};
use crate::error::{Error, Result};
use crate::metrics::mean_std;
use crate::model::{LayerKind, ModelGraph};
use crate::ops::softmax;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleMode {
    /// `N` draws from `U(0, 1)`, sorted.
    SortedUniform,
    /// `N` evenly spaced values from 0 to 1.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScaleBaseline {
    /// `alpha * x`.
    Zero,
    /// `m + alpha (x - m)` with a per-channel mean image `m`.
    Mean(Vec<f32>),
}

/// Alpha values for `n` points; sorted ascending.
pub fn scale_alphas(n: usize, mode: ScaleMode, seed: u64) -> Result<Vec<f32>> {
    if n < 2 {
        return Err(Error::Config(format!("scale sequence needs N >= 2, got {n}")));
    }
    Ok(match mode {
        ScaleMode::Grid => (0..n).map(|i| (i as f64 / (n - 1) as f64) as f32).collect(),
        ScaleMode::SortedUniform => {
            let mut rng = sample_rng(seed, 0);
            let mut a: Vec<f32> = (0..n).map(|_| rng.random::<f32>()).collect();
            a.sort_by(f32::total_cmp);
            a
        }
    })
}

/// `(alpha, scaled input)` pairs.
pub fn scale_sequence(
    x: &Tensor,
    n: usize,
    mode: ScaleMode,
    baseline: &ScaleBaseline,
    seed: u64,
) -> Result<Vec<(f32, Tensor)>> {
    scale_inputs(x, &scale_alphas(n, mode, seed)?, baseline)
}

pub fn scale_inputs(x: &Tensor, alphas: &[f32], baseline: &ScaleBaseline) -> Result<Vec<(f32, Tensor)>> {
    let base = match baseline {
        ScaleBaseline::Zero => None,
        ScaleBaseline::Mean(m) => {
            let plane = x.len() / x.shape()[0];
            if m.len() != x.shape()[0] {
                return Err(Error::Config(format!("{} channel means for {} channels", m.len(), x.shape()[0])));
            }
            Some(Tensor::from_vec(x.shape(), m.iter().flat_map(|&v| std::iter::repeat_n(v, plane)).collect())?)
        }
    };
    alphas
        .iter()
        .map(|&a| {
            let t = match &base {
                None => x.scale(a),
                Some(b) => interpolate(x, b, a)?,
            };
            Ok((a, t))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveKind {
    EmbeddingCosine,
    Presoftmax,
    Postsoftmax,
}

impl CurveKind {
    pub fn id(self) -> &'static str {
        match self {
            CurveKind::EmbeddingCosine => "embedding_cosine",
            CurveKind::Presoftmax => "presoftmax",
            CurveKind::Postsoftmax => "postsoftmax",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationCurve {
    pub kind: CurveKind,
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    /// Points whose embedding had zero norm (value recorded as 0).
    pub flagged: Vec<usize>,
}

/// Which activations the cosine curve compares when the target is a ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingPoint {
    PostRelu,
    PreRelu,
}

fn embedding_layer(model: &ModelGraph, layer: &str, point: EmbeddingPoint) -> Result<String> {
    let idx = model.layer_index(layer)?;
    Ok(match point {
        EmbeddingPoint::PreRelu if idx > 0 && matches!(model.layers()[idx].kind, LayerKind::Relu) => {
            model.layers()[idx - 1].name.clone()
        }
        _ => layer.to_string(),
    })
}

fn cosine(a: &Tensor, b: &Tensor) -> Option<f64> {
    if a == b {
        return (a.norm() > 0.0).then_some(1.0);
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((a.dot(b).ok()? / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity between the target-layer embedding at each scaled
/// input and at `x`.
pub fn embedding_cosine_curve(
    model: &ModelGraph,
    x: &Tensor,
    target_layer: &str,
    sequence: &[(f32, Tensor)],
    point: EmbeddingPoint,
) -> Result<SaturationCurve> {
    let layer = embedding_layer(model, target_layer, point)?;
    let reference = model.activations(x, &layer)?;
    let embeddings = sequence
        .par_iter()
        .map(|(_, t)| model.activations(t, &layer))
        .collect::<Result<Vec<_>>>()?;
    let mut flagged = Vec::new();
    let values = embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| {
            cosine(e, &reference).unwrap_or_else(|| {
                flagged.push(i);
                0.0
            })
        })
        .collect();
    Ok(SaturationCurve {
        kind: CurveKind::EmbeddingCosine,
        alphas: sequence.iter().map(|(a, _)| *a as f64).collect(),
        values,
        flagged,
    })
}

/// Class score at each scaled input, before or after the softmax.
pub fn output_score_curve(
    model: &ModelGraph,
    class_index: usize,
    sequence: &[(f32, Tensor)],
    kind: CurveKind,
) -> Result<SaturationCurve> {
    model.check_class(class_index)?;
    if kind == CurveKind::EmbeddingCosine {
        return Err(Error::Config("output_score_curve takes presoftmax or postsoftmax".into()));
    }
    let values = sequence
        .par_iter()
        .map(|(_, t)| {
            let logits = model.forward(t)?;
            Ok(match kind {
                CurveKind::Presoftmax => logits.data()[class_index] as f64,
                _ => softmax(logits.data())[class_index] as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SaturationCurve {
        kind,
        alphas: sequence.iter().map(|(a, _)| *a as f64).collect(),
        values,
        flagged: vec![],
    })
}

/// Smallest alpha whose value reaches `fraction` of the value at the
/// final point.
pub fn alpha_star(curve: &SaturationCurve, fraction: f64) -> f64 {
    let target = fraction * curve.values.last().copied().unwrap_or(0.0);
    curve
        .alphas
        .iter()
        .zip(&curve.values)
        .find(|(_, &v)| v >= target)
        .map(|(&a, _)| a)
        .unwrap_or(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationConfig {
    pub target_layer: String,
    pub n_alphas: usize,
    pub mode: ScaleMode,
    pub baseline: ScaleBaseline,
    pub embedding: EmbeddingPoint,
    pub seed: u64,
    /// Share of the final post-softmax score that defines `alpha_star`.
    pub threshold: f64,
}

impl SaturationConfig {
    pub fn new(target_layer: impl Into<String>, n_alphas: usize, seed: u64) -> Self {
        Self {
            target_layer: target_layer.into(),
            n_alphas,
            mode: ScaleMode::SortedUniform,
            baseline: ScaleBaseline::Zero,
            embedding: EmbeddingPoint::PostRelu,
            seed,
            threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCurves {
    /// Top label at `x`.
    pub class_index: usize,
    pub curves: Vec<SaturationCurve>,
    pub alpha_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub kind: CurveKind,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationReport {
    pub config: SaturationConfig,
    pub alphas: Vec<f64>,
    pub per_sample: Vec<SampleCurves>,
    pub aggregate: Vec<AggregateCurve>,
    pub alpha_star_mean: f64,
    pub alpha_star_std: f64,
}

const KINDS: [CurveKind; 3] = [CurveKind::EmbeddingCosine, CurveKind::Presoftmax, CurveKind::Postsoftmax];

/// All three curves for every sample on one shared alpha set. The drawn
/// alphas are extended with the endpoints 0 and 1 so each curve spans the
/// full path.
pub fn saturation_report(model: &ModelGraph, samples: &[Tensor], config: &SaturationConfig) -> Result<SaturationReport> {
    if samples.is_empty() {
        return Err(Error::Config("saturation report needs at least one sample".into()));
    }
    let mut alphas = scale_alphas(config.n_alphas, config.mode, config.seed)?;
    if alphas.first() != Some(&0.0) {
        alphas.insert(0, 0.0);
    }
    if alphas.last() != Some(&1.0) {
        alphas.push(1.0);
    }
    alphas.dedup();
    let per_sample = samples
        .par_iter()
        .map(|x| {
            let seq = scale_inputs(x, &alphas, &config.baseline)?;
            let class_index = model.forward(x)?.argmax();
            let cos = embedding_cosine_curve(model, x, &config.target_layer, &seq, config.embedding)?;
            let pre = output_score_curve(model, class_index, &seq, CurveKind::Presoftmax)?;
            let post = output_score_curve(model, class_index, &seq, CurveKind::Postsoftmax)?;
            let alpha_star = alpha_star(&post, config.threshold);
            Ok(SampleCurves {
                class_index,
                curves: vec![cos, pre, post],
                alpha_star,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate_curves(&per_sample, alphas.len());
    let stars: Vec<f64> = per_sample.iter().map(|s| s.alpha_star).collect();
    let (alpha_star_mean, alpha_star_std) = mean_std(&stars);
    Ok(SaturationReport {
        config: config.clone(),
        alphas: alphas.iter().map(|&a| a as f64).collect(),
        per_sample,
        aggregate,
        alpha_star_mean,
        alpha_star_std,
    })
}

/// Per-alpha mean and population standard deviation of each curve kind.
pub fn aggregate_curves(per_sample: &[SampleCurves], points: usize) -> Vec<AggregateCurve> {
    KINDS
        .iter()
        .enumerate()
        .map(|(ki, &kind)| {
            let (mean, std) = (0..points)
                .map(|p| {
                    let col: Vec<f64> = per_sample.iter().map(|s| s.curves[ki].values[p]).collect();
                    mean_std(&col)
                })
                .unzip();
            AggregateCurve { kind, mean, std }
        })
        .collect()
}

impl SaturationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `alpha,mean,std,kind` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,mean,std,kind\n");
        for agg in &self.aggregate {
            for ((a, m), s) in self.alphas.iter().zip(&agg.mean).zip(&agg.std) {
                out.push_str(&format!("{a},{m},{s},{}\n", agg.kind.id()));
            }
        }
        out
    }
}
