//! Baseline distributions, smoothing kernels, paths, and the Monte-Carlo
//! configuration that ties them together.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Serialize, Serializer};

use crate::data::image::gaussian_blur;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Counter-based RNG for draw `stream` of a run seeded with `seed`. Each
/// Monte-Carlo sample owns its stream, so results do not depend on the
/// order or parallelism in which samples are evaluated.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn gaussian_like(shape: &[usize], sigma: f32, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    let normal = Normal::new(0.0f32, sigma)
        .map_err(|e| Error::Config(format!("gaussian sigma {sigma}: {e}")))?;
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| normal.sample(rng)).collect())
}

/// Reference inputs `x'` for counterfactual comparisons.
#[derive(Debug, Clone)]
pub enum BaselineDistribution {
    /// Every feature set to one value.
    Constant(f32),
    /// One explicit reference input.
    Fixed(Tensor),
    /// Uniform draws, with replacement, from a reference set.
    Dataset(Arc<Vec<Tensor>>),
    /// `x` plus isotropic Gaussian noise.
    GaussianNoise { sigma: f32 },
    /// A Gaussian-blurred copy of `x`.
    Blur { radius: f32 },
}

impl BaselineDistribution {
    pub fn dataset(images: Vec<Tensor>) -> Self {
        BaselineDistribution::Dataset(Arc::new(images))
    }

    /// Draws one baseline shaped like `x`.
    pub fn sample(&self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let out = match self {
            BaselineDistribution::Constant(v) => Tensor::full(x.shape(), *v),
            BaselineDistribution::Fixed(t) => t.clone(),
            BaselineDistribution::Dataset(set) => {
                if set.is_empty() {
                    return Err(Error::Config("baseline dataset is empty".into()));
                }
                set[rng.random_range(0..set.len())].clone()
            }
            BaselineDistribution::GaussianNoise { sigma } => {
                x.add(&gaussian_like(x.shape(), *sigma, rng)?)?
            }
            BaselineDistribution::Blur { radius } => gaussian_blur(x, *radius)?,
        };
        if out.shape() != x.shape() {
            return Err(shape_err(
                "baseline",
                format!("baseline shape {:?} differs from input {:?}", out.shape(), x.shape()),
            ));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BaselineDistribution::Dataset(set) if set.is_empty() => {
                Err(Error::Config("baseline dataset is empty".into()))
            }
            BaselineDistribution::GaussianNoise { sigma } if !(*sigma >= 0.0) => {
                Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")))
            }
            _ => Ok(()),
        }
    }
}

impl Serialize for BaselineDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let desc = match self {
            BaselineDistribution::Constant(v) => format!("constant({v})"),
            BaselineDistribution::Fixed(t) => format!("fixed({:?})", t.shape()),
            BaselineDistribution::Dataset(set) => format!("dataset({} references)", set.len()),
            BaselineDistribution::GaussianNoise { sigma } => format!("gaussian_noise({sigma})"),
            BaselineDistribution::Blur { radius } => format!("blur({radius})"),
        };
        s.serialize_str(&desc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KernelKind {
    /// No smoothing.
    Identity,
    Gaussian { sigma: f32 },
    /// `U(low, high)` per feature.
    Uniform { low: f32, high: f32 },
    /// `U(-f * range_c, f * range_c)` where `range_c` is the value range of
    /// channel `c` of the input being explained.
    RelativeUniform { fraction: f32 },
}

/// Smoothing distribution `mu_eta` for the evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingKernel {
    pub kind: KernelKind,
    /// Noise draws averaged per evaluation point.
    pub sample_count: usize,
}

impl SmoothingKernel {
    pub const IDENTITY: SmoothingKernel = SmoothingKernel {
        kind: KernelKind::Identity,
        sample_count: 1,
    };

    pub fn gaussian(sigma: f32) -> Self {
        Self {
            kind: KernelKind::Gaussian { sigma },
            sample_count: 1,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.kind == KernelKind::Identity
    }

    /// One noise draw shaped like `x`; `None` for the identity kernel.
    pub fn draw(&self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<Option<Tensor>> {
        Ok(match self.kind {
            KernelKind::Identity => None,
            KernelKind::Gaussian { sigma } => Some(gaussian_like(x.shape(), sigma, rng)?),
            KernelKind::Uniform { low, high } => {
                if !(low < high) {
                    return Err(Error::Config(format!("uniform kernel needs low < high, got [{low}, {high})")));
                }
                Some(Tensor::from_vec(x.shape(), (0..x.len()).map(|_| rng.random_range(low..high)).collect())?)
            }
            KernelKind::RelativeUniform { fraction } => {
                let c = x.shape()[0];
                let plane = x.len() / c;
                let mut data = Vec::with_capacity(x.len());
                for ch in 0..c {
                    let p = &x.data()[ch * plane..][..plane];
                    let lo = p.iter().copied().fold(f32::INFINITY, f32::min);
                    let hi = p.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                    let half = fraction * (hi - lo);
                    for _ in 0..plane {
                        data.push(if half > 0.0 { rng.random_range(-half..half) } else { 0.0 });
                    }
                }
                Some(Tensor::from_vec(x.shape(), data)?)
            }
        })
    }

    /// `point + eta` for one draw.
    pub fn apply(&self, point: &Tensor, reference: &Tensor, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        match self.draw(reference, rng)? {
            Some(eta) => point.add(&eta),
            None => Ok(point.clone()),
        }
    }
}

impl Default for SmoothingKernel {
    fn default() -> Self {
        Self {
            kind: KernelKind::RelativeUniform { fraction: 0.1 },
            sample_count: 1,
        }
    }
}

/// How features move from the baseline to the input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Interpolator {
    /// `(1 - alpha) * x' + alpha * x`.
    Linear,
    /// Each pixel (all channels together) takes its value from `x` with
    /// probability `alpha`, otherwise from `x'`.
    Replacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RiemannRule {
    Left,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AlphaMode {
    /// Sample `s` uses grid point `s mod steps`.
    Riemann { steps: usize, rule: RiemannRule },
    /// `alpha ~ U(0, 1)` per sample.
    Stochastic,
    /// Every sample evaluates at one fixed `alpha` (e.g. 1.0 collapses the
    /// path onto the input).
    Fixed(f32),
}

impl AlphaMode {
    pub fn riemann(steps: usize) -> Self {
        AlphaMode::Riemann {
            steps,
            rule: RiemannRule::Midpoint,
        }
    }
}

/// Quadrature point `i` of `steps`.
pub fn riemann_alpha(i: usize, steps: usize, rule: RiemannRule) -> f32 {
    let offset = match rule {
        RiemannRule::Left => 0.0,
        RiemannRule::Midpoint => 0.5,
    };
    ((i as f64 + offset) / steps as f64) as f32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathSpec {
    pub interpolator: Interpolator,
    pub alpha_mode: AlphaMode,
}

impl PathSpec {
    pub fn linear(alpha_mode: AlphaMode) -> Self {
        Self {
            interpolator: Interpolator::Linear,
            alpha_mode,
        }
    }

    /// Alpha for Monte-Carlo sample `s`.
    pub fn alpha(&self, s: usize, rng: &mut ChaCha8Rng) -> Result<f32> {
        match self.alpha_mode {
            AlphaMode::Riemann { steps, rule } => {
                if steps == 0 {
                    return Err(Error::Config("riemann path needs at least one step".into()));
                }
                Ok(riemann_alpha(s % steps, steps, rule))
            }
            AlphaMode::Stochastic => Ok(rng.random::<f32>()),
            AlphaMode::Fixed(a) => Ok(a),
        }
    }

    /// `gamma(alpha)` between `baseline` (alpha = 0) and `x` (alpha = 1);
    /// both endpoints are reproduced exactly.
    pub fn point(&self, x: &Tensor, baseline: &Tensor, alpha: f32, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        match self.interpolator {
            Interpolator::Linear => interpolate(x, baseline, alpha),
            Interpolator::Replacement => {
                let [c, h, w] = *x.shape() else {
                    return Err(shape_err("replacement path", format!("expected (C,H,W), got {:?}", x.shape())));
                };
                if baseline.shape() != x.shape() {
                    return Err(shape_err("replacement path", "baseline shape differs from input"));
                }
                let keep: Vec<bool> = (0..h * w).map(|_| rng.random::<f32>() < alpha).collect();
                let mut data = baseline.to_vec();
                for ch in 0..c {
                    for (i, &k) in keep.iter().enumerate() {
                        if k {
                            data[ch * h * w + i] = x.data()[ch * h * w + i];
                        }
                    }
                }
                Tensor::from_vec(x.shape(), data)
            }
        }
    }
}

/// `(1 - alpha) * baseline + alpha * x`.
pub fn interpolate(x: &Tensor, baseline: &Tensor, alpha: f32) -> Result<Tensor> {
    baseline.zip_map(x, |b, v| (1.0 - alpha) * b + alpha * v)
}

/// Layer-space factor multiplying the path gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DifferenceScaling {
    /// `A(x) - A(x')` at the target layer.
    LayerActivation,
    /// Factor of one (diagnostic): weights become averaged gradients.
    Disabled,
}

/// Where the smoothing noise enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SmoothingPoint {
    /// Added to each interpolated point before the forward pass.
    Interpolated,
    /// Added to the input itself, so the resulting weights are the
    /// noise-averaged weights of perturbed inputs.
    Input,
}

/// Everything that determines an Expected Grad-CAM run.
///
/// The spatial normaliser of the weights is the number of target-layer
/// locations `s * s`, as in Grad-CAM's global average pooling.
#[derive(Debug, Clone, Serialize)]
pub struct AttributionConfig {
    pub baseline: BaselineDistribution,
    pub kernel: SmoothingKernel,
    pub path: PathSpec,
    /// Monte-Carlo draws of `(x', alpha, eta)`.
    pub n_samples: usize,
    pub seed: u64,
    pub difference: DifferenceScaling,
    pub smoothing_point: SmoothingPoint,
    /// Multiply the weights by `k(x) = y_c(x) / E_eta[y_c(x + eta)]`.
    pub apply_kernel_normalizer: bool,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            baseline: BaselineDistribution::Constant(0.0),
            kernel: SmoothingKernel::default(),
            path: PathSpec::linear(AlphaMode::Stochastic),
            n_samples: 50,
            seed: 0,
            difference: DifferenceScaling::LayerActivation,
            smoothing_point: SmoothingPoint::Interpolated,
            apply_kernel_normalizer: false,
        }
    }
}

impl AttributionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.kernel.sample_count == 0 {
            return Err(Error::Config("kernel sample_count must be at least 1".into()));
        }
        if let AlphaMode::Riemann { steps: 0, .. } = self.path.alpha_mode {
            return Err(Error::Config("riemann path needs at least one step".into()));
        }
        self.baseline.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_path_hits_endpoints_exactly() {
        let x = Tensor::vector(vec![0.3, -1.7, 0.1, 2.9]);
        let b = Tensor::vector(vec![0.1, 0.4, -0.2, 1.0]);
        let path = PathSpec::linear(AlphaMode::Stochastic);
        let mut rng = sample_rng(0, 0);
        assert_eq!(path.point(&x, &b, 0.0, &mut rng).unwrap(), b);
        assert_eq!(path.point(&x, &b, 1.0, &mut rng).unwrap(), x);
    }

    #[test]
    fn identity_kernel_is_noop() {
        let x = Tensor::vector(vec![1.0, 2.0]);
        let k = SmoothingKernel {
            kind: KernelKind::Identity,
            sample_count: 5,
        };
        let mut rng = sample_rng(1, 2);
        assert_eq!(k.apply(&x, &x, &mut rng).unwrap(), x);
    }

    #[test]
    fn relative_uniform_scales_with_channel_range() {
        let x = Tensor::from_vec(&[2, 1, 4], vec![0.0, 1.0, 0.5, 0.5, 0.2, 0.2, 0.2, 0.2]).unwrap();
        let k = SmoothingKernel::default();
        let eta = k.draw(&x, &mut sample_rng(3, 0)).unwrap().unwrap();
        assert!(eta.data()[..4].iter().all(|v| v.abs() <= 0.1));
        // constant channel gets no noise
        assert!(eta.data()[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dataset_baseline_draws_members() {
        let refs = vec![Tensor::full(&[2], 1.0), Tensor::full(&[2], 2.0)];
        let d = BaselineDistribution::dataset(refs.clone());
        let mut rng = sample_rng(0, 0);
        for _ in 0..20 {
            let s = d.sample(&Tensor::zeros(&[2]), &mut rng).unwrap();
            assert!(refs.contains(&s));
        }
        let empty = BaselineDistribution::dataset(vec![]);
        assert!(empty.sample(&Tensor::zeros(&[2]), &mut rng).is_err());
    }

    #[test]
    fn streams_are_independent_of_order() {
        let a: f32 = sample_rng(5, 3).random();
        let _: f32 = sample_rng(5, 1).random();
        let b: f32 = sample_rng(5, 3).random();
        assert_eq!(a, b);
        let c: f32 = sample_rng(5, 4).random();
        assert_ne!(a, c);
    }

    #[test]
    fn riemann_midpoints() {
        assert_eq!(riemann_alpha(0, 4, RiemannRule::Midpoint), 0.125);
        assert_eq!(riemann_alpha(3, 4, RiemannRule::Left), 0.75);
    }
}
