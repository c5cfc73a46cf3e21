//! Gradient, path-integral and class-activation attributions.

mod cam;
mod config;
mod explain;
mod gradients;
mod saliency;

pub use cam::{
    expected_gradcam, gap_weights, generalized_cam_score, grad_cam, grad_cam_from_trace, integrated_gradcam,
    ExpectedGradCam, PerturbationSet,
};
pub use config::{
    interpolate, riemann_alpha, sample_rng, AlphaMode, AttributionConfig, BaselineDistribution, DifferenceScaling,
    Interpolator, KernelKind, PathSpec, RiemannRule, SmoothingKernel, SmoothingPoint,
};
pub use explain::{channel_abs_sum, explain, ExplainOptions, Method};
pub use gradients::{
    completeness_residual, integrated_gradients, path_integral, smoothgrad, smoothgrad_as_path, smoothgrad_noise,
    vanilla_gradients,
};
pub use saliency::{normalize_saliency, upsample, weighted_map, CoarseSaliency, Upsample};
