use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::cam::{expected_gradcam, grad_cam};
use super::config::AttributionConfig;
use super::gradients::{integrated_gradients, smoothgrad};
use super::saliency::Upsample;
use crate::error::{shape_err, Error, Result};
use crate::model::ModelGraph;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    GradCam,
    IntegratedGradients,
    SmoothGrad,
    ExpectedGradCam,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::GradCam,
        Method::IntegratedGradients,
        Method::SmoothGrad,
        Method::ExpectedGradCam,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::GradCam => "gradcam",
            Method::IntegratedGradients => "ig",
            Method::SmoothGrad => "smoothgrad",
            Method::ExpectedGradCam => "egcam",
        }
    }

    pub fn is_cam(self) -> bool {
        matches!(self, Method::GradCam | Method::ExpectedGradCam)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = Method::ALL.iter().map(|m| m.id()).collect();
                Error::Config(format!("unknown method `{s}` (valid: {})", valid.join(", ")))
            })
    }
}

/// Knobs shared by [`explain`] across methods.
#[derive(Debug, Clone, Serialize)]
pub struct ExplainOptions {
    /// `None` selects the model's default target layer.
    pub target_layer: Option<String>,
    /// Riemann steps for Integrated Gradients (zero baseline).
    pub ig_steps: usize,
    pub smoothgrad_sigma: f32,
    /// Expected Grad-CAM configuration; its `n_samples` and `seed` also
    /// drive SmoothGrad.
    pub config: AttributionConfig,
    pub upsample: Upsample,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        Self {
            target_layer: None,
            ig_steps: 32,
            smoothgrad_sigma: 0.15,
            config: AttributionConfig::default(),
            upsample: Upsample::Bilinear,
        }
    }
}

/// Non-negative `(H, W)` saliency at input resolution. CAM maps are
/// upsampled; input-space maps sum absolute values over channels.
pub fn explain(method: Method, model: &ModelGraph, x: &Tensor, class_index: usize, opts: &ExplainOptions) -> Result<Tensor> {
    let layer = || model.resolve_target(opts.target_layer.as_deref());
    match method {
        Method::GradCam => grad_cam(model, x, class_index, &layer()?)?.upsample(opts.upsample),
        Method::ExpectedGradCam => {
            expected_gradcam(model, x, class_index, &layer()?, &opts.config)?.saliency.upsample(opts.upsample)
        }
        Method::IntegratedGradients => {
            let ig = integrated_gradients(model, x, &Tensor::zeros(x.shape()), class_index, opts.ig_steps)?;
            channel_abs_sum(&ig)
        }
        Method::SmoothGrad => {
            let sg = smoothgrad(
                model,
                x,
                class_index,
                opts.smoothgrad_sigma,
                opts.config.n_samples,
                opts.config.seed,
            )?;
            channel_abs_sum(&sg)
        }
    }
}

/// `sum_c |t_c|` for a `(C, H, W)` tensor.
pub fn channel_abs_sum(t: &Tensor) -> Result<Tensor> {
    let [c, h, w] = *t.shape() else {
        return Err(shape_err("channel_abs_sum", format!("expected (C,H,W), got {:?}", t.shape())));
    };
    let plane = h * w;
    let data = (0..plane)
        .map(|i| (0..c).map(|ch| t.data()[ch * plane + i].abs() as f64).sum::<f64>() as f32)
        .collect();
    Tensor::from_vec(&[h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_ids_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
        }
        let err = "lime".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("gradcam") && err.contains("egcam"));
    }

    #[test]
    fn abs_sum_over_channels() {
        let t = Tensor::from_vec(&[2, 1, 2], vec![1.0, -2.0, -3.0, 0.5]).unwrap();
        assert_eq!(channel_abs_sum(&t).unwrap().data(), &[4.0, 2.5]);
    }
}
