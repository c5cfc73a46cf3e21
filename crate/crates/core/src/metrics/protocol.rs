use serde::Serialize;

use crate::data::image::gaussian_blur;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Order {
    MostRelevantFirst,
    LeastRelevantFirst,
}

/// Value a removed pixel takes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Replacement {
    /// Per-channel mean, usually of the training set.
    Mean(Vec<f32>),
    Zero,
    Blur { radius: f32 },
}

impl Replacement {
    /// The fully-replaced image for `x`.
    pub fn reference(&self, x: &Tensor) -> Result<Tensor> {
        let [c, h, w] = *x.shape() else {
            return Err(shape_err("replacement", format!("expected (C,H,W), got {:?}", x.shape())));
        };
        match self {
            Replacement::Zero => Ok(Tensor::zeros(x.shape())),
            Replacement::Blur { radius } => gaussian_blur(x, *radius),
            Replacement::Mean(mean) => {
                if mean.len() != c {
                    return Err(shape_err("replacement", format!("{} channel means for {c} channels", mean.len())));
                }
                Tensor::from_vec(x.shape(), mean.iter().flat_map(|&m| std::iter::repeat_n(m, h * w)).collect())
            }
        }
    }
}

/// How the faithfulness metrics perturb an image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationProtocol {
    pub order: Order,
    pub replacement: Replacement,
    /// Share of pixels changed per curve step, in `(0, 1]`.
    pub step_fraction: f64,
    /// Side of the square infidelity patches; border patches are clipped.
    pub patch_size: usize,
    /// Blur radius of the insertion start image.
    pub insertion_blur: f32,
}

impl PerturbationProtocol {
    /// Defaults for an `h x w` image: most-relevant-first, mean-pixel
    /// replacement, 1/32 of the pixels per step, patches of side/7 and an
    /// insertion blur of side/10.
    pub fn for_image(h: usize, w: usize, channel_mean: Vec<f32>) -> Self {
        let side = h.min(w) as f64;
        Self {
            order: Order::MostRelevantFirst,
            replacement: Replacement::Mean(channel_mean),
            step_fraction: 1.0 / 32.0,
            patch_size: ((side / 7.0).round() as usize).max(1),
            insertion_blur: (side / 10.0) as f32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_fraction > 0.0 && self.step_fraction <= 1.0) {
            return Err(Error::Config(format!("step_fraction must be in (0, 1], got {}", self.step_fraction)));
        }
        if self.patch_size == 0 {
            return Err(Error::Config("patch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Pixels changed per step for `pixels` pixels.
    pub fn step(&self, pixels: usize) -> usize {
        ((self.step_fraction * pixels as f64).round() as usize).max(1)
    }
}

/// Pixel indices ordered by saliency; ties keep row-major order.
pub fn ranking(saliency: &Tensor, order: Order) -> Vec<usize> {
    let d = saliency.data();
    let mut idx: Vec<usize> = (0..d.len()).collect();
    match order {
        Order::MostRelevantFirst => idx.sort_by(|&a, &b| d[b].total_cmp(&d[a])),
        Order::LeastRelevantFirst => idx.sort_by(|&a, &b| d[a].total_cmp(&d[b])),
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_row_major() {
        let s = Tensor::from_vec(&[2, 2], vec![0.5, 1.0, 0.5, 1.0]).unwrap();
        assert_eq!(ranking(&s, Order::MostRelevantFirst), vec![1, 3, 0, 2]);
        assert_eq!(ranking(&s, Order::LeastRelevantFirst), vec![0, 2, 1, 3]);
        assert_eq!(ranking(&Tensor::zeros(&[2, 2]), Order::MostRelevantFirst), vec![0, 1, 2, 3]);
    }

    #[test]
    fn mean_reference_fills_channels() {
        let x = Tensor::zeros(&[2, 1, 2]);
        let r = Replacement::Mean(vec![0.25, 0.75]).reference(&x).unwrap();
        assert_eq!(r.data(), &[0.25, 0.25, 0.75, 0.75]);
        assert!(Replacement::Mean(vec![0.1]).reference(&x).is_err());
    }

    #[test]
    fn defaults_scale_with_side() {
        let p = PerturbationProtocol::for_image(224, 224, vec![0.0; 3]);
        assert_eq!(p.patch_size, 32);
        assert_eq!(p.step(1024), 32);
        assert_eq!(p.step(1), 1);
        let bad = PerturbationProtocol { step_fraction: 0.0, ..p };
        assert!(bad.validate().is_err());
    }
}
