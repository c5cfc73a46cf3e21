use serde::Serialize;

use crate::data::image::{resize_bilinear, resize_nearest};
use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

/// A rectified class activation map at target-layer resolution.
#[derive(Debug, Clone, Serialize)]
pub struct CoarseSaliency {
    /// `(s, s)`, every value >= 0.
    pub map: Tensor,
    /// Per-unit weights `w_k` that produced the map.
    pub weights: Vec<f32>,
    pub target_layer: String,
    pub class_index: usize,
    /// Input `(H, W)` that [`upsample`] maps back to.
    pub input_hw: (usize, usize),
}

impl CoarseSaliency {
    pub fn upsample(&self, method: Upsample) -> Result<Tensor> {
        upsample(self, method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Upsample {
    Bilinear,
    Nearest,
}

/// Maps the coarse map back to input resolution.
pub fn upsample(saliency: &CoarseSaliency, method: Upsample) -> Result<Tensor> {
    let (h, w) = saliency.input_hw;
    match method {
        Upsample::Bilinear => resize_bilinear(&saliency.map, h, w),
        Upsample::Nearest => resize_nearest(&saliency.map, h, w),
    }
}

/// `relu(sum_k w_k A_k)` accumulated in `f64`.
pub fn weighted_map(weights: &[f64], activations: &Tensor) -> Result<Tensor> {
    let [k, h, w] = *activations.shape() else {
        return Err(shape_err("cam", format!("activations must be (K,s,s), got {:?}", activations.shape())));
    };
    if weights.len() != k {
        return Err(shape_err("cam", format!("{} weights for {k} units", weights.len())));
    }
    let plane = h * w;
    let mut acc = vec![0.0f64; plane];
    for (unit, &wk) in weights.iter().enumerate() {
        for (a, &v) in acc.iter_mut().zip(&activations.data()[unit * plane..][..plane]) {
            *a += wk * v as f64;
        }
    }
    Tensor::from_vec(&[h, w], acc.into_iter().map(|v| v.max(0.0) as f32).collect())
}

/// Min-max scaling to `[0, 1]`; a constant map becomes all zeros.
pub fn normalize_saliency(map: &Tensor) -> Tensor {
    let lo = map.min();
    let hi = map.max();
    if !(hi > lo) {
        return Tensor::zeros(map.shape());
    }
    let range = hi as f64 - lo as f64;
    map.map(|v| ((v as f64 - lo as f64) / range) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse(map: Tensor, hw: (usize, usize)) -> CoarseSaliency {
        CoarseSaliency {
            map,
            weights: vec![],
            target_layer: "t".into(),
            class_index: 0,
            input_hw: hw,
        }
    }

    #[test]
    fn constant_map_upsamples_to_constant() {
        let s = coarse(Tensor::full(&[3, 3], 0.7), (12, 9));
        for m in [Upsample::Bilinear, Upsample::Nearest] {
            let up = s.upsample(m).unwrap();
            assert_eq!(up.shape(), &[12, 9]);
            assert!(up.data().iter().all(|&v| (v - 0.7).abs() < 1e-7));
        }
    }

    #[test]
    fn single_cell_fills_everything() {
        let s = coarse(Tensor::full(&[1, 1], 2.5), (5, 5));
        assert!(s.upsample(Upsample::Bilinear).unwrap().data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn nearest_block_replication() {
        let s = coarse(Tensor::from_vec(&[2, 2], vec![0.0, 1.0, 0.0, 0.0]).unwrap(), (4, 4));
        let up = s.upsample(Upsample::Nearest).unwrap();
        let want = [0., 0., 1., 1., 0., 0., 1., 1., 0., 0., 0., 0., 0., 0., 0., 0.];
        assert_eq!(up.data(), &want);
    }

    #[test]
    fn normalize_cases() {
        let m = Tensor::from_vec(&[2, 2], vec![2.0, 4.0, 2.0, 2.0]).unwrap();
        assert_eq!(normalize_saliency(&m).data(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(normalize_saliency(&Tensor::full(&[2, 2], 3.0)).data(), &[0.0; 4]);
        let unit = Tensor::from_vec(&[2, 2], vec![0.0, 0.25, 1.0, 0.5]).unwrap();
        assert_eq!(normalize_saliency(&unit), unit);
    }

    #[test]
    fn weighted_map_rectifies() {
        let a = Tensor::from_vec(&[2, 2, 2], vec![1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        let m = weighted_map(&[0.5, -1.0], &a).unwrap();
        assert_eq!(m.data(), &[0.5, 0.0, 0.0, 0.0]);
    }
}
