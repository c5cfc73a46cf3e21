use serde::Serialize;

use super::protocol::{ranking, Order};
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Localization {
    pub top_k_intersection: f64,
    pub rank_accuracy: f64,
    pub mass_accuracy: f64,
}

/// Mask-based localization scores; `mask` is nonzero inside the object.
pub fn localization(saliency: &Tensor, mask: &Tensor, k: usize) -> Result<Localization> {
    if saliency.shape() != mask.shape() {
        return Err(shape_err(
            "localization",
            format!("saliency {:?} vs mask {:?}", saliency.shape(), mask.shape()),
        ));
    }
    let inside: Vec<bool> = mask.data().iter().map(|&v| v != 0.0).collect();
    let mask_size = inside.iter().filter(|&&b| b).count();
    if mask_size == 0 {
        return Err(Error::Config("localization mask is empty".into()));
    }
    if k == 0 || k > inside.len() {
        return Err(Error::Config(format!("k = {k} outside 1..={}", inside.len())));
    }
    let order = ranking(saliency, Order::MostRelevantFirst);
    let hits = |n: usize| order[..n].iter().filter(|&&i| inside[i]).count() as f64;
    let total: f64 = saliency.data().iter().map(|&v| v as f64).sum();
    let within: f64 = saliency
        .data()
        .iter()
        .zip(&inside)
        .filter(|(_, &b)| b)
        .map(|(&v, _)| v as f64)
        .sum();
    Ok(Localization {
        top_k_intersection: hits(k) / k as f64,
        rank_accuracy: hits(mask_size) / mask_size as f64,
        mass_accuracy: if total > 0.0 { within / total } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn left_half() -> Tensor {
        Tensor::from_vec(&[4, 4], (0..16).map(|i| if i % 4 < 2 { 1.0 } else { 0.0 }).collect()).unwrap()
    }

    #[test]
    fn saliency_equal_to_mask() {
        let m = left_half();
        let l = localization(&m, &m, 8).unwrap();
        assert_eq!((l.top_k_intersection, l.rank_accuracy, l.mass_accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn uniform_saliency_mass() {
        let l = localization(&Tensor::full(&[4, 4], 0.2), &left_half(), 4).unwrap();
        assert!((l.mass_accuracy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn eighty_percent_left() {
        let s = Tensor::from_vec(&[4, 4], (0..16).map(|i| if i % 4 < 2 { 0.1 } else { 0.025 }).collect()).unwrap();
        let l = localization(&s, &left_half(), 8).unwrap();
        assert!((l.mass_accuracy - 0.8).abs() < 1e-6);
        assert_eq!(l.rank_accuracy, 1.0);
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(localization(&Tensor::zeros(&[2, 2]), &Tensor::zeros(&[2, 2]), 1).is_err());
    }
}
