use serde::Serialize;

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityScore {
    pub value: f64,
    /// The map was all zeros; `value` is then defined as 0.
    pub degenerate: bool,
}

fn abs_values(saliency: &Tensor) -> (Vec<f64>, f64) {
    let a: Vec<f64> = saliency.data().iter().map(|v| v.abs() as f64).collect();
    let total = a.iter().sum();
    (a, total)
}

/// Shannon entropy (natural log) of the l1-normalised absolute map.
pub fn complexity_entropy(saliency: &Tensor) -> ComplexityScore {
    let (a, total) = abs_values(saliency);
    if total == 0.0 {
        return ComplexityScore {
            value: 0.0,
            degenerate: true,
        };
    }
    let value = a
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.ln()
        })
        .sum();
    ComplexityScore {
        value,
        degenerate: false,
    }
}

/// Gini index of the absolute values, in `[0, 1)`.
pub fn sparseness_gini(saliency: &Tensor) -> ComplexityScore {
    let (mut a, total) = abs_values(saliency);
    if total == 0.0 {
        return ComplexityScore {
            value: 0.0,
            degenerate: true,
        };
    }
    a.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    let weighted: f64 = a
        .iter()
        .enumerate()
        .map(|(i, &v)| v / total * ((n - (i + 1) as f64 + 0.5) / n))
        .sum();
    ComplexityScore {
        value: 1.0 - 2.0 * weighted,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: Vec<f32>) -> Tensor {
        let n = v.len();
        Tensor::from_vec(&[n], v).unwrap()
    }

    #[test]
    fn uniform_map() {
        let m = Tensor::full(&[4, 4], 0.3);
        assert!((complexity_entropy(&m).value - 16f64.ln()).abs() < 1e-12);
        assert!(sparseness_gini(&m).value.abs() < 1e-12);
    }

    #[test]
    fn one_hot_map() {
        let mut v = vec![0.0; 10];
        v[3] = 2.0;
        assert_eq!(complexity_entropy(&t(v.clone())).value, 0.0);
        assert!((sparseness_gini(&t(v)).value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn two_point_uniform() {
        assert!((complexity_entropy(&t(vec![0.5, 0.5, 0.0, 0.0])).value - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn all_zero_is_flagged() {
        let z = Tensor::zeros(&[3, 3]);
        assert!(complexity_entropy(&z).degenerate && sparseness_gini(&z).degenerate);
        assert_eq!(complexity_entropy(&z).value, 0.0);
    }
}
