use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attribution::sample_rng;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SensitivityMode {
    Max,
    Avg,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sensitivity {
    pub max: f64,
    pub avg: f64,
    /// `||Phi(x)|| = 0`; both statistics are then reported as 0.
    pub degenerate: bool,
    /// Relative change per draw.
    pub per_draw: Vec<f64>,
}

impl Sensitivity {
    pub fn value(&self, mode: SensitivityMode) -> f64 {
        match mode {
            SensitivityMode::Max => self.max,
            SensitivityMode::Avg => self.avg,
        }
    }
}

/// `||Phi(x + u) - Phi(x)|| / ||Phi(x)||` over `n_draws` uniform `u` with
/// `||u||_inf <= radius`; returns both the max and the mean.
pub fn sensitivity<F>(x: &Tensor, explainer: F, radius: f32, n_draws: usize, seed: u64) -> Result<Sensitivity>
where
    F: Fn(&Tensor) -> Result<Tensor> + Sync,
{
    if !(radius > 0.0) {
        return Err(Error::Config(format!("sensitivity radius must be > 0, got {radius}")));
    }
    if n_draws == 0 {
        return Err(Error::Config("sensitivity needs at least one draw".into()));
    }
    let base = explainer(x).map_err(|e| Error::Explainer {
        draw: 0,
        source: Box::new(e),
    })?;
    let denom = base.norm();
    if denom == 0.0 {
        return Ok(Sensitivity {
            max: 0.0,
            avg: 0.0,
            degenerate: true,
            per_draw: vec![0.0; n_draws],
        });
    }
    let per_draw = (0..n_draws)
        .into_par_iter()
        .map(|d| {
            let mut rng = sample_rng(seed, d as u64);
            let noise: Vec<f32> = (0..x.len()).map(|_| rng.random_range(-radius..=radius)).collect();
            let perturbed = x.add(&Tensor::from_vec(x.shape(), noise)?)?;
            let wrap = |e| Error::Explainer {
                draw: d,
                source: Box::new(e),
            };
            let phi = explainer(&perturbed).map_err(wrap)?;
            Ok(phi.sub(&base).map_err(wrap)?.norm() / denom)
        })
        .collect::<Result<Vec<_>>>()?;
    let max = per_draw.iter().copied().fold(0.0, f64::max);
    let avg = per_draw.iter().sum::<f64>() / n_draws as f64;
    Ok(Sensitivity {
        max,
        avg,
        degenerate: false,
        per_draw,
    })
}
