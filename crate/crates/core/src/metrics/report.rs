use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// Per-sample values of one metric plus their aggregate and the config
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub config: Value,
    pub per_sample: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub seed: u64,
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Mean and population standard deviation; `(0, 0)` for no values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = compensated_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    (mean, (compensated_sum(&dev) / n).sqrt())
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, config: Value, per_sample: Vec<f64>, seed: u64) -> Self {
        let (mean, std) = mean_std(&per_sample);
        Self {
            metric: metric.into(),
            config,
            per_sample,
            mean,
            std,
            seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `metric,sample,value` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,sample,value\n");
        self.append_csv_rows(&mut out);
        out
    }

    pub(crate) fn append_csv_rows(&self, out: &mut String) {
        for (i, v) in self.per_sample.iter().enumerate() {
            out.push_str(&format!("{},{i},{v}\n", self.metric));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_recomputable() {
        let r = MetricReport::new("m", Value::Null, vec![1.0, 2.0, 3.0, 4.0], 3);
        assert_eq!(r.mean, 2.5);
        assert!((r.std - 1.25f64.sqrt()).abs() < 1e-15);
        let back: MetricReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(&v), 1.0);
    }

    #[test]
    fn csv_rows() {
        let r = MetricReport::new("gini", Value::Null, vec![0.5, 0.25], 0);
        assert_eq!(r.to_csv(), "metric,sample,value\ngini,0,0.5\ngini,1,0.25\n");
    }
}
