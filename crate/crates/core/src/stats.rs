//! Monte-Carlo error summaries.

use serde::{Deserialize, Serialize};

/// Root-mean-square of a set of errors with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseSummary {
    pub rmse: f64,
    /// Delta-method standard error: `sd(e²) / (2 · rmse · √n)`.
    pub se: f64,
    pub count: usize,
}

impl RmseSummary {
    /// `None` for an empty sample. Summation runs in input order so the
    /// result is bit-reproducible.
    pub fn from_errors(errors: &[f64]) -> Option<Self> {
        let n = errors.len();
        if n == 0 {
            return None;
        }
        let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
        let mean = sq.iter().sum::<f64>() / n as f64;
        let rmse = mean.sqrt();
        let se = if n < 2 || rmse == 0.0 {
            0.0
        } else {
            let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt() / (n as f64).sqrt() / (2.0 * rmse)
        };
        Some(Self { rmse, se, count: n })
    }
}
