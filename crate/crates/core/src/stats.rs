use serde::{Deserialize, Serialize};

/// Order-independent summary of a residual sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
    pub q95: f64,
    pub count: usize,
}

impl ResidualStats {
    /// NaN residuals count as infinite so they can never pass a tolerance.
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { max: 0.0, mean: 0.0, q95: 0.0, count: 0 };
        }
        let mut v: Vec<f64> = values.iter().map(|x| if x.is_nan() { f64::INFINITY } else { *x }).collect();
        v.sort_by(f64::total_cmp);
        let max = *v.last().unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let idx = ((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
        Self { max, mean, q95: v[idx], count: v.len() }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max < tol
    }
}
