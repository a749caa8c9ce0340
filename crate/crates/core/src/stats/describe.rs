use serde::{Deserialize, Serialize};

/// Quantile of already sorted data, interpolating linearly between order
/// statistics. `q` is clamped to `[0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Column summary in the layout of a descriptive statistics table:
/// mean, sample standard deviation, min, quartiles, max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

impl Summary {
    pub const ROW_LABELS: [&'static str; 7] = ["mean", "std", "min", "25%", "50%", "75%", "max"];

    /// Returns `None` for empty input. NaNs are ignored.
    pub fn of(values: &[f64]) -> Option<Summary> {
        let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
        if sorted.is_empty() {
            return None;
        }
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = sorted.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            count: n,
            mean,
            std,
            min: sorted[0],
            q25: quantile(&sorted, 0.25)?,
            q50: quantile(&sorted, 0.5)?,
            q75: quantile(&sorted, 0.75)?,
            max: sorted[n - 1],
        })
    }

    /// Values in [`Summary::ROW_LABELS`] order.
    pub fn rows(&self) -> [f64; 7] {
        [self.mean, self.std, self.min, self.q25, self.q50, self.q75, self.max]
    }
}
