use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::special::f_survival;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnovaError {
    #[error("one-way ANOVA needs at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {group} has {len} values, at least 2 are required")]
    GroupTooSmall { group: usize, len: usize },
    #[error("within-group variance is zero; F is undefined")]
    UndefinedF,
    #[error("non-finite value in group {0}")]
    NonFinite(usize),
}

/// One-way ANOVA outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub groups: Vec<String>,
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

/// F-test for a difference in means across `groups`. Labels are carried
/// through into the result unchanged.
pub fn anova_oneway(labels: &[String], groups: &[Vec<f64>]) -> Result<AnovaResult, AnovaError> {
    let k = groups.len();
    if k < 2 {
        return Err(AnovaError::TooFewGroups(k));
    }
    for (group, values) in groups.iter().enumerate() {
        if values.len() < 2 {
            return Err(AnovaError::GroupTooSmall {
                group,
                len: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AnovaError::NonFinite(group));
        }
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand_mean = groups.iter().flatten().sum::<f64>() / n as f64;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for values in groups {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        ss_between += values.len() as f64 * (mean - grand_mean).powi(2);
        ss_within += values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    // relative to the data scale so rounding noise on identical values
    // doesn't produce a spurious F
    let scale = groups
        .iter()
        .flatten()
        .map(|v| v * v)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    if ss_within <= scale * 1e-24 {
        return Err(AnovaError::UndefinedF);
    }

    let df_between = k - 1;
    let df_within = n - k;
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    let p_value = f_survival(f, df_between as f64, df_within as f64).clamp(0.0, 1.0);
    let mut labels: Vec<String> = labels.to_vec();
    labels.resize_with(k, String::new);
    Ok(AnovaResult {
        groups: labels,
        f,
        df_between,
        df_within,
        p_value,
    })
}
