//! Statistics used by the corpus reports.

mod anova;
mod describe;
mod kde;
pub mod special;

pub use anova::{anova_oneway, AnovaError, AnovaResult};
pub use describe::{quantile, Summary};
pub use kde::{kde2d, KdeError, KdeGrid, BANDWIDTH_FLOOR, DEFAULT_RESOLUTION};
