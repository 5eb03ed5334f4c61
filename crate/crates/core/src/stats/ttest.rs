//! Paired t test on the differences.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{mean, sample_sd, PairedSample, StatsError, TestDetails, TestReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TDetails {
    pub df: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub sd_x: f64,
    pub sd_y: f64,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub se_diff: f64,
    /// Pr(T > t).
    pub upper_p: f64,
}

pub fn paired_t_test(s: &PairedSample) -> Result<TestReport, StatsError> {
    let n = s.len();
    if n < 2 {
        return Err(StatsError::TooSmall(2));
    }
    let d = s.differences();
    let mean_diff = mean(&d);
    let sd_diff = sample_sd(&d);
    // Differences equal up to rounding noise count as constant.
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if !(sd_diff > 1e-12 * scale) {
        return Err(StatsError::Degenerate("differences have zero variance"));
    }
    let se_diff = sd_diff / (n as f64).sqrt();
    let t = mean_diff / se_diff;
    let df = (n - 1) as f64;
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    let lower = dist.cdf(t);
    let upper = dist.sf(t);
    Ok(TestReport {
        label_x: s.label_x.clone(),
        label_y: s.label_y.clone(),
        n,
        statistic: t,
        one_sided_p: lower,
        two_sided_p: (2.0 * lower.min(upper)).min(1.0),
        details: TestDetails::PairedT(TDetails {
            df,
            mean_x: mean(&s.x),
            mean_y: mean(&s.y),
            sd_x: sample_sd(&s.x),
            sd_y: sample_sd(&s.y),
            mean_diff,
            sd_diff,
            se_diff,
            upper_p: upper,
        }),
    })
}
