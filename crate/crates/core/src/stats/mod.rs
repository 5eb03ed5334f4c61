//! Paired-sample hypothesis tests.
//!
//! Every one-sided p-value is for the alternative that `x` tends to be
//! smaller than `y`.

mod sign;
mod ttest;
mod wilcoxon;

pub use sign::{binomial_upper_tail, sign_test, SignDetails};
pub use ttest::{paired_t_test, TDetails};
pub use wilcoxon::{wilcoxon_exact, wilcoxon_signed_rank, ExactWilcoxon, WilcoxonDetails, EXACT_MAX_N};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample needs at least {0} pairs")]
    TooSmall(usize),
    #[error("non-finite value at pair {0}")]
    NonFinite(usize),
    #[error("degenerate sample: {0}")]
    Degenerate(&'static str),
}

/// Two aligned samples, one pair per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub label_x: String,
    pub label_y: String,
}

impl PairedSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, StatsError> {
        Self::labeled(x, y, "x", "y")
    }

    pub fn labeled(x: Vec<f64>, y: Vec<f64>, label_x: &str, label_y: &str) -> Result<Self, StatsError> {
        if x.len() != y.len() {
            return Err(StatsError::LengthMismatch(x.len(), y.len()));
        }
        if x.is_empty() {
            return Err(StatsError::TooSmall(1));
        }
        if let Some(i) = x.iter().zip(&y).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(StatsError::NonFinite(i));
        }
        Ok(PairedSample { x, y, label_x: label_x.into(), label_y: label_y.into() })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `x - y` per pair.
    pub fn differences(&self) -> Vec<f64> {
        self.x.iter().zip(&self.y).map(|(a, b)| a - b).collect()
    }

    pub fn swapped(&self) -> PairedSample {
        PairedSample {
            x: self.y.clone(),
            y: self.x.clone(),
            label_x: self.label_y.clone(),
            label_y: self.label_x.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Wilcoxon,
    Sign,
    PairedT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum TestDetails {
    Wilcoxon(WilcoxonDetails),
    Sign(SignDetails),
    PairedT(TDetails),
}

/// Statistic, p-values and the intermediate quantities of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub label_x: String,
    pub label_y: String,
    pub n: usize,
    /// z for Wilcoxon, number of negative differences for the sign test,
    /// t for the paired t test.
    pub statistic: f64,
    /// Alternative: `x` smaller than `y`.
    pub one_sided_p: f64,
    pub two_sided_p: f64,
    pub details: TestDetails,
}

impl TestReport {
    pub fn kind(&self) -> TestKind {
        match self.details {
            TestDetails::Wilcoxon(_) => TestKind::Wilcoxon,
            TestDetails::Sign(_) => TestKind::Sign,
            TestDetails::PairedT(_) => TestKind::PairedT,
        }
    }

    pub fn wilcoxon(&self) -> Option<&WilcoxonDetails> {
        match &self.details {
            TestDetails::Wilcoxon(d) => Some(d),
            _ => None,
        }
    }

    pub fn sign(&self) -> Option<&SignDetails> {
        match &self.details {
            TestDetails::Sign(d) => Some(d),
            _ => None,
        }
    }

    pub fn t(&self) -> Option<&TDetails> {
        match &self.details {
            TestDetails::PairedT(d) => Some(d),
            _ => None,
        }
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn sample_mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        mean(v)
    }
}

/// Average ranks (1-based) of `values`; ties share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}
