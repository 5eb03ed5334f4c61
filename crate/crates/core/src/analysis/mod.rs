//! Cohort-level analysis: midpoint CRRAs, attitude shares, the paired task
//! comparisons, certainty equivalents and figure data.

mod ce;
mod dist;

pub use ce::{ce_rp_from_cvu, ce_rp_summary, rp_comparison, CeRp, CeRpSummary};
pub use dist::{
    epanechnikov_kde, export_distributions, quantile, silverman_bandwidth, trapezoid, DistributionExport,
    DistributionSource, Histogram, KdeCurve, ScatterPanel, KDE_POINTS,
};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

use crate::dataset::{Cohort, SubjectRecord, TASK_KINDS};
use crate::interval::{interval_from_response, BroadAttitude, CrraInterval, IntervalError, ATTITUDE_CUTOFFS};
use crate::menu::{CalibrationError, DesignKind};
use crate::stats::{
    paired_t_test, sample_mean, sample_sd, sign_test, wilcoxon_signed_rank, PairedSample, StatsError, TestReport,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("expected a CvU menu, got {0}")]
    NotCvu(DesignKind),
    #[error("CvU menu must have ten rows with a lottery in every row")]
    MalformedCvu,
    #[error("response {0} outside 0..=10")]
    ResponseRange(u8),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Utility(#[from] crate::utility::UtilityError),
}

/// Point value assigned to an interval: the arithmetic midpoint inside,
/// fixed values for the two open-ended intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidpointRule {
    pub first_interval_value: f64,
    pub last_interval_value: f64,
}

impl Default for MidpointRule {
    fn default() -> Self {
        MidpointRule { first_interval_value: ATTITUDE_CUTOFFS[0], last_interval_value: ATTITUDE_CUTOFFS[7] }
    }
}

impl MidpointRule {
    pub fn apply(&self, iv: &CrraInterval) -> f64 {
        match (iv.lo, iv.hi) {
            (Some(lo), Some(hi)) => 0.5 * (lo + hi),
            (None, _) => self.first_interval_value,
            (Some(_), None) => self.last_interval_value,
        }
    }
}

/// The three within-subject task pairs, as (payoff task, price task).
pub const TASK_PAIRS: [(usize, usize); 3] = [(1, 6), (2, 5), (3, 4)];

/// Label of the k-th comparison (0..=3).
pub fn comparison_label(k: usize) -> String {
    match TASK_PAIRS.get(k) {
        Some((a, b)) => format!("Task{a} vs Task{b}"),
        None => "DUF vs IUF".to_string(),
    }
}

pub fn subject_intervals(rec: &SubjectRecord) -> Result<[CrraInterval; 6], AnalysisError> {
    let mut out = Vec::with_capacity(6);
    for (kind, &resp) in TASK_KINDS.iter().zip(&rec.responses) {
        out.push(interval_from_response(*kind, resp)?);
    }
    Ok(out.try_into().expect("six intervals"))
}

pub fn subject_midpoints(rec: &SubjectRecord) -> Result<[f64; 6], AnalysisError> {
    Ok(subject_intervals(rec)?.map(|iv| iv.midpoint()))
}

pub fn subject_attitudes(rec: &SubjectRecord) -> Result<[BroadAttitude; 6], AnalysisError> {
    Ok(subject_intervals(rec)?.map(|iv| iv.broad()))
}

/// Midpoint CRRA of every subject for task `task` (1..=6).
pub fn task_midpoints(cohort: &Cohort, task: usize) -> Result<Vec<f64>, AnalysisError> {
    cohort.subjects().map(|s| Ok(subject_midpoints(s)?[task - 1])).collect()
}

fn split_means(values: &[[f64; 6]]) -> (Vec<f64>, Vec<f64>) {
    values.iter().map(|v| ((v[0] + v[1] + v[2]) / 3.0, (v[3] + v[4] + v[5]) / 3.0)).unzip()
}

/// Per-subject means of the raw responses over tasks 1-3 (payoff framing)
/// and 4-6 (price framing).
pub fn duf_iuf_response_means(cohort: &Cohort) -> (Vec<f64>, Vec<f64>) {
    let v: Vec<[f64; 6]> = cohort.subjects().map(|s| s.responses.map(f64::from)).collect();
    split_means(&v)
}

/// Per-subject means of the midpoint CRRAs over tasks 1-3 and 4-6.
pub fn duf_iuf_crra_means(cohort: &Cohort) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let v = cohort.subjects().map(subject_midpoints).collect::<Result<Vec<_>, _>>()?;
    Ok(split_means(&v))
}

/// Raw responses for the three task pairs followed by the DUF/IUF means.
pub fn response_samples(cohort: &Cohort) -> Result<Vec<PairedSample>, AnalysisError> {
    let as_f = |t: usize| cohort.responses(t).into_iter().map(f64::from).collect::<Vec<f64>>();
    let mut out = Vec::new();
    for (a, b) in TASK_PAIRS {
        out.push(PairedSample::labeled(as_f(a), as_f(b), &format!("Task{a}"), &format!("Task{b}"))?);
    }
    let (d, i) = duf_iuf_response_means(cohort);
    out.push(PairedSample::labeled(d, i, "DUF", "IUF")?);
    Ok(out)
}

/// Midpoint CRRAs for the three task pairs followed by the DUF/IUF means.
pub fn midpoint_samples(cohort: &Cohort) -> Result<Vec<PairedSample>, AnalysisError> {
    let mut out = Vec::new();
    for (a, b) in TASK_PAIRS {
        out.push(PairedSample::labeled(
            task_midpoints(cohort, a)?,
            task_midpoints(cohort, b)?,
            &format!("CRRA_Task{a}"),
            &format!("CRRA_Task{b}"),
        )?);
    }
    let (d, i) = duf_iuf_crra_means(cohort)?;
    out.push(PairedSample::labeled(d, i, "DUF_CRRA", "IUF_CRRA")?);
    Ok(out)
}

/// The four comparisons under each test: rank and sign tests on responses,
/// t tests on midpoint CRRAs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTests {
    pub wilcoxon: Vec<TestReport>,
    pub sign: Vec<TestReport>,
    pub t: Vec<TestReport>,
}

pub fn run_paired_tests(cohort: &Cohort) -> Result<PairedTests, AnalysisError> {
    let resp = response_samples(cohort)?;
    let mid = midpoint_samples(cohort)?;
    Ok(PairedTests {
        wilcoxon: resp.iter().map(wilcoxon_signed_rank).collect::<Result<_, _>>()?,
        sign: resp.iter().map(sign_test).collect::<Result<_, _>>()?,
        t: mid.iter().map(paired_t_test).collect::<Result<_, _>>()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AttitudeShares {
    pub loving: f64,
    pub neutral: f64,
    pub averse: f64,
}

impl AttitudeShares {
    fn from_attitudes(a: impl Iterator<Item = BroadAttitude>) -> Self {
        let (mut l, mut n, mut v, mut total) = (0usize, 0usize, 0usize, 0usize);
        for x in a {
            total += 1;
            match x {
                BroadAttitude::Loving => l += 1,
                BroadAttitude::Neutral => n += 1,
                BroadAttitude::Averse => v += 1,
            }
        }
        if total == 0 {
            return AttitudeShares::default();
        }
        let t = total as f64;
        AttitudeShares { loving: l as f64 / t, neutral: n as f64 / t, averse: v as f64 / t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: usize,
    pub kind: DesignKind,
    pub mean_response: f64,
    pub mean_midpoint: f64,
    pub sd_midpoint: f64,
    /// Subjects per attitude interval 1..=9.
    pub interval_counts: [usize; 9],
    pub shares: AttitudeShares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub tasks: Vec<TaskSummary>,
    /// Mean over subjects of the per-subject DUF/IUF midpoint means.
    pub duf_mean: f64,
    pub iuf_mean: f64,
    /// Standard deviation of all midpoints pooled over tasks 1-3 / 4-6.
    pub duf_sd: f64,
    pub iuf_sd: f64,
    /// Task-level shares averaged over the six tasks.
    pub mean_shares: AttitudeShares,
}

pub fn cohort_summary(cohort: &Cohort) -> Result<SummaryStats, AnalysisError> {
    if cohort.is_empty() {
        return Err(AnalysisError::EmptyCohort);
    }
    let intervals = cohort.subjects().map(subject_intervals).collect::<Result<Vec<_>, _>>()?;
    let mut tasks = Vec::new();
    for t in 0..6 {
        let mids: Vec<f64> = intervals.iter().map(|iv| iv[t].midpoint()).collect();
        let mut counts = [0usize; 9];
        for iv in &intervals {
            counts[iv[t].index] += 1;
        }
        tasks.push(TaskSummary {
            task: t + 1,
            kind: TASK_KINDS[t],
            mean_response: sample_mean(&cohort.responses(t + 1).into_iter().map(f64::from).collect::<Vec<_>>()),
            mean_midpoint: sample_mean(&mids),
            sd_midpoint: sample_sd(&mids),
            interval_counts: counts,
            shares: AttitudeShares::from_attitudes(intervals.iter().map(|iv| iv[t].broad())),
        });
    }
    let pooled = |range: std::ops::Range<usize>| -> Vec<f64> {
        intervals.iter().flat_map(|iv| range.clone().map(move |t| iv[t].midpoint())).collect()
    };
    let (duf, iuf) = duf_iuf_crra_means(cohort)?;
    let avg = |f: fn(&AttitudeShares) -> f64| tasks.iter().map(|t| f(&t.shares)).sum::<f64>() / 6.0;
    let mean_shares =
        AttitudeShares { loving: avg(|s| s.loving), neutral: avg(|s| s.neutral), averse: avg(|s| s.averse) };
    Ok(SummaryStats {
        n: cohort.len(),
        duf_mean: sample_mean(&duf),
        iuf_mean: sample_mean(&iuf),
        duf_sd: sample_sd(&pooled(0..3)),
        iuf_sd: sample_sd(&pooled(3..6)),
        mean_shares,
        tasks,
    })
}

/// Shares of subjects whose broad attitude changes across the six tasks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SwitchingProfile {
    pub any_switch: f64,
    /// Switchers that move only between NEUTRAL and AVERSE.
    pub neutral_averse_only: f64,
    pub all_three: f64,
}

pub fn attitude_set(a: &[BroadAttitude]) -> BTreeSet<BroadAttitude> {
    a.iter().copied().collect()
}

pub fn switching_profile(cohort: &Cohort) -> Result<SwitchingProfile, AnalysisError> {
    if cohort.is_empty() {
        return Ok(SwitchingProfile::default());
    }
    let (mut any, mut na, mut all) = (0usize, 0usize, 0usize);
    let neutral_averse: BTreeSet<_> = [BroadAttitude::Neutral, BroadAttitude::Averse].into();
    for s in cohort.subjects() {
        let set = attitude_set(&subject_attitudes(s)?);
        if set.len() > 1 {
            any += 1;
        }
        if set == neutral_averse {
            na += 1;
        }
        if set.len() == 3 {
            all += 1;
        }
    }
    let n = cohort.len() as f64;
    Ok(SwitchingProfile { any_switch: any as f64 / n, neutral_averse_only: na as f64 / n, all_three: all as f64 / n })
}
