//! Histograms, kernel density curves and scatter tuples for plotting.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::{ce_rp_from_cvu, subject_intervals, AnalysisError};
use crate::dataset::{Cohort, TASK_KINDS};
use crate::interval::{BoundarySchedule, N_INTERVALS};
use crate::menu::{DesignKind, TaskMenu};
use crate::stats::sample_sd;

/// Grid size of every KDE curve.
pub const KDE_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionSource {
    Responses,
    Midpoints,
    /// Risk premia of the two CvU tasks; needs their menus.
    RiskPremium,
}

impl std::str::FromStr for DistributionSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "responses" => Ok(Self::Responses),
            "midpoints" => Ok(Self::Midpoints),
            "rp" | "risk_premium" => Ok(Self::RiskPremium),
            other => Err(format!("unknown distribution source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub task: usize,
    /// Value represented by each bin.
    pub values: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub task: usize,
    pub bandwidth: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPanel {
    pub task_x: usize,
    pub task_y: usize,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionExport {
    pub source: DistributionSource,
    pub histograms: Vec<Histogram>,
    pub kdes: Vec<KdeCurve>,
    pub scatter: Vec<ScatterPanel>,
}

impl DistributionExport {
    /// Long-format table: `series task task_y x y`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("series\ttask\ttask_y\tx\ty\n");
        for h in &self.histograms {
            for (v, c) in h.values.iter().zip(&h.counts) {
                let _ = writeln!(out, "histogram\t{}\t-\t{v}\t{c}", h.task);
            }
        }
        for k in &self.kdes {
            for (x, y) in &k.points {
                let _ = writeln!(out, "kde\t{}\t-\t{x:.6}\t{y:.8}", k.task);
            }
        }
        for s in &self.scatter {
            for (x, y) in &s.points {
                let _ = writeln!(out, "scatter\t{}\t{}\t{x}\t{y}", s.task_x, s.task_y);
            }
        }
        out
    }
}

/// Linear-interpolation quantile of sorted data, `q` in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// `0.9 * min(sd, IQR/1.34) * n^(-1/5)`. A zero spread measure falls back to
/// the other one, and an all-equal sample gets 0.05.
pub fn silverman_bandwidth(data: &[f64]) -> f64 {
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    let sd = sample_sd(&s);
    let iqr = (quantile(&s, 0.75) - quantile(&s, 0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => return 0.05,
    };
    0.9 * spread * (data.len() as f64).powf(-0.2)
}

pub fn epanechnikov_kde(data: &[f64], bandwidth: f64, grid: &[f64]) -> Vec<f64> {
    let n = data.len() as f64;
    grid.iter()
        .map(|&x| {
            data.iter()
                .map(|&d| {
                    let u = (x - d) / bandwidth;
                    if u.abs() < 1.0 {
                        0.75 * (1.0 - u * u)
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
                / (n * bandwidth)
        })
        .collect()
}

pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

fn kde_curve(task: usize, data: &[f64]) -> KdeCurve {
    let h = silverman_bandwidth(data);
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min) - h;
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max) + h;
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_POINTS).map(|i| lo + i as f64 * step).collect();
    let dens = epanechnikov_kde(data, h, &grid);
    KdeCurve { task, bandwidth: h, points: grid.into_iter().zip(dens).collect() }
}

fn tally(values: &[f64], bins: &[f64]) -> Vec<usize> {
    let mut counts = vec![0; bins.len()];
    for v in values {
        if let Some(i) = bins.iter().position(|b| b == v) {
            counts[i] += 1;
        }
    }
    counts
}

/// Per-task series for the chosen source. `cvu_menus` are the task 2 and
/// task 5 menus, required for risk premia.
pub fn export_distributions(
    cohort: &Cohort,
    source: DistributionSource,
    cvu_menus: Option<(&TaskMenu, &TaskMenu)>,
) -> Result<DistributionExport, AnalysisError> {
    if cohort.is_empty() {
        return Err(AnalysisError::EmptyCohort);
    }
    let intervals = cohort.subjects().map(subject_intervals).collect::<Result<Vec<_>, _>>()?;
    let schedule = BoundarySchedule::default();
    let mut series: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    match source {
        DistributionSource::Responses => {
            for t in 1..=6 {
                let v = cohort.responses(t).into_iter().map(f64::from).collect();
                series.push((t, v, (0..=10).map(f64::from).collect()));
            }
        }
        DistributionSource::Midpoints => {
            let bins = (0..N_INTERVALS)
                .map(|i| schedule.interval(i).map(|iv| iv.midpoint()))
                .collect::<Result<Vec<f64>, _>>()?;
            for t in 1..=6 {
                series.push((t, intervals.iter().map(|iv| iv[t - 1].midpoint()).collect(), bins.clone()));
            }
        }
        DistributionSource::RiskPremium => {
            let (m2, m5) = cvu_menus.ok_or(AnalysisError::MalformedCvu)?;
            for (t, m) in [(2, m2), (5, m5)] {
                debug_assert_eq!(TASK_KINDS[t - 1], DesignKind::Cvu);
                let bins = (0..=10).map(|n| ce_rp_from_cvu(n, m).map(|x| x.rp)).collect::<Result<Vec<_>, _>>()?;
                let v = cohort
                    .responses(t)
                    .into_iter()
                    .map(|n| ce_rp_from_cvu(n, m).map(|x| x.rp))
                    .collect::<Result<Vec<_>, _>>()?;
                series.push((t, v, bins));
            }
        }
    }
    let histograms = series
        .iter()
        .map(|(t, v, bins)| Histogram { task: *t, values: bins.clone(), counts: tally(v, bins) })
        .collect();
    let kdes = series.iter().map(|(t, v, _)| kde_curve(*t, v)).collect();
    let mut scatter = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            scatter.push(ScatterPanel {
                task_x: series[i].0,
                task_y: series[j].0,
                points: series[i].1.iter().copied().zip(series[j].1.iter().copied()).collect(),
            });
        }
    }
    Ok(DistributionExport { source, histograms, kdes, scatter })
}
