//! Certainty equivalents and risk premia from CvU responses.

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::dataset::Cohort;
use crate::menu::{Choice, DesignKind, TaskMenu};
use crate::stats::{paired_t_test, sample_mean, sample_sd, sign_test, wilcoxon_signed_rank, PairedSample, TestReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeRp {
    pub ce: f64,
    /// Expected value of the lottery minus the certainty equivalent.
    pub rp: f64,
    /// `rp` as a percentage of the expected value.
    pub rp_pct: f64,
}

/// Certain amounts (as payoffs) and the lottery of a CvU menu.
fn schedule(menu: &TaskMenu) -> Result<(Vec<f64>, f64), AnalysisError> {
    if menu.kind != DesignKind::Cvu {
        return Err(AnalysisError::NotCvu(menu.kind));
    }
    if menu.rows.len() != 10 {
        return Err(AnalysisError::MalformedCvu);
    }
    let mut certain = Vec::with_capacity(10);
    for row in 1..=10 {
        let a = menu.payoff_lottery(row, Choice::A)?;
        if !a.is_degenerate() {
            return Err(AnalysisError::MalformedCvu);
        }
        certain.push(a.expected_value());
    }
    let ev = menu.payoff_lottery(1, Choice::B)?.expected_value();
    Ok((certain, ev))
}

/// Point certainty equivalent of a subject choosing the certain amount in
/// the first `n` rows: midpoint of rows `n` and `n+1`, or the first/last
/// amount at 0 and 10.
pub fn ce_rp_from_cvu(n: u8, menu: &TaskMenu) -> Result<CeRp, AnalysisError> {
    let (c, ev) = schedule(menu)?;
    let ce = match n {
        0 => c[0],
        10 => c[9],
        1..=9 => 0.5 * (c[n as usize - 1] + c[n as usize]),
        _ => return Err(AnalysisError::ResponseRange(n)),
    };
    let rp = ev - ce;
    Ok(CeRp { ce, rp, rp_pct: 100.0 * rp / ev })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeRpSummary {
    pub task: usize,
    pub n: usize,
    pub mean_ce: f64,
    pub sd_ce: f64,
    pub min_ce: f64,
    pub max_ce: f64,
    pub mean_rp: f64,
    pub sd_rp: f64,
    pub min_rp: f64,
    pub max_rp: f64,
    pub mean_rp_pct: f64,
    pub min_rp_pct: f64,
    pub max_rp_pct: f64,
}

fn per_subject(cohort: &Cohort, task: usize, menu: &TaskMenu) -> Result<Vec<CeRp>, AnalysisError> {
    cohort.responses(task).into_iter().map(|n| ce_rp_from_cvu(n, menu)).collect()
}

pub fn ce_rp_summary(cohort: &Cohort, task: usize, menu: &TaskMenu) -> Result<CeRpSummary, AnalysisError> {
    if cohort.is_empty() {
        return Err(AnalysisError::EmptyCohort);
    }
    let v = per_subject(cohort, task, menu)?;
    let col = |f: fn(&CeRp) -> f64| v.iter().map(f).collect::<Vec<f64>>();
    let (ce, rp, pct) = (col(|x| x.ce), col(|x| x.rp), col(|x| x.rp_pct));
    let min = |x: &[f64]| x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |x: &[f64]| x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CeRpSummary {
        task,
        n: v.len(),
        mean_ce: sample_mean(&ce),
        sd_ce: sample_sd(&ce),
        min_ce: min(&ce),
        max_ce: max(&ce),
        mean_rp: sample_mean(&rp),
        sd_rp: sample_sd(&rp),
        min_rp: min(&rp),
        max_rp: max(&rp),
        mean_rp_pct: sample_mean(&pct),
        min_rp_pct: min(&pct),
        max_rp_pct: max(&pct),
    })
}

/// Risk premia of task 2 against task 5 under the three tests, in the order
/// Wilcoxon, sign, t.
pub fn rp_comparison(cohort: &Cohort, task2: &TaskMenu, task5: &TaskMenu) -> Result<[TestReport; 3], AnalysisError> {
    let rp =
        |t, m| -> Result<Vec<f64>, AnalysisError> { Ok(per_subject(cohort, t, m)?.iter().map(|x| x.rp).collect()) };
    let s = PairedSample::labeled(rp(2, task2)?, rp(5, task5)?, "RP_Task2", "RP_Task5")?;
    Ok([wilcoxon_signed_rank(&s)?, sign_test(&s)?, paired_t_test(&s)?])
}
