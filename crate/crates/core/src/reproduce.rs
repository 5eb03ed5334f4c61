//! Comparison of computed statistics against reference values.
//!
//! Checks that depend on the original CvU schedules are evaluated only when
//! authentic task-2 and task-5 menus are supplied; otherwise they are
//! reported as skipped.

use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};

use crate::analysis::{
    ce_rp_summary, cohort_summary, comparison_label, rp_comparison, run_paired_tests, switching_profile, AnalysisError,
};
use crate::dataset::Cohort;
use crate::menu::{default_cvu_menu, DesignKind, MenuDomain, TaskMenu};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    #[serde(rename = "SKIPPED-CONDITIONAL")]
    SkippedConditional,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::SkippedConditional => "SKIPPED-CONDITIONAL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub group: String,
    pub name: String,
    pub expected: f64,
    pub actual: Option<f64>,
    pub tolerance: f64,
    pub status: CheckStatus,
}

impl Check {
    fn new(group: &str, name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        let ok = (actual - expected).abs() <= tolerance + 1e-12;
        Check {
            group: group.into(),
            name: name.into(),
            expected,
            actual: Some(actual),
            tolerance,
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        }
    }

    /// Passes when `actual < bound`.
    fn below(group: &str, name: impl Into<String>, bound: f64, actual: f64) -> Self {
        Check {
            group: group.into(),
            name: name.into(),
            expected: bound,
            actual: Some(actual),
            tolerance: 0.0,
            status: if actual < bound { CheckStatus::Pass } else { CheckStatus::Fail },
        }
    }

    fn skipped(group: &str, name: impl Into<String>, expected: f64, tolerance: f64) -> Self {
        Check {
            group: group.into(),
            name: name.into(),
            expected,
            actual: None,
            tolerance,
            status: CheckStatus::SkippedConditional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproductionReport {
    pub n_subjects: usize,
    pub authentic_cvu: bool,
    pub checks: Vec<Check>,
}

impl ReproductionReport {
    pub fn count(&self, status: CheckStatus) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }

    pub fn group(&self, group: &str) -> impl Iterator<Item = &Check> {
        let g = group.to_string();
        self.checks.iter().filter(move |c| c.group == g)
    }

    /// Status of a group: FAIL if any check failed, SKIPPED-CONDITIONAL if
    /// every check was skipped, PASS otherwise.
    pub fn group_status(&self, group: &str) -> Option<CheckStatus> {
        let v: Vec<_> = self.group(group).map(|c| c.status).collect();
        if v.is_empty() {
            None
        } else if v.contains(&CheckStatus::Fail) {
            Some(CheckStatus::Fail)
        } else if v.iter().all(|s| *s == CheckStatus::SkippedConditional) {
            Some(CheckStatus::SkippedConditional)
        } else {
            Some(CheckStatus::Pass)
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "subjects: {}  authentic CvU menus: {}", self.n_subjects, self.authentic_cvu);
        for c in &self.checks {
            let actual = c.actual.map_or("-".to_string(), |a| format!("{a:.6}"));
            let _ = writeln!(
                out,
                "{:<19} {:<10} {:<40} expected {:>12.6} actual {:>12} tol {}",
                c.status.to_string(),
                c.group,
                c.name,
                c.expected,
                actual,
                c.tolerance
            );
        }
        let _ = writeln!(
            out,
            "pass {}  fail {}  skipped {}",
            self.count(CheckStatus::Pass),
            self.count(CheckStatus::Fail),
            self.count(CheckStatus::SkippedConditional)
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Reference values for the bundled cohort.
pub mod reference {
    /// Per comparison: (n_pos, n_neg, n_zero, S+, S-, S0, expected). The
    /// third row's printed S- (1819.5) breaks the rank-sum identity while its
    /// S+, expected value and z agree, so it is left out.
    pub type RankRow = (usize, usize, usize, f64, Option<f64>, f64, f64);

    pub const WILCOXON_RANKS: [RankRow; 4] = [
        (21, 35, 32, 1189.5, Some(2198.5), 528.0, 1694.0),
        (24, 42, 22, 1138.5, Some(2524.5), 253.0, 1831.5),
        (28, 32, 28, 1618.5, None, 406.0, 1755.0),
        (28, 49, 11, 1368.5, Some(2481.5), 66.0, 1925.0),
    ];
    /// (tie adjustment, zero adjustment, adjusted variance); the last row's
    /// printed tie adjustment and variance are inconsistent with its z and
    /// are left out.
    pub const WILCOXON_VARIANCE: [(Option<f64>, f64, Option<f64>); 4] = [
        (Some(-645.88), -2860.0, Some(54255.13)),
        (Some(-948.88), -948.75, Some(55863.38)),
        (Some(-452.13), -1928.5, Some(55380.38)),
        (None, -126.5, None),
    ];
    pub const WILCOXON_Z: [f64; 4] = [-2.166, -2.932, -0.580, -2.319];
    pub const WILCOXON_P: [f64; 4] = [0.0303, 0.0034, 0.5619, 0.0204];
    pub const UNADJUSTED_VARIANCE: f64 = 57761.0;

    /// (positive, negative, zero).
    pub const SIGN_COUNTS: [(usize, usize, usize); 4] = [(21, 35, 32), (24, 42, 22), (28, 32, 28), (28, 49, 11)];
    pub const SIGN_ONE_SIDED: [f64; 4] = [0.0407, 0.0178, 0.3494, 0.0110];
    pub const SIGN_TWO_SIDED: [f64; 4] = [0.0814, 0.0356, 0.6989, 0.022];

    pub const T_MEANS: [(f64, f64); 4] =
        [(0.5765341, 0.7160227), (0.4475, 0.6297159), (0.7665909, 0.7779545), (0.596875, 0.7078977)];
    pub const T_STATS: [f64; 4] = [-2.2133, -3.0803, -0.1755, -2.4010];
    pub const T_P_ONE_SIDED: [f64; 4] = [0.0147, 0.0014, 0.4306, 0.0092];

    /// Task 2 and task 5: (mean CE, mean RP, mean RP/EV %, min CE, max CE).
    pub const CE_RP: [(f64, f64, f64, f64, f64); 2] =
        [(8.899204, 2.100796, 19.09814, 4.5, 14.43), (7.95375, 3.04625, 27.69318, 4.0, 14.43)];

    /// Wilcoxon on risk premia: (S+, S-, tie adjustment, adjusted variance, z, p).
    pub const RP_WILCOXON: (f64, f64, f64, f64, f64, f64) = (1070.5, 2592.5, -77.0, 56735.25, -3.195, 0.0014);
    pub const RP_SIGN_P: f64 = 0.0178;
    pub const RP_T: (f64, f64) = (-3.4562, 0.0004);

    /// Attitude shares (loving upper bound, neutral, averse).
    pub const SHARES: (f64, f64, f64) = (0.05, 0.12, 0.83);
    pub const SDS: (f64, f64) = (0.381, 0.451);
    pub const SWITCHING: (f64, f64, f64) = (0.41, 0.23, 0.18);
}

pub mod tolerance {
    pub const RANK_SUM: f64 = 0.0;
    pub const VARIANCE: f64 = 0.02;
    pub const Z: f64 = 0.001;
    pub const P: f64 = 0.0001;
    pub const MEAN: f64 = 1e-4;
    pub const T: f64 = 1e-3;
    pub const T_P: f64 = 1e-3;
    pub const SHARE: f64 = 0.01;
    pub const SD: f64 = 0.002;
}

/// Authentic task-2 (payoff) and task-5 (price) CvU menus, if any.
#[derive(Debug, Clone, Default)]
pub struct ConditionalInputs {
    pub cvu_payoff: Option<TaskMenu>,
    pub cvu_price: Option<TaskMenu>,
}

impl ConditionalInputs {
    pub fn authentic(&self) -> Option<(&TaskMenu, &TaskMenu)> {
        match (&self.cvu_payoff, &self.cvu_price) {
            (Some(a), Some(b))
                if a.authentic && b.authentic && a.kind == DesignKind::Cvu && b.kind == DesignKind::Cvu =>
            {
                Some((a, b))
            }
            _ => None,
        }
    }
}

pub fn reproduce(cohort: &Cohort, inputs: &ConditionalInputs) -> Result<ReproductionReport, AnalysisError> {
    use reference::*;
    let mut checks = Vec::new();
    let tests = run_paired_tests(cohort)?;

    for k in 0..4 {
        let label = comparison_label(k);
        let w = tests.wilcoxon[k].wilcoxon().expect("wilcoxon details");
        let (np, nn, nz, sp, sn, s0, ex) = WILCOXON_RANKS[k];
        let mut push = |name: &str, e: f64, a: f64, tol: f64| {
            checks.push(Check::new("wilcoxon", format!("{label} {name}"), e, a, tol))
        };
        push("n positive", np as f64, w.n_pos as f64, 0.0);
        push("n negative", nn as f64, w.n_neg as f64, 0.0);
        push("n zero", nz as f64, w.n_zero as f64, 0.0);
        push("S+", sp, w.sum_pos, tolerance::RANK_SUM);
        if let Some(sn) = sn {
            push("S-", sn, w.sum_neg, tolerance::RANK_SUM);
        }
        push("S0", s0, w.sum_zero, tolerance::RANK_SUM);
        push("expected", ex, w.expected, tolerance::RANK_SUM);
        push("unadjusted variance", UNADJUSTED_VARIANCE, w.unadjusted_variance, 0.0);
        let (ties, zeros, var) = WILCOXON_VARIANCE[k];
        if let Some(t) = ties {
            push("tie adjustment", t, w.tie_adjustment, tolerance::VARIANCE);
        }
        push("zero adjustment", zeros, w.zero_adjustment, tolerance::VARIANCE);
        if let Some(v) = var {
            push("adjusted variance", v, w.adjusted_variance, tolerance::VARIANCE);
        }
        push("z", WILCOXON_Z[k], w.z, tolerance::Z);
        push("p two-sided", WILCOXON_P[k], tests.wilcoxon[k].two_sided_p, tolerance::P);
    }

    for k in 0..4 {
        let label = comparison_label(k);
        let s = tests.sign[k].sign().expect("sign details");
        let (np, nn, nz) = SIGN_COUNTS[k];
        let mut push = |name: &str, e: f64, a: f64, tol: f64| {
            checks.push(Check::new("sign", format!("{label} {name}"), e, a, tol))
        };
        push("n positive", np as f64, s.n_pos as f64, 0.0);
        push("n negative", nn as f64, s.n_neg as f64, 0.0);
        push("n zero", nz as f64, s.n_zero as f64, 0.0);
        push("p one-sided", SIGN_ONE_SIDED[k], tests.sign[k].one_sided_p, tolerance::P);
        push("p two-sided", SIGN_TWO_SIDED[k], tests.sign[k].two_sided_p, tolerance::P);
    }

    for k in 0..4 {
        let label = comparison_label(k);
        let r = &tests.t[k];
        let t = r.t().expect("t details");
        let mut push = |name: &str, e: f64, a: f64, tol: f64| {
            checks.push(Check::new("t-test", format!("{label} {name}"), e, a, tol))
        };
        push("mean x", T_MEANS[k].0, t.mean_x, tolerance::MEAN);
        push("mean y", T_MEANS[k].1, t.mean_y, tolerance::MEAN);
        push("t", T_STATS[k], r.statistic, tolerance::T);
        push("p one-sided", T_P_ONE_SIDED[k], r.one_sided_p, tolerance::T_P);
    }

    let summary = cohort_summary(cohort)?;
    checks.push(Check::below(
        "aggregate",
        "share loving (< 5% + 1pp)",
        SHARES.0 + tolerance::SHARE,
        summary.mean_shares.loving,
    ));
    checks.push(Check::new("aggregate", "share neutral", SHARES.1, summary.mean_shares.neutral, tolerance::SHARE));
    checks.push(Check::new("aggregate", "share averse", SHARES.2, summary.mean_shares.averse, tolerance::SHARE));
    checks.push(Check::new("aggregate", "sd DUF midpoints", SDS.0, summary.duf_sd, tolerance::SD));
    checks.push(Check::new("aggregate", "sd IUF midpoints", SDS.1, summary.iuf_sd, tolerance::SD));
    let sw = switching_profile(cohort)?;
    checks.push(Check::new("aggregate", "switching any", SWITCHING.0, sw.any_switch, tolerance::SHARE));
    checks.push(Check::new(
        "aggregate",
        "switching neutral/averse only",
        SWITCHING.1,
        sw.neutral_averse_only,
        tolerance::SHARE,
    ));
    checks.push(Check::new("aggregate", "switching all three", SWITCHING.2, sw.all_three, tolerance::SHARE));

    // The sign test on risk premia depends only on the order of the CvU
    // responses, so any common strictly decreasing schedule reproduces it.
    let authentic = inputs.authentic();
    let default_menu = default_cvu_menu(MenuDomain::Payoff)?;
    let (m2, m5) = authentic.unwrap_or((&default_menu, &default_menu));
    let rp = rp_comparison(cohort, m2, m5)?;
    checks.push(Check::new("rp-tests", "RP sign p one-sided", RP_SIGN_P, rp[1].one_sided_p, tolerance::P));

    match authentic {
        Some((m2, m5)) => {
            for (i, (task, menu)) in [(2usize, m2), (5, m5)].into_iter().enumerate() {
                let s = ce_rp_summary(cohort, task, menu)?;
                let (ce, rpm, pct, lo, hi) = CE_RP[i];
                let mut push = |name: &str, e: f64, a: f64| {
                    checks.push(Check::new("ce-rp", format!("Task{task} {name}"), e, a, tolerance::MEAN))
                };
                push("mean CE", ce, s.mean_ce);
                push("mean RP", rpm, s.mean_rp);
                push("mean RP/EV %", pct, s.mean_rp_pct);
                push("min CE", lo, s.min_ce);
                push("max CE", hi, s.max_ce);
            }
            let w = rp[0].wilcoxon().expect("wilcoxon details");
            let (sp, sn, ties, var, z, p) = RP_WILCOXON;
            let mut push =
                |name: &str, e: f64, a: f64, tol: f64| checks.push(Check::new("rp-tests", name.to_string(), e, a, tol));
            push("RP Wilcoxon S+", sp, w.sum_pos, tolerance::RANK_SUM);
            push("RP Wilcoxon S-", sn, w.sum_neg, tolerance::RANK_SUM);
            push("RP Wilcoxon tie adjustment", ties, w.tie_adjustment, tolerance::VARIANCE);
            push("RP Wilcoxon adjusted variance", var, w.adjusted_variance, tolerance::VARIANCE);
            push("RP Wilcoxon z", z, w.z, tolerance::Z);
            push("RP Wilcoxon p two-sided", p, rp[0].two_sided_p, tolerance::P);
            push("RP t", RP_T.0, rp[2].statistic, tolerance::T);
            push("RP t p one-sided", RP_T.1, rp[2].one_sided_p, tolerance::T_P);
        }
        None => {
            for (i, task) in [2usize, 5].into_iter().enumerate() {
                let (ce, rpm, pct, lo, hi) = CE_RP[i];
                for (name, e) in
                    [("mean CE", ce), ("mean RP", rpm), ("mean RP/EV %", pct), ("min CE", lo), ("max CE", hi)]
                {
                    checks.push(Check::skipped("ce-rp", format!("Task{task} {name}"), e, tolerance::MEAN));
                }
            }
            let (sp, sn, ties, var, z, p) = RP_WILCOXON;
            for (name, e, tol) in [
                ("RP Wilcoxon S+", sp, tolerance::RANK_SUM),
                ("RP Wilcoxon S-", sn, tolerance::RANK_SUM),
                ("RP Wilcoxon tie adjustment", ties, tolerance::VARIANCE),
                ("RP Wilcoxon adjusted variance", var, tolerance::VARIANCE),
                ("RP Wilcoxon z", z, tolerance::Z),
                ("RP Wilcoxon p two-sided", p, tolerance::P),
                ("RP t", RP_T.0, tolerance::T),
                ("RP t p one-sided", RP_T.1, tolerance::T_P),
            ] {
                checks.push(Check::skipped("rp-tests", name, e, tol));
            }
        }
    }

    Ok(ReproductionReport { n_subjects: cohort.len(), authentic_cvu: authentic.is_some(), checks })
}
