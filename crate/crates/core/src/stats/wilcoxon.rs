//! Wilcoxon matched-pairs signed-rank test.
//!
//! Zero differences keep their ranks (they fill the lowest positions and
//! count toward `S0`); the expected rank sum and the variance are then
//! corrected for zeros and for ties among the nonzero magnitudes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{average_ranks, PairedSample, StatsError, TestDetails, TestReport};

/// Largest sample handled by [`wilcoxon_exact`].
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonDetails {
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_zero: usize,
    pub sum_pos: f64,
    pub sum_neg: f64,
    pub sum_zero: f64,
    /// Expected positive (and negative) rank sum under the null.
    pub expected: f64,
    pub unadjusted_variance: f64,
    /// Negative adjustment for ties among nonzero magnitudes.
    pub tie_adjustment: f64,
    /// Negative adjustment for zero differences.
    pub zero_adjustment: f64,
    pub adjusted_variance: f64,
    pub z: f64,
}

pub fn wilcoxon_signed_rank(s: &PairedSample) -> Result<TestReport, StatsError> {
    let d = s.differences();
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = average_ranks(&abs);

    let (mut n_pos, mut n_neg, mut n_zero) = (0, 0, 0);
    let (mut sum_pos, mut sum_neg, mut sum_zero) = (0.0, 0.0, 0.0);
    for (di, ri) in d.iter().zip(&ranks) {
        if *di > 0.0 {
            n_pos += 1;
            sum_pos += ri;
        } else if *di < 0.0 {
            n_neg += 1;
            sum_neg += ri;
        } else {
            n_zero += 1;
            sum_zero += ri;
        }
    }
    let nf = n as f64;
    let total = nf * (nf + 1.0) / 2.0;
    let expected = (total - sum_zero) / 2.0;
    let unadjusted_variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;

    // Tie groups among nonzero magnitudes.
    let mut nonzero: Vec<f64> = abs.iter().copied().filter(|&a| a > 0.0).collect();
    nonzero.sort_by(f64::total_cmp);
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < nonzero.len() {
        let mut j = i;
        while j + 1 < nonzero.len() && nonzero[j + 1] == nonzero[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    let tie_adjustment = -tie_sum / 48.0;
    let z0 = n_zero as f64;
    let zero_adjustment = -z0 * (z0 + 1.0) * (2.0 * z0 + 1.0) / 24.0;
    let adjusted_variance = unadjusted_variance + tie_adjustment + zero_adjustment;
    if !(adjusted_variance > 0.0) {
        return Err(StatsError::Degenerate("all differences are zero"));
    }
    let z = (sum_pos - expected) / adjusted_variance.sqrt();
    let normal = Normal::standard();
    let one_sided_p = normal.cdf(z);
    let two_sided_p = (2.0 * normal.sf(z.abs())).min(1.0);
    Ok(TestReport {
        label_x: s.label_x.clone(),
        label_y: s.label_y.clone(),
        n,
        statistic: z,
        one_sided_p,
        two_sided_p,
        details: TestDetails::Wilcoxon(WilcoxonDetails {
            n,
            n_pos,
            n_neg,
            n_zero,
            sum_pos,
            sum_neg,
            sum_zero,
            expected,
            unadjusted_variance,
            tie_adjustment,
            zero_adjustment,
            adjusted_variance,
            z,
        }),
    })
}

/// Exact null distribution of `S+` for small samples, by enumerating every
/// sign assignment of the nonzero ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactWilcoxon {
    pub sum_pos: f64,
    /// Pr(S+ <= observed).
    pub lower_p: f64,
    /// Pr(S+ >= observed).
    pub upper_p: f64,
    pub two_sided_p: f64,
    /// Mean and variance of the enumerated distribution.
    pub null_mean: f64,
    pub null_variance: f64,
}

pub fn wilcoxon_exact(s: &PairedSample) -> Result<ExactWilcoxon, StatsError> {
    let d = s.differences();
    if d.len() > EXACT_MAX_N {
        return Err(StatsError::Degenerate("exact mode is limited to small samples"));
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = average_ranks(&abs);
    let signed: Vec<f64> = d.iter().zip(&ranks).filter(|(di, _)| **di != 0.0).map(|(_, r)| *r).collect();
    if signed.is_empty() {
        return Err(StatsError::Degenerate("all differences are zero"));
    }
    let observed: f64 = d.iter().zip(&ranks).filter(|(di, _)| **di > 0.0).map(|(_, r)| r).sum();
    let m = signed.len();
    let total = 1u64 << m;
    let (mut le, mut ge) = (0u64, 0u64);
    let (mut s1, mut s2) = (0.0, 0.0);
    // Average ranks are multiples of 0.5, so sums compare exactly.
    for mask in 0..total {
        let sp: f64 = (0..m).filter(|k| mask >> k & 1 == 1).map(|k| signed[k]).sum();
        if sp <= observed {
            le += 1;
        }
        if sp >= observed {
            ge += 1;
        }
        s1 += sp;
        s2 += sp * sp;
    }
    let tf = total as f64;
    let null_mean = s1 / tf;
    let lower_p = le as f64 / tf;
    let upper_p = ge as f64 / tf;
    Ok(ExactWilcoxon {
        sum_pos: observed,
        lower_p,
        upper_p,
        two_sided_p: (2.0 * lower_p.min(upper_p)).min(1.0),
        null_mean,
        null_variance: s2 / tf - null_mean * null_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_ranked_example() {
        let s = PairedSample::new(vec![1.0, 2.0, 3.0], vec![0.0; 3]).unwrap();
        let r = wilcoxon_signed_rank(&s).unwrap();
        let d = r.wilcoxon().unwrap();
        assert_eq!(d.sum_pos, 6.0);
        assert_eq!(d.expected, 3.0);
        assert_eq!(d.adjusted_variance, 3.5);
        assert!((r.statistic - 1.6035674514745464).abs() < 1e-12);
    }

    #[test]
    fn rank_sum_identity() {
        let s = PairedSample::new(vec![1.0, 2.0, 2.0, 5.0, 3.0, 0.0, 4.0], vec![1.0, 1.0, 3.0, 2.0, 3.0, 2.0, 1.0])
            .unwrap();
        let d = wilcoxon_signed_rank(&s).unwrap().wilcoxon().unwrap().clone();
        assert_eq!(d.sum_pos + d.sum_neg + d.sum_zero, 28.0);
        assert_eq!(d.n_zero, 2);
        assert_eq!(d.sum_zero, 3.0);
    }

    #[test]
    fn unadjusted_variance_n88() {
        let x: Vec<f64> = (0..88).map(|i| i as f64 + 1.0).collect();
        let s = PairedSample::new(x, vec![0.0; 88]).unwrap();
        let d = wilcoxon_signed_rank(&s).unwrap().wilcoxon().unwrap().clone();
        assert_eq!(d.unadjusted_variance, 57761.0);
        assert_eq!(d.adjusted_variance, 57761.0);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let s = PairedSample::new(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert!(matches!(wilcoxon_signed_rank(&s), Err(StatsError::Degenerate(_))));
    }

    #[test]
    fn exact_moments_match_adjusted_formulas() {
        // Zeros and ties: the enumerated null mean/variance must equal the
        // corrected expected value and variance.
        let x = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0];
        let y = vec![2.0, 1.0, 3.0, 3.0, 5.0, 7.0, 1.0, 8.0, 3.0, 1.0, 4.0];
        let s = PairedSample::new(x, y).unwrap();
        let ex = wilcoxon_exact(&s).unwrap();
        let d = wilcoxon_signed_rank(&s).unwrap().wilcoxon().unwrap().clone();
        assert!((ex.null_mean - d.expected).abs() < 1e-9);
        assert!((ex.null_variance - d.adjusted_variance).abs() < 1e-9);
        assert_eq!(ex.sum_pos, d.sum_pos);
    }

    #[test]
    fn exact_tail_for_one_sided_extreme() {
        let s = PairedSample::new(vec![0.0; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let ex = wilcoxon_exact(&s).unwrap();
        assert_eq!(ex.lower_p, 1.0 / 32.0);
        assert_eq!(ex.two_sided_p, 2.0 / 32.0);
    }

    #[test]
    fn normal_approximation_tracks_exact_at_n12() {
        let x: Vec<f64> = (0..12).map(|i| (i * 7 % 5) as f64 + 0.3 * i as f64).collect();
        let y: Vec<f64> = (0..12).map(|i| (i * 3 % 4) as f64 + 0.5).collect();
        let s = PairedSample::new(x, y).unwrap();
        let ex = wilcoxon_exact(&s).unwrap();
        let approx = wilcoxon_signed_rank(&s).unwrap();
        assert!((ex.two_sided_p - approx.two_sided_p).abs() < 0.05, "{ex:?} {approx:?}");
    }

    #[test]
    fn not_invariant_under_monotone_transform() {
        let x = vec![1.0, 2.0, 8.0, 4.0, 3.0];
        let y = vec![2.0, 1.5, 3.0, 4.5, 1.0];
        let base = wilcoxon_signed_rank(&PairedSample::new(x.clone(), y.clone()).unwrap()).unwrap();
        let f = |v: &Vec<f64>| v.iter().map(|a: &f64| a.powi(3)).collect::<Vec<f64>>();
        let tr = wilcoxon_signed_rank(&PairedSample::new(f(&x), f(&y)).unwrap()).unwrap();
        assert_ne!(base.statistic, tr.statistic);
    }
}
