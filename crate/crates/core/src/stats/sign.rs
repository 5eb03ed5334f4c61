//! Exact binomial sign test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::{PairedSample, StatsError, TestDetails, TestReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignDetails {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_zero: usize,
    /// Pairs with a nonzero difference.
    pub n_nonzero: usize,
    /// Pr(#positive >= n_pos) under Binomial(n_nonzero, 1/2).
    pub p_pos_tail: f64,
    /// Pr(#negative >= n_neg) under Binomial(n_nonzero, 1/2).
    pub p_neg_tail: f64,
}

/// Pr(X >= k) for X ~ Binomial(n, 1/2).
pub fn binomial_upper_tail(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    b.sf(k - 1).clamp(0.0, 1.0)
}

pub fn sign_test(s: &PairedSample) -> Result<TestReport, StatsError> {
    let d = s.differences();
    let n_pos = d.iter().filter(|&&x| x > 0.0).count();
    let n_neg = d.iter().filter(|&&x| x < 0.0).count();
    let n_zero = d.len() - n_pos - n_neg;
    let m = (n_pos + n_neg) as u64;
    let (p_pos_tail, p_neg_tail) =
        if m == 0 { (1.0, 1.0) } else { (binomial_upper_tail(m, n_pos as u64), binomial_upper_tail(m, n_neg as u64)) };
    Ok(TestReport {
        label_x: s.label_x.clone(),
        label_y: s.label_y.clone(),
        n: d.len(),
        statistic: n_neg as f64,
        one_sided_p: p_neg_tail,
        two_sided_p: (2.0 * p_pos_tail.min(p_neg_tail)).min(1.0),
        details: TestDetails::Sign(SignDetails { n_pos, n_neg, n_zero, n_nonzero: m as usize, p_pos_tail, p_neg_tail }),
    })
}
