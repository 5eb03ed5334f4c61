//! Bracketed bisection for indifference points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::utility::{Crra, OutcomeLottery, UtilityError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no sign change on [{lo}, {hi}]")]
    NoCrossover { lo: f64, hi: f64 },
    #[error("{count} sign changes on [{lo}, {hi}]; expected a single crossing")]
    MultipleCrossings { lo: f64, hi: f64, count: usize },
    #[error("invalid bracket [{lo}, {hi}] with step {step}")]
    BadBracket { lo: f64, hi: f64, step: f64 },
    #[error(transparent)]
    Utility(#[from] UtilityError),
}

/// Search interval for `r` and the step of the sign-change scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub scan_step: f64,
}

impl Default for Bracket {
    fn default() -> Self {
        Bracket { lo: -5.0, hi: 5.0, scan_step: 0.1 }
    }
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Self {
        Bracket { lo, hi, ..Default::default() }
    }

    fn grid(&self) -> Result<Vec<f64>, SolverError> {
        let bad = SolverError::BadBracket { lo: self.lo, hi: self.hi, step: self.scan_step };
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi && self.scan_step > 0.0) {
            return Err(bad);
        }
        let n = ((self.hi - self.lo) / self.scan_step).ceil() as usize;
        if n > 1_000_000 {
            return Err(bad);
        }
        // Built from integer multiples so grid points do not drift.
        let mut g: Vec<f64> = (0..n).map(|i| self.lo + i as f64 * self.scan_step).collect();
        g.push(self.hi);
        Ok(g)
    }
}

/// Root of `f` on the bracket: scan for sign changes, require exactly one,
/// then bisect to machine precision.
pub fn find_root<F>(f: F, bracket: Bracket) -> Result<f64, SolverError>
where
    F: Fn(f64) -> Result<f64, UtilityError>,
{
    let grid = bracket.grid()?;
    let values = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>, _>>()?;

    if values.iter().all(|&v| v == 0.0) {
        // Indistinguishable options: no switch point.
        return Err(SolverError::NoCrossover { lo: bracket.lo, hi: bracket.hi });
    }
    // Each event is either a grid node where f vanishes or a cell whose
    // endpoints have opposite signs.
    let mut events: Vec<(usize, bool)> = Vec::new();
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            if i == 0 || values[i - 1] != 0.0 {
                events.push((i, true));
            }
        } else if i + 1 < grid.len() && values[i + 1] != 0.0 && values[i].signum() != values[i + 1].signum() {
            events.push((i, false));
        }
    }
    let (i, on_node) = match events.as_slice() {
        [] => return Err(SolverError::NoCrossover { lo: bracket.lo, hi: bracket.hi }),
        [e] => *e,
        _ => return Err(SolverError::MultipleCrossings { lo: bracket.lo, hi: bracket.hi, count: events.len() }),
    };
    if on_node {
        return Ok(grid[i]);
    }

    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    let mut f_lo = values[i];
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    let f_hi = f(hi)?;
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

/// CRRA coefficient at which `a` and `b` have equal expected utility.
pub fn crossover_crra(a: &OutcomeLottery, b: &OutcomeLottery, bracket: Bracket) -> Result<f64, SolverError> {
    find_root(
        |r| {
            let r = Crra(r);
            Ok(a.expected_normalized_utility(r)? - b.expected_normalized_utility(r)?)
        },
        bracket,
    )
}
