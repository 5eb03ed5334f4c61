//! Risk-attitude intervals implied by the number of safe choices.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::menu::DesignKind;

/// The eight CRRA cutoffs separating the nine attitude categories.
pub const ATTITUDE_CUTOFFS: [f64; 8] = [-0.95, -0.49, -0.15, 0.15, 0.41, 0.68, 0.97, 1.37];

/// Number of attitude intervals.
pub const N_INTERVALS: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    #[error("boundary schedule needs 8 cutoffs, got {0}")]
    Length(usize),
    #[error("boundary schedule is not strictly increasing at position {0}")]
    NotIncreasing(usize),
    #[error("response {n} out of range for {kind}")]
    ResponseRange { kind: DesignKind, n: i64 },
    #[error("interval index {0} out of range")]
    Index(usize),
}

/// Ordered CRRA cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySchedule {
    cutoffs: Vec<f64>,
}

impl Default for BoundarySchedule {
    fn default() -> Self {
        BoundarySchedule { cutoffs: ATTITUDE_CUTOFFS.to_vec() }
    }
}

impl BoundarySchedule {
    pub fn new(cutoffs: Vec<f64>) -> Result<Self, IntervalError> {
        if cutoffs.len() != N_INTERVALS - 1 {
            return Err(IntervalError::Length(cutoffs.len()));
        }
        for i in 1..cutoffs.len() {
            if !(cutoffs[i] > cutoffs[i - 1]) {
                return Err(IntervalError::NotIncreasing(i));
            }
        }
        Ok(BoundarySchedule { cutoffs })
    }

    pub fn cutoffs(&self) -> &[f64] {
        &self.cutoffs
    }

    /// Index of the interval holding `r`. A value sitting exactly on a
    /// cutoff belongs to the upper interval, which is where an indifferent
    /// agent that breaks ties toward the safe option ends up.
    pub fn index_of(&self, r: f64) -> usize {
        self.cutoffs.iter().take_while(|&&c| r >= c).count()
    }

    pub fn interval(&self, index: usize) -> Result<CrraInterval, IntervalError> {
        if index >= N_INTERVALS {
            return Err(IntervalError::Index(index));
        }
        Ok(CrraInterval {
            index,
            lo: if index == 0 { None } else { Some(self.cutoffs[index - 1]) },
            hi: if index == N_INTERVALS - 1 { None } else { Some(self.cutoffs[index]) },
            category: RiskCategory::ALL[index],
        })
    }

    /// Distance from `r` to the closest cutoff.
    pub fn distance_to_cutoff(&self, r: f64) -> f64 {
        self.cutoffs.iter().map(|c| (r - c).abs()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskCategory {
    HighlyRiskLoving,
    VeryRiskLoving,
    RiskLoving,
    RiskNeutral,
    SlightlyRiskAverse,
    RiskAverse,
    VeryRiskAverse,
    HighlyRiskAverse,
    StayInBed,
}

impl RiskCategory {
    pub const ALL: [RiskCategory; N_INTERVALS] = [
        RiskCategory::HighlyRiskLoving,
        RiskCategory::VeryRiskLoving,
        RiskCategory::RiskLoving,
        RiskCategory::RiskNeutral,
        RiskCategory::SlightlyRiskAverse,
        RiskCategory::RiskAverse,
        RiskCategory::VeryRiskAverse,
        RiskCategory::HighlyRiskAverse,
        RiskCategory::StayInBed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RiskCategory::HighlyRiskLoving => "Highly risk-loving",
            RiskCategory::VeryRiskLoving => "Very risk-loving",
            RiskCategory::RiskLoving => "Risk-loving",
            RiskCategory::RiskNeutral => "Risk-neutral",
            RiskCategory::SlightlyRiskAverse => "Slightly risk-averse",
            RiskCategory::RiskAverse => "Risk-averse",
            RiskCategory::VeryRiskAverse => "Very risk-averse",
            RiskCategory::HighlyRiskAverse => "Highly risk-averse",
            RiskCategory::StayInBed => "Stay in bed (extremely risk-averse)",
        }
    }

    /// Position 0..=8 in the table.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Questionnaire code 1..=9 (fields T and U).
    pub fn from_code(code: u8) -> Option<Self> {
        (1..=9).contains(&code).then(|| Self::ALL[code as usize - 1])
    }

    pub fn broad(self) -> BroadAttitude {
        match self.index() {
            0..=2 => BroadAttitude::Loving,
            3 => BroadAttitude::Neutral,
            _ => BroadAttitude::Averse,
        }
    }
}

impl fmt::Display for RiskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BroadAttitude {
    Loving,
    Neutral,
    Averse,
}

/// Bounds on `r` implied by a response, with its attitude label. Open ends
/// are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrraInterval {
    pub index: usize,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub category: RiskCategory,
}

impl CrraInterval {
    pub fn contains(&self, r: f64) -> bool {
        self.lo.is_none_or(|lo| r >= lo) && self.hi.is_none_or(|hi| r < hi)
    }

    /// Interior midpoint; the open-ended intervals take their finite bound.
    pub fn midpoint(&self) -> f64 {
        match (self.lo, self.hi) {
            (Some(lo), Some(hi)) => 0.5 * (lo + hi),
            (None, Some(hi)) => hi,
            (Some(lo), None) => lo,
            (None, None) => 0.0,
        }
    }

    pub fn broad(&self) -> BroadAttitude {
        self.category.broad()
    }
}

impl fmt::Display for CrraInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.lo, self.hi) {
            (None, Some(hi)) => write!(f, "r < {hi}"),
            (Some(lo), None) => write!(f, "r > {lo}"),
            (Some(lo), Some(hi)) => write!(f, "{lo} < r < {hi}"),
            (None, None) => write!(f, "any r"),
        }?;
        write!(f, " ({})", self.category)
    }
}

/// Interval index for a safe count (HL, CvU) or decision number (Bins).
pub fn interval_index(kind: DesignKind, n: u8) -> Result<usize, IntervalError> {
    let n_i = n as i64;
    match kind {
        DesignKind::Hl | DesignKind::Cvu if n <= 10 => Ok((n_i - 1).clamp(0, 8) as usize),
        DesignKind::Bins if (1..=10).contains(&n) => Ok((n_i - 1).min(8) as usize),
        _ => Err(IntervalError::ResponseRange { kind, n: n_i }),
    }
}

pub fn interval_from_response(kind: DesignKind, n: u8) -> Result<CrraInterval, IntervalError> {
    BoundarySchedule::default().interval(interval_index(kind, n)?)
}

pub fn midpoint_crra(iv: &CrraInterval) -> f64 {
    iv.midpoint()
}

pub fn classify_attitude(iv: &CrraInterval) -> RiskCategory {
    iv.category
}

pub fn broad(iv: &CrraInterval) -> BroadAttitude {
    iv.broad()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lookup() {
        let iv = interval_from_response(DesignKind::Hl, 6).unwrap();
        assert_eq!((iv.lo, iv.hi), (Some(0.41), Some(0.68)));
        assert_eq!(iv.category.label(), "Risk-averse");
        assert_eq!(
            interval_from_response(DesignKind::Hl, 0).unwrap(),
            interval_from_response(DesignKind::Hl, 1).unwrap()
        );
        assert_eq!(interval_from_response(DesignKind::Hl, 0).unwrap().hi, Some(-0.95));
        assert_eq!(
            interval_from_response(DesignKind::Cvu, 9).unwrap(),
            interval_from_response(DesignKind::Cvu, 10).unwrap()
        );
        let b10 = interval_from_response(DesignKind::Bins, 10).unwrap();
        assert_eq!((b10.lo, b10.hi), (Some(1.37), None));
        assert_eq!(interval_from_response(DesignKind::Bins, 9).unwrap(), b10);
        assert_eq!(interval_from_response(DesignKind::Bins, 8).unwrap().category, RiskCategory::HighlyRiskAverse);
        assert!(interval_from_response(DesignKind::Bins, 0).is_err());
        assert!(interval_from_response(DesignKind::Hl, 11).is_err());
    }

    #[test]
    fn midpoints() {
        let mid = |n| interval_from_response(DesignKind::Hl, n).unwrap().midpoint();
        assert!((mid(6) - 0.545).abs() < 1e-12);
        assert!(mid(4).abs() < 1e-12);
        assert_eq!(mid(10), 1.37);
        assert_eq!(mid(0), -0.95);
    }

    #[test]
    fn broad_collapse() {
        let b = |n| interval_from_response(DesignKind::Hl, n).unwrap().broad();
        assert_eq!(b(3), BroadAttitude::Loving);
        assert_eq!(b(4), BroadAttitude::Neutral);
        assert_eq!(b(5), BroadAttitude::Averse);
        for n in 0..=10 {
            let iv = interval_from_response(DesignKind::Hl, n).unwrap();
            let expect = if iv.hi.is_some_and(|h| h <= -0.15) {
                BroadAttitude::Loving
            } else if iv.lo.is_some_and(|l| l >= 0.15) {
                BroadAttitude::Averse
            } else {
                BroadAttitude::Neutral
            };
            assert_eq!(iv.broad(), expect, "n={n}");
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(BoundarySchedule::new(vec![0.0; 7]).is_err());
        assert!(matches!(
            BoundarySchedule::new(vec![0.0, 0.1, 0.2, 0.2, 0.3, 0.4, 0.5, 0.6]),
            Err(IntervalError::NotIncreasing(3))
        ));
        let s = BoundarySchedule::default();
        assert_eq!(s.index_of(-3.0), 0);
        assert_eq!(s.index_of(0.0), 3);
        assert_eq!(s.index_of(0.15), 4);
        assert_eq!(s.index_of(9.0), 8);
        for i in 0..9 {
            let iv = s.interval(i).unwrap();
            assert!(iv.contains(iv.midpoint()) || i == 0 || i == 8);
        }
    }

    #[test]
    fn stated_codes() {
        assert_eq!(RiskCategory::from_code(5), Some(RiskCategory::SlightlyRiskAverse));
        assert_eq!(RiskCategory::from_code(9), Some(RiskCategory::StayInBed));
        assert_eq!(RiskCategory::from_code(0), None);
        assert_eq!(RiskCategory::from_code(10), None);
    }
}
