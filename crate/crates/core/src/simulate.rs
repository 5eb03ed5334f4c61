//! Synthetic cohorts of expected-utility agents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Cohort, CohortMember, SubjectRecord};
use crate::interval::{BoundarySchedule, ATTITUDE_CUTOFFS};
use crate::menu::{simulate_eut_agent, CalibrationError, TaskMenu};
use crate::utility::Crra;

/// Draws closer than this to a cutoff are not "off-cutoff". The default menus
/// sit on a cent grid and their indifference points miss the cutoffs by up to
/// 0.023 (CvU price form).
pub const OFF_CUTOFF_MARGIN: f64 = 0.025;

/// Range of coefficients used by the round-trip oracle.
pub const ROUND_TRIP_RANGE: (f64, f64) = (-1.4, 1.8);

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("bad distribution: {0}")]
    Distribution(String),
    #[error("expected 6 menus, got {0}")]
    MenuCount(usize),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// Distribution of the CRRA coefficient across agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum RDistribution {
    Fixed { r: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl std::str::FromStr for RDistribution {
    type Err = String;
    /// `fixed:R`, `uniform:LO,HI` or `normal:MEAN,SD`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, args) = s.split_once(':').ok_or_else(|| format!("expected KIND:ARGS, got {s:?}"))?;
        let nums = args
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|e| format!("{a:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        match (kind, nums.as_slice()) {
            ("fixed", [r]) => Ok(RDistribution::Fixed { r: *r }),
            ("uniform", [lo, hi]) => Ok(RDistribution::Uniform { lo: *lo, hi: *hi }),
            ("normal", [m, sd]) => Ok(RDistribution::Normal { mean: *m, sd: *sd }),
            _ => Err(format!("cannot parse distribution {s:?}")),
        }
    }
}

type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> f64>;

impl RDistribution {
    fn sampler(&self) -> Result<Sampler, SimulateError> {
        let bad = |e: String| SimulateError::Distribution(e);
        Ok(match *self {
            RDistribution::Fixed { r } => Box::new(move |_| r),
            RDistribution::Uniform { lo, hi } => {
                let u = Uniform::new(lo, hi).map_err(|e| bad(e.to_string()))?;
                Box::new(move |rng| u.sample(rng))
            }
            RDistribution::Normal { mean, sd } => {
                let n = Normal::new(mean, sd).map_err(|e| bad(e.to_string()))?;
                Box::new(move |rng| n.sample(rng))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub n: usize,
    pub seed: u64,
    /// Redraw `r` when it lies within this distance of a cutoff.
    pub min_cutoff_distance: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions { n: 88, seed: 1, min_cutoff_distance: 0.0 }
    }
}

/// Agents and the `r` each one was drawn with.
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub cohort: Cohort,
    pub r: Vec<f64>,
}

/// Every agent answers all six menus with one coefficient.
pub fn simulate_cohort(
    menus: &[TaskMenu],
    dist: RDistribution,
    opts: SimulationOptions,
) -> Result<SyntheticCohort, SimulateError> {
    if menus.len() != 6 {
        return Err(SimulateError::MenuCount(menus.len()));
    }
    let draw = dist.sampler()?;
    let schedule = BoundarySchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut members = Vec::with_capacity(opts.n);
    let mut rs = Vec::with_capacity(opts.n);
    let width = opts.n.to_string().len();
    for i in 0..opts.n {
        let mut r = draw(&mut rng);
        let mut tries = 0;
        while opts.min_cutoff_distance > 0.0 && schedule.distance_to_cutoff(r) < opts.min_cutoff_distance {
            r = draw(&mut rng);
            tries += 1;
            if tries > 10_000 {
                return Err(SimulateError::Distribution("cannot draw away from cutoffs".into()));
            }
        }
        let mut resp = [0u8; 6];
        for (t, m) in menus.iter().enumerate() {
            resp[t] = simulate_eut_agent(m, Crra(r))?;
        }
        let id = format!("S{:0width$}", i + 1);
        let subject = SubjectRecord::from_responses(&id, "SIM", resp).expect("agent responses are in range");
        members.push(CohortMember { subject, demographics: None });
        rs.push(r);
    }
    Ok(SyntheticCohort { cohort: Cohort::from_members(members).expect("generated ids are unique"), r: rs })
}

/// Draws inside attitude interval `index` (0..=8), at least `margin` away
/// from its bounds; open ends extend by one unit.
pub fn interior_draw(index: usize, margin: f64, rng: &mut impl Rng) -> f64 {
    let lo = if index == 0 { ATTITUDE_CUTOFFS[0] - 1.0 } else { ATTITUDE_CUTOFFS[index - 1] };
    let hi = if index == 8 { ATTITUDE_CUTOFFS[7] + 1.0 } else { ATTITUDE_CUTOFFS[index] };
    rng.random_range(lo + margin..hi - margin)
}
