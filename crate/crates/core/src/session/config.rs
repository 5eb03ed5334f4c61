use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::menu::{default_task_menus, task_design, TaskMenu, DEFAULT_ENDOWMENT};
use crate::utility::MoneyRounding;

pub const DEFAULT_FEE: f64 = 5.0;

/// Widgets and dollars are both rounded to cents when a session pays out.
pub const SESSION_PAYOUT_ROUNDING: MoneyRounding = MoneyRounding::CENTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DieMode {
    #[default]
    SeededRng,
    /// The experimenter enters physical die results.
    ManualEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Menus for tasks 1..=6.
    pub menus: Vec<TaskMenu>,
    pub endowment: f64,
    pub fee: f64,
    pub seed: u64,
    pub die_mode: DieMode,
    pub payout_rounding: MoneyRounding,
}

impl ExperimentConfig {
    pub fn new(menus: Vec<TaskMenu>, seed: u64, die_mode: DieMode) -> Result<Self, SessionError> {
        let c = ExperimentConfig {
            menus,
            endowment: DEFAULT_ENDOWMENT,
            fee: DEFAULT_FEE,
            seed,
            die_mode,
            payout_rounding: SESSION_PAYOUT_ROUNDING,
        };
        c.validate()?;
        Ok(c)
    }

    /// Default reconstructed menus with the given H&L high payoff.
    pub fn with_default_menus(high_b: f64, seed: u64, die_mode: DieMode) -> Result<Self, SessionError> {
        let menus = default_task_menus(high_b).map_err(|e| SessionError::Config(e.to_string()))?;
        Self::new(menus.to_vec(), seed, die_mode)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.menus.len() != 6 {
            return Err(SessionError::Config(format!("expected 6 task menus, got {}", self.menus.len())));
        }
        for (i, m) in self.menus.iter().enumerate() {
            let want = task_design(i as u8 + 1).expect("task 1..=6");
            if (m.kind, m.domain) != want {
                return Err(SessionError::Config(format!(
                    "task {} must be {} {}, got {} {}",
                    i + 1,
                    want.0,
                    want.1,
                    m.kind,
                    m.domain
                )));
            }
            m.validate().map_err(|e| SessionError::Config(format!("task {}: {e}", i + 1)))?;
        }
        if !(self.fee >= 0.0 && self.fee.is_finite()) {
            return Err(SessionError::Config("fee must be a non-negative amount".into()));
        }
        if !(self.endowment > 0.0) {
            return Err(SessionError::Config("endowment must be positive".into()));
        }
        Ok(())
    }

    /// Smallest and largest possible session totals.
    pub fn total_bounds(&self) -> (f64, f64) {
        let lo = self.menus.iter().map(|m| m.min_payoff(self.payout_rounding)).fold(f64::INFINITY, f64::min);
        let hi = self.menus.iter().map(|m| m.max_payoff(self.payout_rounding)).fold(f64::NEG_INFINITY, f64::max);
        (self.payout_rounding.money(lo + self.fee), self.payout_rounding.money(hi + self.fee))
    }
}
