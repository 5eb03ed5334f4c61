//! Multiple price list risk elicitation: CRRA utility and single-good
//! duality, menu calibration, dataset ingest, paired tests and a replayable
//! session engine.

// Negated float comparisons are used as NaN-rejecting guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dataset;
pub mod interval;
pub mod menu;
pub mod reproduce;
pub mod session;
pub mod simulate;
pub mod solver;
pub mod stats;
pub mod utility;

pub use interval::{
    classify_attitude, interval_from_response, midpoint_crra, BoundarySchedule, BroadAttitude, CrraInterval,
    RiskCategory, ATTITUDE_CUTOFFS,
};
pub use menu::{
    bins_menu, boundaries_from_menu, cvu_menu, hl_menu, simulate_eut_agent, to_price_domain, Choice, DesignKind,
    MenuDomain, MenuRow, TaskMenu,
};
pub use solver::{crossover_crra, Bracket};
pub use utility::{Crra, MoneyRounding, OutcomeLottery, PriceLottery};

pub use analysis::{cohort_summary, run_paired_tests, AnalysisError, PairedTests, SummaryStats};
pub use dataset::{
    bundled_cohort, export_jsonl, import_jsonl, load_cohort_dir, load_demographics, load_session_table, Cohort,
    DemographicRecord, IngestError, SubjectRecord,
};
pub use reproduce::{reproduce, CheckStatus, ConditionalInputs, ReproductionReport};
pub use session::{
    DieMode, EventPayload, ExperimentConfig, PaymentRolls, PayoutResult, Run, RunError, Session, SessionError,
    SessionEvent, SessionState, Stage,
};
pub use simulate::{simulate_cohort, RDistribution, SimulationOptions};
pub use stats::{PairedSample, StatsError, TestReport};
