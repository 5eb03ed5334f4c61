//! Event-sourced state machine for one subject's experiment session.
//!
//! Every accepted mutation is recorded as a [`SessionEvent`] and applied to
//! the state through the same fold used by [`Session::replay`].

mod config;
mod run;

pub use config::{DieMode, ExperimentConfig, DEFAULT_FEE, SESSION_PAYOUT_ROUNDING};
pub use run::{Run, RunError};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{DemographicRecord, FieldError, SubjectRecord};
use crate::menu::{BinaryOption, Choice, DesignKind, MenuDomain, MenuRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    Instructions,
    Choosing,
    Questionnaire,
    Reveal,
    Paid,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("action not allowed in stage {0:?}")]
    WrongStage(Stage),
    #[error("task {got} is not the current task (expected {expected})")]
    OutOfOrderTask { expected: u8, got: u8 },
    #[error("row {row} already answered")]
    DuplicateRow { row: usize },
    #[error("row {got} submitted, next row is {expected}")]
    OutOfOrderRow { expected: usize, got: usize },
    #[error("irrational switching at row {row}: option A cannot follow option B")]
    SecondSwitch { row: usize },
    #[error("task {task} takes a single decision, not row choices")]
    WrongInput { task: u8 },
    #[error("decision {0} outside 1..=10")]
    DecisionRange(u8),
    #[error("{what} roll {value} outside {lo}..={hi}")]
    RollRange { what: &'static str, value: u8, lo: u8, hi: u8 },
    #[error("roll for {0} required in manual die mode")]
    MissingRoll(&'static str),
    #[error("questionnaire field {field}: {source}")]
    Questionnaire { field: char, source: FieldError },
    #[error("questionnaire not captured")]
    NoQuestionnaire,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("event {seq}: {msg}")]
    Replay { seq: u64, msg: String },
}

impl SessionError {
    /// Short machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::WrongStage(_) => "wrong_stage",
            SessionError::OutOfOrderTask { .. } => "out_of_order_task",
            SessionError::DuplicateRow { .. } => "duplicate_row",
            SessionError::OutOfOrderRow { .. } => "out_of_order_row",
            SessionError::SecondSwitch { .. } => "irrational_switching",
            SessionError::WrongInput { .. } => "wrong_input",
            SessionError::DecisionRange(_) => "decision_range",
            SessionError::RollRange { .. } => "roll_range",
            SessionError::MissingRoll(_) => "missing_roll",
            SessionError::Questionnaire { .. } => "questionnaire_field",
            SessionError::NoQuestionnaire => "no_questionnaire",
            SessionError::Config(_) => "config",
            SessionError::Replay { .. } => "replay",
        }
    }
}

/// Die values used to pick the paid task, row and lottery outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentRolls {
    /// 1..=6.
    pub task: u8,
    /// 1..=10; only used for H&L and CvU tasks.
    pub row: Option<u8>,
    /// 1..=100; the high amount is realized iff `outcome <= round(100 p_hi)`.
    pub outcome: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoutResult {
    pub selected_task: u8,
    pub selected_row: Option<u8>,
    pub chosen: Option<Choice>,
    /// Realized menu amount: a payoff, or a buy price for price tasks.
    pub realized_amount: f64,
    /// USD paid for the task.
    pub payout: f64,
    pub fee: f64,
    pub total: f64,
    pub rolls: PaymentRolls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    Created { subject_id: String, task_order: [u8; 6] },
    Started,
    ChoiceMade { task: u8, row: usize, choice: Choice },
    DecisionMade { task: u8, decision: u8 },
    TaskCompleted { task: u8, response: u8 },
    ErrorShown { task: u8, row: Option<usize>, code: String, message: String },
    QuestionnaireSubmitted { answers: DemographicRecord },
    PaymentFinalized { manual: bool, result: PayoutResult },
    Paid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    /// Milliseconds since the Unix epoch, or the sequence number under a
    /// logical clock.
    pub timestamp: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    #[default]
    System,
    /// Timestamp equals the sequence number; for reproducible logs.
    Logical,
}

impl Clock {
    fn now(self, seq: u64) -> u64 {
        match self {
            Clock::System => std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            Clock::Logical => seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub subject_id: String,
    pub task_order: [u8; 6],
    pub stage: Stage,
    /// Index into `task_order` of the task being answered.
    pub position: usize,
    /// Row choices per task number (index `task - 1`).
    pub choices: [Vec<Choice>; 6],
    /// Completed responses per task number: safe count or decision.
    pub responses: [Option<u8>; 6],
    pub questionnaire: Option<DemographicRecord>,
    pub payout: Option<PayoutResult>,
}

impl SessionState {
    pub fn current_task(&self) -> Option<u8> {
        (self.stage == Stage::Choosing).then(|| self.task_order[self.position])
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn is_complete(&self) -> bool {
        self.responses.iter().all(Option::is_some)
    }
}

/// What a subject sees of the task in progress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    pub task: u8,
    /// 1-based position in this subject's order.
    pub position: usize,
    pub kind: DesignKind,
    pub domain: MenuDomain,
    pub rows: Vec<MenuRow>,
    pub endowment: Option<f64>,
    pub sell_price: Option<f64>,
    /// Next row to answer (H&L and CvU).
    pub next_row: Option<usize>,
    pub choices: Vec<Choice>,
}

pub(crate) fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn subject_rng(seed: u64, subject_id: &str, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(subject_id));
    rng.set_stream(stream);
    rng
}

/// Task order drawn uniformly from the 720 permutations.
pub fn draw_task_order(seed: u64, subject_id: &str) -> [u8; 6] {
    let mut order = [1u8, 2, 3, 4, 5, 6];
    order.shuffle(&mut subject_rng(seed, subject_id, 0));
    order
}

/// Seeded payment rolls for a subject.
pub fn draw_payment_rolls(seed: u64, subject_id: &str) -> PaymentRolls {
    let mut rng = subject_rng(seed, subject_id, 1);
    PaymentRolls {
        task: rng.random_range(1..=6),
        row: Some(rng.random_range(1..=10)),
        outcome: rng.random_range(1..=100),
    }
}

/// Realized amount of an option for a percentile roll.
pub fn realize(opt: &BinaryOption, outcome_roll: u8) -> f64 {
    let threshold = (100.0 * opt.p_hi).round() as u8;
    if outcome_roll <= threshold {
        opt.hi
    } else {
        opt.lo
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    config: std::sync::Arc<ExperimentConfig>,
    state: SessionState,
    events: Vec<SessionEvent>,
    clock: Clock,
}

impl Session {
    pub fn create(config: std::sync::Arc<ExperimentConfig>, subject_id: &str) -> Result<Session, SessionError> {
        Self::create_with_clock(config, subject_id, Clock::System)
    }

    pub fn create_with_clock(
        config: std::sync::Arc<ExperimentConfig>,
        subject_id: &str,
        clock: Clock,
    ) -> Result<Session, SessionError> {
        config.validate()?;
        let task_order = draw_task_order(config.seed, subject_id);
        let mut s = Session { config, state: empty_state(subject_id), events: Vec::new(), clock };
        s.push(EventPayload::Created { subject_id: subject_id.to_string(), task_order })?;
        Ok(s)
    }

    /// Rebuilds a session by folding its event log.
    pub fn replay(config: std::sync::Arc<ExperimentConfig>, events: &[SessionEvent]) -> Result<Session, SessionError> {
        let first = events.first().ok_or(SessionError::Replay { seq: 0, msg: "empty log".into() })?;
        let EventPayload::Created { subject_id, .. } = &first.payload else {
            return Err(SessionError::Replay { seq: first.seq, msg: "log must start with created".into() });
        };
        let mut s = Session { config, state: empty_state(subject_id), events: Vec::new(), clock: Clock::Logical };
        for (i, e) in events.iter().enumerate() {
            if e.seq != i as u64 + 1 {
                return Err(SessionError::Replay { seq: e.seq, msg: format!("expected sequence {}", i + 1) });
            }
            s.apply(&e.payload).map_err(|err| SessionError::Replay { seq: e.seq, msg: err.to_string() })?;
            s.events.push(e.clone());
        }
        Ok(s)
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn subject_id(&self) -> &str {
        &self.state.subject_id
    }

    /// Appends an event after it has been applied successfully.
    fn push(&mut self, payload: EventPayload) -> Result<&SessionEvent, SessionError> {
        self.apply(&payload)?;
        let seq = self.events.len() as u64 + 1;
        self.events.push(SessionEvent { seq, timestamp: self.clock.now(seq), payload });
        Ok(self.events.last().expect("just pushed"))
    }

    /// Logs a rejected action; the state is untouched.
    fn reject(&mut self, task: u8, row: Option<usize>, err: SessionError) -> SessionError {
        let _ = self.push(EventPayload::ErrorShown { task, row, code: err.code().into(), message: err.to_string() });
        err
    }

    fn apply(&mut self, p: &EventPayload) -> Result<(), SessionError> {
        let st = &mut self.state;
        match p {
            EventPayload::Created { subject_id, task_order } => {
                let mut sorted = *task_order;
                sorted.sort_unstable();
                if sorted != [1, 2, 3, 4, 5, 6] || !self.events.is_empty() {
                    return Err(SessionError::Config("bad created event".into()));
                }
                st.subject_id = subject_id.clone();
                st.task_order = *task_order;
            }
            EventPayload::Started => {
                if st.stage != Stage::Instructions {
                    return Err(SessionError::WrongStage(st.stage));
                }
                st.stage = Stage::Choosing;
            }
            EventPayload::ChoiceMade { task, row, choice } => {
                let t = self.check_current(*task)?;
                if matches!(self.config.menus[t].kind, DesignKind::Bins) {
                    return Err(SessionError::WrongInput { task: *task });
                }
                let st = &mut self.state;
                let done = st.choices[t].len();
                if *row <= done {
                    return Err(SessionError::DuplicateRow { row: *row });
                }
                if *row != done + 1 {
                    return Err(SessionError::OutOfOrderRow { expected: done + 1, got: *row });
                }
                if *choice == Choice::A && st.choices[t].contains(&Choice::B) {
                    return Err(SessionError::SecondSwitch { row: *row });
                }
                st.choices[t].push(*choice);
            }
            EventPayload::DecisionMade { task, decision } => {
                let t = self.check_current(*task)?;
                if !matches!(self.config.menus[t].kind, DesignKind::Bins) {
                    return Err(SessionError::WrongInput { task: *task });
                }
                if !(1..=10).contains(decision) {
                    return Err(SessionError::DecisionRange(*decision));
                }
            }
            EventPayload::TaskCompleted { task, response } => {
                let t = self.check_current(*task)?;
                let consistent = match self.config.menus[t].kind {
                    DesignKind::Bins => (1..=10).contains(response),
                    _ => {
                        let c = &self.state.choices[t];
                        c.len() == 10 && c.iter().filter(|x| **x == Choice::A).count() == *response as usize
                    }
                };
                if !consistent {
                    return Err(SessionError::Replay {
                        seq: 0,
                        msg: format!("task {task} completion disagrees with choices"),
                    });
                }
                let st = &mut self.state;
                st.responses[t] = Some(*response);
                st.position += 1;
                if st.position == 6 {
                    st.stage = Stage::Questionnaire;
                }
            }
            EventPayload::ErrorShown { .. } => {}
            EventPayload::QuestionnaireSubmitted { answers } => {
                if st.stage != Stage::Questionnaire || st.questionnaire.is_some() {
                    return Err(SessionError::WrongStage(st.stage));
                }
                answers.validate().map_err(|source| SessionError::Questionnaire { field: source.field(), source })?;
                st.questionnaire = Some(answers.clone());
            }
            EventPayload::PaymentFinalized { result, .. } => {
                if st.stage != Stage::Questionnaire {
                    return Err(SessionError::WrongStage(st.stage));
                }
                if st.questionnaire.is_none() {
                    return Err(SessionError::NoQuestionnaire);
                }
                st.payout = Some(result.clone());
                st.stage = Stage::Reveal;
            }
            EventPayload::Paid => {
                if st.stage != Stage::Reveal {
                    return Err(SessionError::WrongStage(st.stage));
                }
                st.stage = Stage::Paid;
            }
        }
        Ok(())
    }

    fn check_current(&self, task: u8) -> Result<usize, SessionError> {
        match self.state.current_task() {
            None => Err(SessionError::WrongStage(self.state.stage)),
            Some(cur) if cur != task => Err(SessionError::OutOfOrderTask { expected: cur, got: task }),
            Some(_) => Ok(task as usize - 1),
        }
    }

    /// Leaves the instructions screen.
    pub fn start(&mut self) -> Result<(), SessionError> {
        self.push(EventPayload::Started).map(|_| ())
    }

    pub fn current_view(&self) -> Result<TaskView, SessionError> {
        let task = self.state.current_task().ok_or(SessionError::WrongStage(self.state.stage))?;
        let t = task as usize - 1;
        let m = &self.config.menus[t];
        let done = self.state.choices[t].len();
        Ok(TaskView {
            task,
            position: self.state.position + 1,
            kind: m.kind,
            domain: m.domain,
            rows: m.rows.clone(),
            endowment: m.endowment,
            sell_price: m.sell_price,
            next_row: (m.kind != DesignKind::Bins).then_some(done + 1),
            choices: self.state.choices[t].clone(),
        })
    }

    /// Records one H&L/CvU row. Completes the task after row 10. Rejections
    /// are logged as `ErrorShown` and leave the state unchanged.
    pub fn submit_choice(&mut self, task: u8, row: usize, choice: Choice) -> Result<Option<usize>, SessionError> {
        if let Err(e) = self.push(EventPayload::ChoiceMade { task, row, choice }) {
            return Err(self.reject(task, Some(row), e));
        }
        let t = task as usize - 1;
        let choices = &self.state.choices[t];
        if choices.len() == 10 {
            let safe = choices.iter().filter(|c| **c == Choice::A).count() as u8;
            self.push(EventPayload::TaskCompleted { task, response: safe })?;
            Ok(None)
        } else {
            Ok(Some(choices.len() + 1))
        }
    }

    /// Records the single Bins decision and completes the task.
    pub fn submit_decision(&mut self, task: u8, decision: u8) -> Result<(), SessionError> {
        if let Err(e) = self.push(EventPayload::DecisionMade { task, decision }) {
            return Err(self.reject(task, None, e));
        }
        self.push(EventPayload::TaskCompleted { task, response: decision }).map(|_| ())
    }

    pub fn capture_questionnaire(&mut self, answers: DemographicRecord) -> Result<(), SessionError> {
        self.push(EventPayload::QuestionnaireSubmitted { answers }).map(|_| ())
    }

    /// Selects and realizes the paid task. In manual mode `rolls` must be
    /// given; in seeded mode they are drawn unless supplied.
    pub fn finalize_payment(&mut self, rolls: Option<PaymentRolls>) -> Result<PayoutResult, SessionError> {
        if self.state.stage != Stage::Questionnaire {
            return Err(SessionError::WrongStage(self.state.stage));
        }
        if self.state.questionnaire.is_none() {
            return Err(SessionError::NoQuestionnaire);
        }
        let manual = rolls.is_some();
        let rolls = match (rolls, self.config.die_mode) {
            (Some(r), _) => r,
            (None, DieMode::SeededRng) => draw_payment_rolls(self.config.seed, &self.state.subject_id),
            (None, DieMode::ManualEntry) => return Err(SessionError::MissingRoll("task")),
        };
        let result = self.compute_payout(rolls)?;
        self.push(EventPayload::PaymentFinalized { manual, result: result.clone() })?;
        Ok(result)
    }

    fn compute_payout(&self, rolls: PaymentRolls) -> Result<PayoutResult, SessionError> {
        let range = |what, value: u8, lo, hi| {
            if (lo..=hi).contains(&value) {
                Ok(value)
            } else {
                Err(SessionError::RollRange { what, value, lo, hi })
            }
        };
        let task = range("task", rolls.task, 1, 6)?;
        let outcome = range("outcome", rolls.outcome, 1, 100)?;
        let t = task as usize - 1;
        let menu = &self.config.menus[t];
        let response = self.state.responses[t].ok_or(SessionError::WrongStage(self.state.stage))?;
        let (row, chosen, opt) = match menu.kind {
            DesignKind::Bins => (None, None, menu.rows[response as usize - 1].option_a),
            DesignKind::Hl | DesignKind::Cvu => {
                let row = range("row", rolls.row.ok_or(SessionError::MissingRoll("row"))?, 1, 10)?;
                let choice = self.state.choices[t][row as usize - 1];
                let r = &menu.rows[row as usize - 1];
                let opt = match choice {
                    Choice::A => r.option_a,
                    Choice::B => r.option_b.expect("two-option row"),
                };
                (Some(row), Some(choice), opt)
            }
        };
        let realized_amount = realize(&opt, outcome);
        let payout = menu.payout_for_amount(realized_amount, self.config.payout_rounding);
        let fee = self.config.fee;
        Ok(PayoutResult {
            selected_task: task,
            selected_row: row,
            chosen,
            realized_amount,
            payout,
            fee,
            total: self.config.payout_rounding.money(payout + fee),
            rolls: PaymentRolls { row, ..rolls },
        })
    }

    /// Answers every remaining task in order with the given responses
    /// (safe count or decision per task number).
    pub fn answer_all(&mut self, responses: [u8; 6]) -> Result<(), SessionError> {
        if self.state.stage == Stage::Instructions {
            self.start()?;
        }
        while let Some(task) = self.state.current_task() {
            let t = task as usize - 1;
            let n = responses[t];
            if self.config.menus[t].kind == DesignKind::Bins {
                self.submit_decision(task, n)?;
            } else {
                if n > 10 {
                    return Err(SessionError::DecisionRange(n));
                }
                for row in self.state.choices[t].len() + 1..=10 {
                    let c = if row <= n as usize { Choice::A } else { Choice::B };
                    self.submit_choice(task, row, c)?;
                }
            }
        }
        Ok(())
    }

    /// Experimenter confirms the cash payment.
    pub fn mark_paid(&mut self) -> Result<(), SessionError> {
        self.push(EventPayload::Paid).map(|_| ())
    }

    /// Dataset record of a completed session.
    pub fn subject_record(&self, session_label: &str) -> Option<SubjectRecord> {
        let r: Vec<u8> = self.state.responses.iter().copied().collect::<Option<_>>()?;
        SubjectRecord::from_responses(&self.state.subject_id, session_label, r.try_into().ok()?).ok()
    }
}

fn empty_state(subject_id: &str) -> SessionState {
    SessionState {
        subject_id: subject_id.to_string(),
        task_order: [1, 2, 3, 4, 5, 6],
        stage: Stage::Instructions,
        position: 0,
        choices: Default::default(),
        responses: [None; 6],
        questionnaire: None,
        payout: None,
    }
}

pub fn events_to_jsonl(events: &[SessionEvent]) -> String {
    events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
}

pub fn events_from_jsonl(doc: &str) -> Result<Vec<SessionEvent>, SessionError> {
    doc.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SessionError::Replay { seq: i as u64 + 1, msg: e.to_string() })
        })
        .collect()
}

#[cfg(test)]
mod tests;
