use std::sync::Arc;

use super::*;
use crate::dataset::{bundled_files, load_demographics, load_session_table};

fn config(die: DieMode) -> Arc<ExperimentConfig> {
    Arc::new(ExperimentConfig::with_default_menus(23.08, 42, die).unwrap())
}

fn answers() -> DemographicRecord {
    let (_, _, demo) = bundled_files().next().unwrap();
    load_demographics(demo).unwrap().remove(0).1
}

fn finished(id: &str, responses: [u8; 6]) -> Session {
    let mut s = Session::create_with_clock(config(DieMode::SeededRng), id, Clock::Logical).unwrap();
    s.answer_all(responses).unwrap();
    s.capture_questionnaire(answers()).unwrap();
    s
}

#[test]
fn order_is_seeded_permutation() {
    let a = draw_task_order(7, "A1");
    assert_eq!(a, draw_task_order(7, "A1"));
    let mut sorted = a;
    sorted.sort_unstable();
    assert_eq!(sorted, [1, 2, 3, 4, 5, 6]);
    let distinct: std::collections::HashSet<_> = (0..50).map(|i| draw_task_order(7, &format!("S{i}"))).collect();
    assert!(distinct.len() > 40);
}

#[test]
fn five_task_config_rejected() {
    let mut menus = crate::menu::default_task_menus(23.10).unwrap().to_vec();
    menus.pop();
    assert!(matches!(ExperimentConfig::new(menus, 1, DieMode::SeededRng), Err(SessionError::Config(_))));
    let mut menus = crate::menu::default_task_menus(23.10).unwrap().to_vec();
    menus.swap(0, 5);
    assert!(ExperimentConfig::new(menus, 1, DieMode::SeededRng).is_err());
}

#[test]
fn single_switch_enforced() {
    let mut s = Session::create_with_clock(config(DieMode::SeededRng), "X", Clock::Logical).unwrap();
    assert!(matches!(s.submit_choice(1, 1, Choice::A), Err(SessionError::WrongStage(Stage::Instructions))));
    s.start().unwrap();
    let task = s.state().current_task().unwrap();
    if s.config().menus[task as usize - 1].kind == DesignKind::Bins {
        s.submit_decision(task, 4).unwrap();
    }
    let task = s.state().current_task().unwrap();
    if s.config().menus[task as usize - 1].kind == DesignKind::Bins {
        s.submit_decision(task, 4).unwrap();
    }
    let task = s.state().current_task().unwrap();
    assert_ne!(s.config().menus[task as usize - 1].kind, DesignKind::Bins);
    assert_eq!(s.submit_choice(task, 1, Choice::A).unwrap(), Some(2));
    assert_eq!(s.submit_choice(task, 2, Choice::B).unwrap(), Some(3));
    let before = s.state().hash();
    let err = s.submit_choice(task, 3, Choice::A).unwrap_err();
    assert_eq!(err, SessionError::SecondSwitch { row: 3 });
    assert_eq!(s.state().hash(), before);
    let last = s.events().last().unwrap();
    assert!(
        matches!(&last.payload, EventPayload::ErrorShown { code, row: Some(3), .. } if code == "irrational_switching")
    );
    assert!(matches!(s.submit_choice(task, 2, Choice::B), Err(SessionError::DuplicateRow { row: 2 })));
    assert!(matches!(s.submit_choice(task, 5, Choice::B), Err(SessionError::OutOfOrderRow { expected: 3, got: 5 })));
    let other = (1..=6).find(|t| *t != task).unwrap();
    assert!(matches!(s.submit_choice(other, 3, Choice::B), Err(SessionError::OutOfOrderTask { .. })));
    assert_eq!(s.state().hash(), before);
}

#[test]
fn bins_decision_completes_task() {
    let mut s = Session::create_with_clock(config(DieMode::SeededRng), "Y", Clock::Logical).unwrap();
    s.start().unwrap();
    while let Some(task) = s.state().current_task() {
        if s.config().menus[task as usize - 1].kind == DesignKind::Bins {
            assert!(matches!(s.submit_choice(task, 1, Choice::A), Err(SessionError::WrongInput { .. })));
            assert!(matches!(s.submit_decision(task, 11), Err(SessionError::DecisionRange(11))));
            s.submit_decision(task, 4).unwrap();
            assert_eq!(s.state().responses[task as usize - 1], Some(4));
            break;
        }
        for row in 1..=10 {
            s.submit_choice(task, row, Choice::A).unwrap();
        }
    }
}

#[test]
fn full_session_and_replay() {
    let mut s = finished("Z1", [6, 5, 4, 7, 3, 10]);
    assert_eq!(s.state().stage, Stage::Questionnaire);
    assert_eq!(s.state().responses, [Some(6), Some(5), Some(4), Some(7), Some(3), Some(10)]);
    assert!(s.mark_paid().is_err());
    let p = s.finalize_payment(None).unwrap();
    assert_eq!(s.state().stage, Stage::Reveal);
    assert!(s.finalize_payment(None).is_err());
    s.mark_paid().unwrap();
    let (lo, hi) = s.config().total_bounds();
    assert!(p.total >= lo && p.total <= hi);

    let log = events_to_jsonl(s.events());
    let back = events_from_jsonl(&log).unwrap();
    let r = Session::replay(Arc::new(s.config().clone()), &back).unwrap();
    assert_eq!(r.state().hash(), s.state().hash());
    assert_eq!(r.state(), s.state());
}

#[test]
fn replay_rejects_gaps_and_tampering() {
    let s = finished("Z2", [4; 6]);
    let cfg = Arc::new(s.config().clone());
    let mut ev = s.events().to_vec();
    ev.remove(3);
    assert!(matches!(Session::replay(cfg.clone(), &ev), Err(SessionError::Replay { .. })));
    let mut ev = s.events().to_vec();
    for e in &mut ev {
        if let EventPayload::TaskCompleted { response, .. } = &mut e.payload {
            *response = 9;
        }
    }
    assert!(Session::replay(cfg, &ev).is_err());
}

#[test]
fn no_outcome_before_reveal() {
    let mut s = finished("Z3", [5; 6]);
    s.finalize_payment(None).unwrap();
    let idx = s.events().iter().position(|e| matches!(e.payload, EventPayload::PaymentFinalized { .. })).unwrap();
    for e in &s.events()[..idx] {
        let j = serde_json::to_string(e).unwrap();
        assert!(!j.contains("payout") && !j.contains("realized") && !j.contains("rolls"), "{j}");
    }
}

#[test]
fn manual_rolls() {
    let mut s = Session::create_with_clock(config(DieMode::ManualEntry), "M1", Clock::Logical).unwrap();
    s.answer_all([10, 10, 10, 10, 10, 10]).unwrap();
    s.capture_questionnaire(answers()).unwrap();
    assert!(matches!(s.finalize_payment(None), Err(SessionError::MissingRoll(_))));
    assert!(matches!(
        s.finalize_payment(Some(PaymentRolls { task: 7, row: Some(1), outcome: 1 })),
        Err(SessionError::RollRange { what: "task", value: 7, .. })
    ));
    // Task 1 (H&L payoff), row 1, all safe: option A of row 1 is (0.1, 12.00; 0.9, 9.60).
    let p = s.finalize_payment(Some(PaymentRolls { task: 1, row: Some(1), outcome: 11 })).unwrap();
    assert_eq!(p.chosen, Some(Choice::A));
    assert_eq!(p.realized_amount, 9.60);
    assert_eq!(p.total, 14.60);
    assert!(matches!(&s.events().last().unwrap().payload, EventPayload::PaymentFinalized { manual: true, .. }));
}

#[test]
fn extreme_payouts() {
    // Price H&L row 10 option B pays the maximum; Bins decision 1 low pays the minimum.
    let mut s = Session::create_with_clock(config(DieMode::ManualEntry), "E1", Clock::Logical).unwrap();
    s.answer_all([0, 0, 1, 1, 0, 0]).unwrap();
    s.capture_questionnaire(answers()).unwrap();
    let mut lo = s.clone();
    let p = s.finalize_payment(Some(PaymentRolls { task: 6, row: Some(10), outcome: 1 })).unwrap();
    assert_eq!(p.total, 28.08);
    let p = lo.finalize_payment(Some(PaymentRolls { task: 3, row: None, outcome: 100 })).unwrap();
    assert_eq!(p.total, 5.60);
}

#[test]
fn questionnaire_validation() {
    let mut s = Session::create_with_clock(config(DieMode::SeededRng), "Q1", Clock::Logical).unwrap();
    assert!(matches!(s.capture_questionnaire(answers()), Err(SessionError::WrongStage(Stage::Instructions))));
    s.answer_all([4; 6]).unwrap();
    let mut bad = answers();
    bad.gender = 2;
    assert!(matches!(s.capture_questionnaire(bad), Err(SessionError::Questionnaire { field: 'B', .. })));
    assert!(s.state().questionnaire.is_none());
    let mut ok = answers();
    ok.stated_attitude_general = 5;
    ok.stated_attitude_lottery = 4;
    s.capture_questionnaire(ok).unwrap();
    assert!(s.capture_questionnaire(answers()).is_err());
}

#[test]
fn run_duplicate_and_export() {
    let mut run = Run::new("R", (*config(DieMode::SeededRng)).clone()).unwrap();
    run.clock = Clock::Logical;
    let (t, d) = run.export_cohort().unwrap();
    assert_eq!(load_session_table(&t).unwrap().records.len(), 0);
    assert_eq!(load_demographics(&d).unwrap().len(), 0);
    run.create_session("R1").unwrap();
    assert!(matches!(run.create_session("R1"), Err(RunError::DuplicateSubject(_))));
    for (id, resp) in [("R1", [6, 5, 4, 7, 3, 10]), ("R2", [0, 10, 1, 10, 2, 9])] {
        if id != "R1" {
            run.create_session(id).unwrap();
        }
        let s = run.session_mut(id).unwrap();
        s.answer_all(resp).unwrap();
        s.capture_questionnaire(answers()).unwrap();
        s.finalize_payment(None).unwrap();
    }
    // Only PAID sessions are exported.
    assert_eq!(run.paid_cohort().unwrap().len(), 0);
    run.session_mut("R1").unwrap().mark_paid().unwrap();
    run.session_mut("R2").unwrap().mark_paid().unwrap();
    let (t, d) = run.export_cohort().unwrap();
    let table = load_session_table(&t).unwrap();
    assert_eq!(table.records.len(), 2);
    assert_eq!(table.records[0].raw[0], "SSSSSS / RRRR");
    assert_eq!(table.records[1].responses, [0, 10, 1, 10, 2, 9]);
    assert_eq!(load_demographics(&d).unwrap().len(), 2);
    run.closed = true;
    assert!(matches!(run.create_session("R3"), Err(RunError::Closed)));
}

#[test]
fn capacity() {
    let mut run = Run::new("C", (*config(DieMode::SeededRng)).clone()).unwrap();
    run.capacity = Some(1);
    run.create_session("a").unwrap();
    assert!(matches!(run.create_session("b"), Err(RunError::Full(1))));
}
