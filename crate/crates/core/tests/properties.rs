use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use mplab_core::dataset::{
    bundled_cohort, bundled_files, export_jsonl, import_jsonl, load_demographics, load_session_table,
    parse_choice_string, render_choice_string, render_session_table, SubjectRecord, TASK_KINDS,
};
use mplab_core::interval::interval_from_response;
use mplab_core::menu::{default_task_menus, parse_menu, render_menu, simulate_eut_agent, Choice, DesignKind};
use mplab_core::session::{
    events_from_jsonl, events_to_jsonl, Clock, DieMode, ExperimentConfig, Session, SessionError,
};
use mplab_core::simulate::{simulate_cohort, RDistribution, SimulationOptions, OFF_CUTOFF_MARGIN};
use mplab_core::utility::Crra;

fn config() -> Arc<ExperimentConfig> {
    static CONFIG: OnceLock<Arc<ExperimentConfig>> = OnceLock::new();
    CONFIG.get_or_init(|| Arc::new(ExperimentConfig::with_default_menus(23.08, 3, DieMode::SeededRng).unwrap())).clone()
}

fn response_for(kind: DesignKind) -> impl Strategy<Value = u8> {
    if kind == DesignKind::Bins {
        1u8..=10
    } else {
        0u8..=10
    }
}

fn responses() -> impl Strategy<Value = [u8; 6]> {
    (
        response_for(TASK_KINDS[0]),
        response_for(TASK_KINDS[1]),
        response_for(TASK_KINDS[2]),
        response_for(TASK_KINDS[3]),
        response_for(TASK_KINDS[4]),
        response_for(TASK_KINDS[5]),
    )
        .prop_map(|(a, b, c, d, e, f)| [a, b, c, d, e, f])
}

proptest! {
    #[test]
    fn choice_strings_round_trip(resp in responses()) {
        for t in 0..6 {
            let s = render_choice_string(TASK_KINDS[t], resp[t]).unwrap();
            let back = parse_choice_string(&s, TASK_KINDS[t]).unwrap();
            prop_assert_eq!(back.response, resp[t]);
            prop_assert_eq!(back.symbol_total, 10);
        }
    }

    #[test]
    fn session_table_round_trips(rows in prop::collection::vec(responses(), 0..30)) {
        let records: Vec<SubjectRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| SubjectRecord::from_responses(&format!("X{}", i + 1), "X", *r).unwrap())
            .collect();
        let doc = render_session_table(Some("X"), &records);
        let back = load_session_table(&doc).unwrap();
        prop_assert_eq!(back.records, records);
    }

    #[test]
    fn sessions_never_store_a_second_switch(flips in prop::collection::vec(any::<bool>(), 60), bins in prop::collection::vec(1u8..=10, 2)) {
        let cfg = config();
        let mut s = Session::create_with_clock(cfg.clone(), "PROP", Clock::Logical).unwrap();
        s.start().unwrap();
        let (mut f, mut b) = (flips.into_iter().cycle(), bins.into_iter());
        while let Some(task) = s.state().current_task() {
            if cfg.menus[task as usize - 1].kind == DesignKind::Bins {
                s.submit_decision(task, b.next().unwrap()).unwrap();
                continue;
            }
            let mut row = 1;
            while row <= 10 {
                let c = if f.next().unwrap() { Choice::A } else { Choice::B };
                let before = s.state().hash();
                match s.submit_choice(task, row, c) {
                    Ok(_) => row += 1,
                    Err(SessionError::SecondSwitch { row: r }) => {
                        prop_assert_eq!(r, row);
                        prop_assert_eq!(s.state().hash(), before);
                    }
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                }
            }
            let stored = &s.state().choices[task as usize - 1];
            let first_b = stored.iter().position(|c| *c == Choice::B).unwrap_or(stored.len());
            prop_assert!(stored[first_b..].iter().all(|c| *c == Choice::B));
        }
        let log = events_to_jsonl(s.events());
        let replayed = Session::replay(cfg, &events_from_jsonl(&log).unwrap()).unwrap();
        prop_assert_eq!(replayed.state(), s.state());
    }

    #[test]
    fn payouts_stay_in_bounds(resp in responses(), id in "[A-Z][0-9]{1,4}") {
        let cfg = config();
        let (lo, hi) = cfg.total_bounds();
        let mut s = Session::create_with_clock(cfg, &id, Clock::Logical).unwrap();
        s.answer_all(resp).unwrap();
        let (_, _, demo) = bundled_files().next().unwrap();
        s.capture_questionnaire(load_demographics(demo).unwrap().remove(0).1).unwrap();
        let pay = s.finalize_payment(None).unwrap();
        prop_assert!(pay.total >= lo && pay.total <= hi, "{} outside {}..{}", pay.total, lo, hi);
    }

    #[test]
    fn agents_land_in_their_interval(r in -1.4f64..1.8) {
        prop_assume!(mplab_core::ATTITUDE_CUTOFFS.iter().all(|c| (r - c).abs() >= OFF_CUTOFF_MARGIN));
        for m in config().menus.iter() {
            let resp = simulate_eut_agent(m, Crra(r)).unwrap();
            prop_assert!(interval_from_response(m.kind, resp).unwrap().contains(r));
        }
    }
}

#[test]
fn bundled_cohort_jsonl_round_trip() {
    let cohort = bundled_cohort();
    let doc = export_jsonl(&cohort);
    assert_eq!(doc.lines().count(), 88);
    assert_eq!(import_jsonl(&doc).unwrap(), cohort);
}

#[test]
fn simulated_cohort_jsonl_round_trip() {
    let menus = default_task_menus(23.10).unwrap();
    let sim =
        simulate_cohort(&menus, RDistribution::Normal { mean: 0.5, sd: 0.6 }, SimulationOptions::default()).unwrap();
    assert_eq!(import_jsonl(&export_jsonl(&sim.cohort)).unwrap(), sim.cohort);
}

#[test]
fn default_menus_survive_menu_files() {
    for hb in [23.05, 23.08, 23.10] {
        for m in default_task_menus(hb).unwrap() {
            assert_eq!(parse_menu(&render_menu(&m)).unwrap(), m);
        }
    }
}
