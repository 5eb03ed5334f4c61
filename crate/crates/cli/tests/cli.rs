use std::path::Path;
use std::process::{Command, Output};

use mplab_core::dataset::{import_jsonl, load_session_table};
use mplab_core::interval::BoundarySchedule;
use mplab_core::ATTITUDE_CUTOFFS;

fn mplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mplab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Boundary column of a calibrate / validate-menu table.
fn boundaries(text: &str) -> Vec<f64> {
    text.lines()
        .filter_map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f.len() == 4 && f[0].parse::<usize>().is_ok()).then(|| f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn calibrate_hl_default_within_a_hundredth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hl.menu");
    let o = mplab(&["calibrate", "--kind", "hl", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let b = boundaries(&stdout(&o));
    assert_eq!(b.len(), 8);
    for (r, c) in b.iter().zip(ATTITUDE_CUTOFFS) {
        assert!((r - c).abs() <= 0.01, "{r} vs {c}");
    }
    let v = mplab(&["validate-menu", out.to_str().unwrap()]);
    assert!(v.status.success(), "{}", stdout(&v));
    assert_eq!(boundaries(&stdout(&v)), b);
}

#[test]
fn price_twin_reports_the_same_boundaries() {
    let pay = boundaries(&stdout(&mplab(&["calibrate", "--kind", "hl", "--domain", "payoff"])));
    let price = boundaries(&stdout(&mplab(&["calibrate", "--kind", "hl", "--domain", "price"])));
    assert_eq!(pay.len(), 8);
    assert_eq!(price.len(), 8);
    for (a, b) in pay.iter().zip(&price) {
        assert!((a - b).abs() <= 0.01, "{a} vs {b}");
    }
}

#[test]
fn non_monotone_bins_schedule_is_a_calibration_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("lows.txt");
    std::fs::write(&s, "0.60\n2.00\n3.50\n3.00\n5.90\n6.80\n7.60\n8.30\n8.90\n9.40\n").unwrap();
    let o = mplab(&["calibrate", "--kind", "bins", "--schedule", s.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn validate_menu_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.menu");
    std::fs::write(&f, "not a menu\n").unwrap();
    assert_eq!(mplab(&["validate-menu", f.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn reproduce_is_deterministic_and_gates_on_failures() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = mplab(&["reproduce", "--out-dir", a.to_str().unwrap()]);
    let ob = mplab(&["reproduce", "--out-dir", b.to_str().unwrap()]);
    for f in ["reproduction.txt", "reproduction.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = stdout(&oa);
    assert_eq!(text, stdout(&ob));
    let fails: usize = text
        .lines()
        .last()
        .and_then(|l| l.split_whitespace().skip_while(|w| *w != "fail").nth(1))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(oa.status.code(), Some(if fails == 0 { 0 } else { 1 }));
    assert!(text.contains("wilcoxon"));
}

#[test]
fn reproduce_on_an_empty_dataset_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("out");
    let o = mplab(&["reproduce", "--jsonl", empty.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
    assert!(!out.exists());
}

fn simulate(dir: &Path, dist: &str, extra: &[&str]) -> Vec<[u8; 6]> {
    let mut args = vec!["simulate", "--dist", dist, "--n", "60", "--seed", "9", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = mplab(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = load_session_table(&std::fs::read_to_string(dir.join("session_SIM.tsv")).unwrap()).unwrap();
    let jsonl = import_jsonl(&std::fs::read_to_string(dir.join("cohort.jsonl")).unwrap()).unwrap();
    assert_eq!(jsonl.len(), table.records.len());
    table.records.iter().map(|r| r.responses).collect()
}

#[test]
fn risk_neutral_agents_answer_four_and_tests_are_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let resp = simulate(dir.path(), "fixed:0", &[]);
    assert!(resp.iter().all(|r| *r == [4; 6]), "{:?}", resp[0]);
    let o = mplab(&["analyze", "--json", "--jsonl", dir.path().join("cohort.jsonl").to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let tests = v["tests"].as_array().unwrap();
    assert_eq!(tests.len(), 12);
    assert!(tests.iter().all(|t| t.get("degenerate").is_some()), "{tests:?}");
}

#[test]
fn moderate_band_agents_answer_six_on_hl() {
    let dir = tempfile::tempdir().unwrap();
    let resp = simulate(dir.path(), "uniform:0.42,0.67", &[]);
    assert!(resp.iter().all(|r| r[0] == 6 && r[5] == 6));
}

#[test]
fn simulate_then_analyze_recovers_intervals() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "uniform:-1.4,1.8", &["--min-cutoff-distance", "0.025"]);
    let rs: Vec<f64> = std::fs::read_to_string(dir.path().join("r_values.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    let mut expected = [0u64; 9];
    let sched = BoundarySchedule::default();
    for r in &rs {
        expected[sched.index_of(*r)] += 1;
    }
    let o = mplab(&["analyze", "--json", "--data", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for t in v["summary"]["tasks"].as_array().unwrap() {
        let counts: Vec<u64> = t["interval_counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
        assert_eq!(counts, expected.to_vec(), "task {}", t["task"]);
    }
}

#[test]
fn serve_reports_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("server.toml");
    std::fs::write(&cfg, "prot = 1\n").unwrap();
    let o = mplab(&["serve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
