//! Subcommand implementations. Each returns `Ok(false)` when a check fails.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use mplab_core::analysis::{comparison_label, midpoint_samples, response_samples};
use mplab_core::dataset::{bundled_cohort, export_jsonl, import_jsonl, load_cohort_dir, render_session_table, Cohort};
use mplab_core::interval::BoundarySchedule;
use mplab_core::menu::{
    bins_menu, check_calibration, cvu_menu, default_bins_menu_anchored, default_cvu_lottery, default_cvu_menu,
    default_task_menus, hl_menu, parse_menu, render_menu, to_price_domain, MenuDomain, PriceParams, TaskMenu,
};
use mplab_core::reproduce::{reproduce as run_reproduction, CheckStatus, ConditionalInputs};
use mplab_core::simulate::{simulate_cohort, RDistribution, SimulationOptions};
use mplab_core::stats::{paired_t_test, sign_test, wilcoxon_signed_rank, StatsError, TestReport};
use mplab_core::{cohort_summary, ATTITUDE_CUTOFFS};
use mplab_server::{App, ServerConfig};

use crate::{
    AnalyzeArgs, CalibrateArgs, DataArgs, DomainArg, KindArg, ReproduceArgs, ServeArgs, SimulateArgs, ValidateArgs,
};

/// Writes through a temporary file in the same directory.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_file_name(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).ok_or_else(|| anyhow!("bad output path {}", path.display()))?
    ));
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_menu(path: &Path) -> Result<TaskMenu> {
    parse_menu(&read(path)?).with_context(|| format!("menu file {}", path.display()))
}

fn read_schedule(path: &Path) -> Result<Vec<f64>> {
    read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<f64>().with_context(|| format!("{}: {l:?} is not a number", path.display())))
        .collect()
}

fn domain(d: DomainArg) -> MenuDomain {
    match d {
        DomainArg::Payoff => MenuDomain::Payoff,
        DomainArg::Price => MenuDomain::Price,
    }
}

fn build_menu(a: &CalibrateArgs) -> Result<TaskMenu> {
    let dom = domain(a.domain);
    let schedule = a.schedule.as_deref().map(read_schedule).transpose()?;
    let menu = match (a.kind, schedule) {
        (KindArg::Hl, None) => hl_menu(a.high_b, dom)?,
        (KindArg::Hl, Some(_)) => bail!("HL menus take --high-b, not a schedule"),
        (KindArg::Cvu, None) => default_cvu_menu(dom)?,
        (KindArg::Cvu, Some(s)) => cvu_menu(&s, default_cvu_lottery(), dom)?,
        (KindArg::Bins, None) => default_bins_menu_anchored(dom, a.high_b)?,
        (KindArg::Bins, Some(lows)) => {
            let payoff = bins_menu(&lows, a.high_b)?;
            match dom {
                MenuDomain::Payoff => payoff,
                MenuDomain::Price => to_price_domain(&payoff, PriceParams::default())?,
            }
        }
    };
    Ok(menu)
}

/// Boundary table; returns the text and the largest deviation.
fn boundary_report(menu: &TaskMenu) -> Result<(String, f64)> {
    let b = check_calibration(menu, &BoundarySchedule::default())?;
    let mut out = String::new();
    let _ = writeln!(out, "{} {} menu", menu.kind, menu.domain);
    let _ = writeln!(out, "{:>4} {:>8} {:>10} {:>10}", "#", "cutoff", "boundary", "deviation");
    let mut max_dev: f64 = 0.0;
    for (i, (r, c)) in b.iter().zip(ATTITUDE_CUTOFFS).enumerate() {
        let dev = r - c;
        max_dev = max_dev.max(dev.abs());
        let _ = writeln!(out, "{:>4} {:>8.2} {:>10.4} {:>+10.4}", i + 1, c, r, dev);
    }
    let _ = writeln!(out, "max |deviation| {max_dev:.4}");
    Ok((out, max_dev))
}

pub fn calibrate(a: &CalibrateArgs) -> Result<bool> {
    let menu = build_menu(a)?;
    let (report, max_dev) = boundary_report(&menu)?;
    print!("{report}");
    if let Some(out) = &a.out {
        write_atomic(out, &render_menu(&menu))?;
        println!("wrote {}", out.display());
    }
    let ok = max_dev <= a.tolerance;
    if !ok {
        println!("FAIL: deviation above tolerance {}", a.tolerance);
    }
    Ok(ok)
}

pub fn validate_menu(a: &ValidateArgs) -> Result<bool> {
    let mut all_ok = true;
    for f in &a.files {
        let menu = read_menu(f)?;
        println!("{}", f.display());
        match boundary_report(&menu) {
            Ok((report, max_dev)) => {
                print!("{report}");
                let ok = max_dev <= a.tolerance;
                println!("{}", if ok { "OK" } else { "FAIL: deviation above tolerance" });
                all_ok &= ok;
            }
            Err(e) => {
                println!("FAIL: {e:#}");
                all_ok = false;
            }
        }
    }
    Ok(all_ok)
}

fn load_cohort(input: &DataArgs) -> Result<Cohort> {
    let cohort = match (&input.data, &input.jsonl) {
        (Some(dir), _) => load_cohort_dir(dir).with_context(|| format!("dataset {}", dir.display()))?,
        (None, Some(f)) => import_jsonl(&read(f)?).with_context(|| format!("dataset {}", f.display()))?,
        (None, None) => bundled_cohort(),
    };
    if cohort.is_empty() {
        bail!("dataset is empty");
    }
    Ok(cohort)
}

enum Outcome {
    Report(TestReport),
    Degenerate(String),
}

/// Runs each comparison separately so that one degenerate sample does not
/// hide the others.
fn paired_outcomes(cohort: &Cohort) -> Result<Vec<(&'static str, String, Outcome)>> {
    let resp = response_samples(cohort)?;
    let mid = midpoint_samples(cohort)?;
    let wrap = |r: Result<TestReport, StatsError>| -> Result<Outcome> {
        match r {
            Ok(rep) => Ok(Outcome::Report(rep)),
            Err(StatsError::Degenerate(why)) => Ok(Outcome::Degenerate(why.into())),
            Err(e) => Err(e.into()),
        }
    };
    let mut out = Vec::new();
    for (k, sample) in resp.iter().enumerate() {
        out.push(("wilcoxon", comparison_label(k), wrap(wilcoxon_signed_rank(sample))?));
    }
    for (k, sample) in resp.iter().enumerate() {
        let sign = match sign_test(sample)? {
            r if r.sign().is_some_and(|d| d.n_pos + d.n_neg == 0) => {
                Outcome::Degenerate("all differences are zero".into())
            }
            r => Outcome::Report(r),
        };
        out.push(("sign", comparison_label(k), sign));
    }
    for (k, sample) in mid.iter().enumerate() {
        out.push(("t-test", comparison_label(k), wrap(paired_t_test(sample))?));
    }
    Ok(out)
}

pub fn analyze(a: &AnalyzeArgs) -> Result<bool> {
    let cohort = load_cohort(&a.input)?;
    let summary = cohort_summary(&cohort)?;
    let tests = paired_outcomes(&cohort)?;
    if a.json {
        let tests: Vec<_> = tests
            .iter()
            .map(|(name, label, o)| match o {
                Outcome::Report(r) => json!({ "test": name, "comparison": label, "report": r }),
                Outcome::Degenerate(why) => json!({ "test": name, "comparison": label, "degenerate": why }),
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&json!({ "summary": summary, "tests": tests }))?);
        return Ok(true);
    }
    println!("subjects: {}", summary.n);
    println!("{:>4} {:>5} {:>9} {:>9} {:>7}  interval counts 1..9", "task", "kind", "mean resp", "mean CRRA", "sd");
    for t in &summary.tasks {
        let counts: Vec<String> = t.interval_counts.iter().map(|c| c.to_string()).collect();
        println!(
            "{:>4} {:>5} {:>9.4} {:>9.4} {:>7.4}  {}",
            t.task,
            t.kind.to_string(),
            t.mean_response,
            t.mean_midpoint,
            t.sd_midpoint,
            counts.join(" ")
        );
    }
    println!("DUF mean CRRA {:.6}  IUF mean CRRA {:.6}", summary.duf_mean, summary.iuf_mean);
    println!(
        "attitude shares: loving {:.3}  neutral {:.3}  averse {:.3}",
        summary.mean_shares.loving, summary.mean_shares.neutral, summary.mean_shares.averse
    );
    println!("{:<9} {:<22} {:>10} {:>12} {:>12}", "test", "comparison", "statistic", "one-sided p", "two-sided p");
    for (name, label, o) in &tests {
        match o {
            Outcome::Report(r) => {
                println!("{name:<9} {label:<22} {:>10.4} {:>12.4} {:>12.4}", r.statistic, r.one_sided_p, r.two_sided_p)
            }
            Outcome::Degenerate(why) => println!("{name:<9} {label:<22} degenerate: {why}"),
        }
    }
    Ok(true)
}

pub fn reproduce(a: &ReproduceArgs) -> Result<bool> {
    let cohort = load_cohort(&a.input)?;
    let inputs = ConditionalInputs {
        cvu_payoff: a.cvu_payoff.as_deref().map(read_menu).transpose()?,
        cvu_price: a.cvu_price.as_deref().map(read_menu).transpose()?,
    };
    let report = run_reproduction(&cohort, &inputs)?;
    let text = report.to_text();
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_atomic(&dir.join("reproduction.txt"), &text)?;
        write_atomic(&dir.join("reproduction.json"), &report.to_json())?;
    }
    print!("{text}");
    Ok(report.count(CheckStatus::Fail) == 0)
}

pub fn simulate(a: &SimulateArgs) -> Result<bool> {
    let dist: RDistribution = a.dist.parse().map_err(|e| anyhow!("--dist {}: {e}", a.dist))?;
    let menus: Vec<TaskMenu> = match &a.menus {
        Some(files) => files.iter().map(|f| read_menu(f)).collect::<Result<_>>()?,
        None => default_task_menus(a.high_b)?.to_vec(),
    };
    let opts = SimulationOptions { n: a.n, seed: a.seed, min_cutoff_distance: a.min_cutoff_distance };
    let sim = simulate_cohort(&menus, dist, opts)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let records: Vec<_> = sim.cohort.subjects().cloned().collect();
    write_atomic(&a.out.join("session_SIM.tsv"), &render_session_table(Some("SIM"), &records))?;
    write_atomic(&a.out.join("cohort.jsonl"), &export_jsonl(&sim.cohort))?;
    let mut rs = String::from("subject_id\tr\n");
    for (rec, r) in records.iter().zip(&sim.r) {
        let _ = writeln!(rs, "{}\t{r}", rec.subject_id);
    }
    write_atomic(&a.out.join("r_values.tsv"), &rs)?;
    println!("simulated {} agents into {}", records.len(), a.out.display());
    Ok(true)
}

pub fn serve(a: &ServeArgs) -> Result<bool> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    let cfg = ServerConfig::load(a.config.as_deref())?;
    let app = App::new(&cfg)?;
    println!("run {} on http://{}", cfg.run.label, app.addr());
    if cfg.experimenter_token.is_none() {
        println!("experimenter token: {}", app.experimenter_token());
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(app.serve())?;
    Ok(true)
}
