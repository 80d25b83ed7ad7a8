use layerpot_core::dini::{OscillationModulus, DEFAULT_PANELS};
use layerpot_core::numeric::geometric_grid;

use super::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{Check, ReportBundle, Table};
use crate::seeds::SeedSplitter;

const CRITERION: Option<u8> = Some(2);

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

fn label(m: &OscillationModulus) -> String {
    match m {
        OscillationModulus::Power { alpha, .. } => format!("power({alpha})"),
        OscillationModulus::LogPower { gamma, .. } => format!("log_power({gamma})"),
        other => other.family_name().to_string(),
    }
}

pub(super) fn run(cfg: &ExperimentConfig, _seeds: &SeedSplitter) -> CliResult<ReportBundle> {
    let p = cfg.params();
    let points = p.usize("grid_points", 30)?;
    let r_lo = p.f64("r_min", 1e-8)?;
    let r_hi = p.f64("r_max", 1.0)?;
    let panels = p.usize("panels", DEFAULT_PANELS)?;
    let alphas = p.list_f64("alphas", &[0.25, 0.5, 1.0])?;
    let gammas = p.list_f64("gammas", &[0.25, 1.0])?;
    let orders = p.list_f64("orders", &[1.0, 2.0])?;

    let grid = geometric_grid(r_lo, r_hi, points);
    let families: Vec<OscillationModulus> = alphas
        .iter()
        .map(|&a| OscillationModulus::power(a))
        .chain(gammas.iter().map(|&g| OscillationModulus::log_power(g)))
        .collect();

    let mut report = ReportBundle::new(&cfg.experiment, cfg.seed, cfg.params.clone());
    let mut table = Table::new("dini", &["family", "integral", "d", "r", "closed_form", "quadrature", "rel_error"]);
    let mut fubini = Table::new("fubini", &["family", "d", "r", "lhs", "rhs", "rel_error"]);
    let (mut worst_closed, mut worst_fubini): (f64, f64) = (0.0, 0.0);
    for m in &families {
        let name = label(m);
        for &r in &grid {
            let (c, q) = (m.dini_small(r, panels)?, m.dini_small_quadrature(r, panels)?);
            worst_closed = worst_closed.max(rel(c, q));
            table.push(vec![
                name.as_str().into(),
                "small".into(),
                0.0.into(),
                r.into(),
                c.into(),
                q.into(),
                rel(c, q).into(),
            ]);
            for &d in &orders {
                // Power moduli are only large-scale Dini below their exponent.
                if matches!(m, OscillationModulus::Power { alpha, .. } if *alpha >= d) {
                    continue;
                }
                let (c, q) = (m.dini_large(d, r, panels)?, m.dini_large_quadrature(d, r, panels)?);
                worst_closed = worst_closed.max(rel(c, q));
                table.push(vec![
                    name.as_str().into(),
                    "large".into(),
                    d.into(),
                    r.into(),
                    c.into(),
                    q.into(),
                    rel(c, q).into(),
                ]);
                let lhs = d * m.dini_large_of_small(d, r, panels)?;
                let rhs = m.dini_small(r, panels)? + m.dini_large(d, r, panels)?;
                worst_fubini = worst_fubini.max(rel(lhs, rhs));
                fubini.push(vec![
                    name.as_str().into(),
                    d.into(),
                    r.into(),
                    lhs.into(),
                    rhs.into(),
                    rel(lhs, rhs).into(),
                ]);
            }
        }
    }
    report.check(
        Check::below(CRITERION, "closed form vs quadrature", worst_closed, 1e-8)
            .note(format!("{} families on a {points}-point grid", families.len())),
    );
    report.check(Check::below(CRITERION, "Fubini identity d L_d(J) = J + L_d", worst_fubini, 1e-6));
    report.table(table);
    report.table(fubini);
    Ok(report)
}
