use layerpot_core::matrixfield::MatrixField;
use layerpot_core::Point;

use super::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{Check, ReportBundle, Table};
use crate::seeds::SeedSplitter;

const CRITERION: Option<u8> = Some(3);

/// Centers in units of `r`: the singular point and a few nearby offsets.
const CENTER_OFFSETS: [[f64; 3]; 6] =
    [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5], [1.0, 0.0, 0.0], [0.3, 0.3, 0.3]];

pub(super) fn run(cfg: &ExperimentConfig, seeds: &SeedSplitter) -> CliResult<ReportBundle> {
    let p = cfg.params();
    let gamma = p.f64("gamma", 0.25)?;
    let budget = p.usize("budget", 4096)?;
    let band = p.f64("band", 4.0)?;
    let exps = p.list_f64("log_radii", &[-4.0, -5.0, -6.0, -7.0, -8.0, -9.0, -10.0])?;
    let field = match p.parse::<MatrixField>("field")? {
        Some(f) => f,
        None => MatrixField::log_dini(gamma),
    };
    field.validate()?;
    let seed = seeds.stream("oscillation");

    let mut report = ReportBundle::new(&cfg.experiment, cfg.seed, cfg.params.clone());
    let mut table = Table::new("profile", &["r", "log_r", "omega_hat", "scaled"]);
    let mut scaled = Vec::with_capacity(exps.len());
    for &u in &exps {
        let r = u.exp();
        let centers: Vec<Point> = CENTER_OFFSETS.iter().map(|o| Point::new(o[0], o[1], o[2]) * r).collect();
        let omega = field.oscillation_estimate(r, &centers, budget, seed)?;
        let s = omega * (-u).powf(gamma + 2.0);
        scaled.push(s);
        table.push(vec![r.into(), u.into(), omega.into(), s.into()]);
    }
    let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    report.check(
        Check::at_most(CRITERION, "omega_hat(r) (-ln r)^(gamma+2) band ratio", hi / lo, band)
            .note(format!("min {lo:.4e}, max {hi:.4e}")),
    );
    report.check(Check::holds(CRITERION, "omega_hat positive on the grid", lo > 0.0));
    report.table(table);
    Ok(report)
}
