use layerpot_core::matrixfield::MatrixField;
use layerpot_core::measures::{Ball, DiscreteMeasure, MeasureFamily};
use layerpot_core::operators::{criterion_check, CriterionParams, CriterionReport};
use layerpot_core::Point;

use super::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io::read_measure;
use crate::report::{Check, ReportBundle, Table};
use crate::seeds::SeedSplitter;

const CRITERION: Option<u8> = Some(10);

fn point(v: &[f64]) -> CliResult<Point> {
    match v {
        [x, y, z] => Ok(Point::new(*x, *y, *z)),
        _ => Err(CliError::Config(format!("expected a 3-vector, got {v:?}"))),
    }
}

fn push_rows(table: &mut Table, config: &str, rep: &CriterionReport) {
    for h in &rep.hypotheses {
        table.push(vec![
            config.into(),
            (h.index as usize).into(),
            h.name.as_str().into(),
            h.value.into(),
            h.bound.into(),
            h.pass.into(),
        ]);
    }
}

pub(super) fn run(cfg: &ExperimentConfig, seeds: &SeedSplitter) -> CliResult<ReportBundle> {
    let p = cfg.params();
    let slack = p.f64("slack", 1.5)?;
    let field = match p.parse::<MatrixField>("field")? {
        Some(f) => f,
        None => MatrixField::identity(),
    };
    field.validate()?;
    let flat = match cfg.inputs.get("measure") {
        Some(path) => read_measure(path)?,
        None => DiscreteMeasure::generate(&MeasureFamily::PlanePatch { n: p.usize("patch_n", 32)? }, 0)?,
    };
    let flat_ball = Ball::new(point(&p.list_f64("center", &[0.5, 0.5, 0.0])?)?, p.f64("radius", 0.0625)?)?;
    let rough = DiscreteMeasure::generate(&MeasureFamily::tetrix(p.usize("tetrix_level", 4)? as u32), 0)?;
    let rough_ball = Ball::new(point(&p.list_f64("tetrix_center", &[0.0, 0.0, 0.0])?)?, p.f64("tetrix_radius", 0.5)?)?;
    let mut params = CriterionParams { seed: seeds.stream("criterion"), ..CriterionParams::default() };
    if let Some(n) = p.parse::<u32>("n")? {
        params.n = n;
    }
    params.delta_flat = p.f64("delta_flat", params.delta_flat)?;
    params.tau = p.f64("tau", params.tau)?;
    params.lambda = p.f64("lambda", params.lambda)?;

    let mut report = ReportBundle::new(&cfg.experiment, cfg.seed, cfg.params.clone());
    let mut table = Table::new("hypotheses", &["configuration", "index", "name", "value", "bound", "pass"]);

    // Measure C0 and C0' with unconstrained bounds, then rerun with them.
    let measured = criterion_check(&flat, &flat_ball, &params, &field)?;
    push_rows(&mut table, "plane-measured", &measured);
    let (c0, c0_prime) = measured.calibrated_constants(slack);
    let calibrated = CriterionParams { c0, c0_prime, ..params.clone() };
    let flat_rep = criterion_check(&flat, &flat_ball, &calibrated, &field)?;
    push_rows(&mut table, "plane-calibrated", &flat_rep);
    let failed: Vec<u8> = flat_rep.hypotheses.iter().filter(|h| !h.pass).map(|h| h.index).collect();
    report.check(Check::holds(CRITERION, "plane patch passes all five hypotheses", flat_rep.all_pass).note(format!(
        "C0 = {c0:.4}, C0' = {c0_prime:.4} (slack {slack}); failing {failed:?}; warnings {:?}",
        flat_rep.warnings
    )));

    let rough_rep = criterion_check(&rough, &rough_ball, &calibrated, &field)?;
    push_rows(&mut table, "tetrix-calibrated", &rough_rep);
    let flatness =
        rough_rep.hypothesis(4).ok_or_else(|| CliError::Config("criterion report lacks hypothesis 4".into()))?;
    report.check(
        Check::holds(CRITERION, "tetrix fails the flatness hypothesis", !flatness.pass)
            .note(format!("beta/Theta = {:.4e} vs delta = {:.1e}", flatness.value, flatness.bound)),
    );

    let again = criterion_check(&flat, &flat_ball, &calibrated, &field)?;
    let same = serde_json::to_string(&again).ok() == serde_json::to_string(&flat_rep).ok();
    report.check(Check::holds(CRITERION, "repeated run is bitwise identical", same));
    report.table(table);
    Ok(report)
}
