use layerpot_core::kernels::KernelSpec;
use layerpot_core::measures::{DiscreteMeasure, MeasureFamily};
use layerpot_core::numeric::geometric_grid;
use layerpot_core::operators::{auto_delta_grid, opnorm, NormMethod, OpNormReport, PowerOptions, DEFAULT_DELTA_COUNT};

use super::{strictly_increasing, ExperimentConfig};
use crate::error::CliResult;
use crate::report::{Check, ReportBundle, Table};
use crate::seeds::SeedSplitter;

const CRITERION: Option<u8> = Some(5);

fn riesz_sup(measure: &DiscreteMeasure, opts: &PowerOptions, grid_count: usize) -> CliResult<OpNormReport> {
    let grid = auto_delta_grid(measure, grid_count)?;
    Ok(opnorm(&KernelSpec::Riesz, measure, NormMethod::Power, &grid, opts, usize::MAX)?)
}

/// Upper 2-density estimate above the atomic scale.
fn upper_density(measure: &DiscreteMeasure, seed: u64) -> f64 {
    let r_grid = geometric_grid(1e-3, 1.0, 16);
    let g = measure.growth_report(2.0, 64, &r_grid, seed);
    g.c0_hat_continuum.unwrap_or(g.c0_hat)
}

pub(super) fn run(cfg: &ExperimentConfig, seeds: &SeedSplitter) -> CliResult<ReportBundle> {
    let p = cfg.params();
    let patches = p.list_usize("patch_n", &[16, 32, 64])?;
    let levels = p.list_usize("lacunary_levels", &[4, 6, 8])?;
    let tolerance = p.f64("variation_tolerance", 0.10)?;
    let grid_count = p.usize("delta_count", DEFAULT_DELTA_COUNT)?;
    let opts = PowerOptions { seed: seeds.stream("power"), ..PowerOptions::default() };
    let growth_seed = seeds.stream("growth");

    let mut report = ReportBundle::new(&cfg.experiment, cfg.seed, cfg.params.clone());
    let mut plane = Table::new("plane", &["n", "atoms", "opnorm", "argsup_delta", "upper_density"]);
    let mut plane_sups = Vec::new();
    for &n in &patches {
        let m = DiscreteMeasure::generate(&MeasureFamily::PlanePatch { n }, 0)?;
        let rep = riesz_sup(&m, &opts, grid_count)?;
        plane_sups.push(rep.sup);
        plane.push(vec![
            n.into(),
            m.len().into(),
            rep.sup.into(),
            rep.argsup_delta.into(),
            upper_density(&m, growth_seed).into(),
        ]);
    }
    let hi = plane_sups.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = plane_sups.iter().cloned().fold(f64::INFINITY, f64::min);
    report.check(
        Check::below(CRITERION, "plane_patch sup_delta |R| relative variation", (hi - lo) / hi, tolerance)
            .note(format!("(max - min)/max over n = {patches:?}")),
    );

    let mut growth = Table::new("growth", &["level", "atoms", "opnorm", "argsup_delta", "upper_density"]);
    let mut lac_sups = Vec::new();
    for &level in &levels {
        let m = DiscreteMeasure::generate(&MeasureFamily::lacunary_tetrix(level as u32), 0)?;
        let rep = riesz_sup(&m, &opts, grid_count)?;
        lac_sups.push(rep.sup);
        growth.push(vec![
            level.into(),
            m.len().into(),
            rep.sup.into(),
            rep.argsup_delta.into(),
            upper_density(&m, growth_seed).into(),
        ]);
    }
    report.check(
        Check::holds(CRITERION, "lacunary sup_delta |R| strictly increasing", strictly_increasing(&lac_sups))
            .note(format!("levels {levels:?}")),
    );
    report.table(plane);
    report.table(growth);
    Ok(report)
}
