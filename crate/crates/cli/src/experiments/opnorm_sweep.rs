use layerpot_core::dini::OscillationModulus;
use layerpot_core::kernels::KernelSpec;
use layerpot_core::measures::{DiscreteMeasure, MeasureFamily, MeasureMeta};
use layerpot_core::operators::{
    auto_delta_grid, discrete_schur, opnorm_pairs, NormMethod, PairStore, PowerOptions, DEFAULT_DELTA_COUNT,
    SVD_MAX_ATOMS,
};
use layerpot_core::Point;

use super::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{Check, ReportBundle, Table};
use crate::seeds::SeedSplitter;

const SCHUR: Option<u8> = Some(7);
const ORACLE: Option<u8> = Some(9);

fn presets() -> Vec<MeasureFamily> {
    vec![
        MeasureFamily::PlanePatch { n: 16 },
        MeasureFamily::PlanePatch { n: 32 },
        MeasureFamily::Sphere { n: 400 },
        MeasureFamily::LipschitzGraph { amp: 0.1, freq: 2.0 * std::f64::consts::PI, n: 16 },
        MeasureFamily::tetrix(3),
        MeasureFamily::tetrix(4),
        MeasureFamily::garnett3d(2),
        MeasureFamily::lacunary_tetrix(4),
        MeasureFamily::lacunary_tetrix(6),
        MeasureFamily::lacunary_tetrix(8),
    ]
}

fn theta_kernels() -> Vec<(String, KernelSpec)> {
    [
        ("power(0.5)", OscillationModulus::power(0.5)),
        ("power(1)", OscillationModulus::power(1.0)),
        ("log_power(0.25)", OscillationModulus::log_power(0.25)),
        ("constant(1)", OscillationModulus::constant(1.0)),
    ]
    .into_iter()
    .map(|(name, theta)| (format!("theta:{name}"), KernelSpec::Theta { theta, d: 2.0 }))
    .collect()
}

fn label(family: &MeasureFamily) -> String {
    match family {
        MeasureFamily::PlanePatch { n } | MeasureFamily::Sphere { n } | MeasureFamily::LipschitzGraph { n, .. } => {
            format!("{}({n})", family.name())
        }
        MeasureFamily::Ifs { level, .. } | MeasureFamily::Lacunary { level, .. } => {
            format!("{}({level})", family.name())
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub(super) fn run(cfg: &ExperimentConfig, seeds: &SeedSplitter) -> CliResult<ReportBundle> {
    let p = cfg.params();
    let grid_count = p.usize("delta_count", DEFAULT_DELTA_COUNT)?;
    let families = match p.parse::<Vec<MeasureFamily>>("measures")? {
        Some(f) => f,
        None => presets(),
    };
    let opts = PowerOptions { seed: seeds.stream("power"), ..PowerOptions::default() };
    let mut report = ReportBundle::new(&cfg.experiment, cfg.seed, cfg.params.clone());
    let mut schur_table = Table::new("schur", &["measure", "kernel", "atoms", "delta", "opnorm", "schur", "ratio"]);
    let mut oracle_table = Table::new("oracle", &["measure", "kernel", "atoms", "delta", "power", "svd", "rel_error"]);
    let mut sup_table = Table::new("sweep", &["measure", "kernel", "atoms", "sup_opnorm", "argsup_delta", "sup_schur"]);

    let mut kernels = theta_kernels();
    kernels.push(("riesz".into(), KernelSpec::Riesz));
    let (mut violations, mut schur_cases, mut worst_ratio) = (0usize, 0usize, 0.0f64);
    let (mut worst_oracle, mut oracle_cases) = (0.0f64, 0usize);
    for family in &families {
        let m = DiscreteMeasure::generate(family, 0)?;
        let name = label(family);
        let grid = auto_delta_grid(&m, grid_count)?;
        for (kname, kernel) in &kernels {
            let store = PairStore::build(kernel, &m, usize::MAX)?;
            let power = opnorm_pairs(&store, &grid, NormMethod::Power, &opts)?;
            let mut sup_schur: f64 = 0.0;
            for e in &power.per_delta {
                let s = discrete_schur(&store, &m.weights, e.delta).discrete;
                sup_schur = sup_schur.max(s);
                schur_cases += 1;
                if e.sigma_max > s * (1.0 + 1e-12) {
                    violations += 1;
                }
                if s > 0.0 {
                    worst_ratio = worst_ratio.max(e.sigma_max / s);
                }
                schur_table.push(vec![
                    name.as_str().into(),
                    kname.as_str().into(),
                    m.len().into(),
                    e.delta.into(),
                    e.sigma_max.into(),
                    s.into(),
                    (e.sigma_max / s).into(),
                ]);
            }
            if m.len() <= SVD_MAX_ATOMS {
                let svd = opnorm_pairs(&store, &grid, NormMethod::Svd, &opts)?;
                for (a, b) in power.per_delta.iter().zip(&svd.per_delta) {
                    let r = rel(a.sigma_max, b.sigma_max);
                    worst_oracle = worst_oracle.max(r);
                    oracle_cases += 1;
                    oracle_table.push(vec![
                        name.as_str().into(),
                        kname.as_str().into(),
                        m.len().into(),
                        a.delta.into(),
                        a.sigma_max.into(),
                        b.sigma_max.into(),
                        r.into(),
                    ]);
                }
            }
            sup_table.push(vec![
                name.as_str().into(),
                kname.as_str().into(),
                m.len().into(),
                power.sup.into(),
                power.argsup_delta.into(),
                sup_schur.into(),
            ]);
        }
    }
    report.check(
        Check::at_most(SCHUR, "Schur violations (opnorm > discrete Schur bound)", violations as f64, 0.0)
            .note(format!("{schur_cases} (measure, kernel, delta) cases; max opnorm/Schur = {worst_ratio:.4}")),
    );
    report.check(
        Check::below(ORACLE, "power vs SVD relative error (N <= 512)", worst_oracle, 1e-8)
            .note(format!("{oracle_cases} (measure, kernel, delta) cases")),
    );

    let two = DiscreteMeasure::new(
        vec![Point::zeros(), Point::new(1.0, 0.0, 0.0)],
        vec![1.0, 1.0],
        MeasureMeta { family: "two_atoms".into(), ..MeasureMeta::default() },
    )?;
    let store = PairStore::build(&KernelSpec::Riesz, &two, 2)?;
    let pw = opnorm_pairs(&store, &[0.5], NormMethod::Power, &opts)?.sup;
    let sv = opnorm_pairs(&store, &[0.5], NormMethod::Svd, &opts)?.sup;
    let two_err = (pw - 1.0).abs().max((sv - 1.0).abs());
    report.check(Check::below(ORACLE, "two-atom Riesz norm equals 1", two_err, 1e-10));

    // Refining the delta grid should barely move the supremum.
    let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(4), 0)?;
    let store = PairStore::build(&KernelSpec::Riesz, &m, usize::MAX)?;
    let coarse = opnorm_pairs(&store, &auto_delta_grid(&m, grid_count)?, NormMethod::Power, &opts)?.sup;
    let fine = opnorm_pairs(&store, &auto_delta_grid(&m, 2 * grid_count - 1)?, NormMethod::Power, &opts)?.sup;
    report.check(
        Check::below(None, "delta-grid doubling changes sup by", rel(coarse, fine), 0.02).note("tetrix(4), riesz"),
    );

    report.table(sup_table);
    report.table(schur_table);
    report.table(oracle_table);
    Ok(report)
}
