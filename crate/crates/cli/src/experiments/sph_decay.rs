use layerpot_core::kernels::riesz;
use layerpot_core::matrixfield::MatrixField;
use layerpot_core::spherical::{
    build_quadrature, decay_report, decompose, eval_all, level_for, Decomposition, HarmonicIndex, K3Kernel,
    DEFAULT_SMOOTHNESS_MARGIN,
};
use layerpot_core::{Point, N_DIM};

use super::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{Check, ReportBundle, Table};
use crate::seeds::SeedSplitter;

const CRITERION: Option<u8> = Some(6);

/// `max |G - I|` for the harmonics of degree `≤ j_max` under the level-`level` rule.
fn gram_defect(j_max: usize, level: usize) -> CliResult<f64> {
    let q = build_quadrature(level)?;
    let count = HarmonicIndex::count(j_max);
    let basis: Vec<Vec<f64>> = q.nodes.iter().map(|p| eval_all(j_max, p)).collect();
    let mut worst: f64 = 0.0;
    for a in 0..count {
        for b in a..count {
            let g: f64 = basis.iter().zip(&q.weights).map(|(y, w)| w * y[a] * y[b]).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    Ok(worst)
}

/// `|Σ|k|² + residual² - ‖K‖²| / ‖K‖²`.
fn parseval_defect(d: &Decomposition) -> f64 {
    let energy: f64 = d.coeffs.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
    (energy + d.residual * d.residual - d.norm_sq).abs() / d.norm_sq
}

fn odd_even_max(d: &Decomposition) -> f64 {
    (0..=d.j_max).step_by(2).map(|j| d.max_at_degree(j)).fold(0.0, f64::max)
}

pub(super) fn run(cfg: &ExperimentConfig, seeds: &SeedSplitter) -> CliResult<ReportBundle> {
    let p = cfg.params();
    let gram_j = p.usize("gram_j", 6)?;
    let gram_level = p.usize("gram_level", 16)?;
    let j_max = p.usize("j_max", 24)?;
    let side = p.f64("cube_side", 0.0625)?;
    let center = p.list_f64("cube_center", &[0.0, 0.0, 0.0])?;
    let budget = p.usize("budget", 4096)?;
    let delta_frac = p.f64("delta_fraction", 0.01)?;
    let slope_bound = p.f64("slope_bound", -3.0)?;
    let field = match p.parse::<MatrixField>("field")? {
        Some(f) => f,
        None => MatrixField::LogDini { gamma: 0.25, lambda: 2.0, axis_weights: Some([1.0, 0.5, 0.2]) },
    };
    field.validate()?;
    let center = Point::new(
        center.first().copied().unwrap_or(0.0),
        center.get(1).copied().unwrap_or(0.0),
        center.get(2).copied().unwrap_or(0.0),
    );
    let seed = seeds.stream("spherical");
    let mut report = ReportBundle::new(&cfg.experiment, cfg.seed, cfg.params.clone());

    let gram = gram_defect(gram_j, gram_level)?;
    report.check(
        Check::below(CRITERION, "harmonic Gram matrix defect", gram, 1e-10)
            .note(format!("j <= {gram_j}, L = {gram_level}")),
    );

    let quad = build_quadrature(level_for(j_max, DEFAULT_SMOOTHNESS_MARGIN))?;
    let riesz_dec = decompose(riesz, j_max, &quad)?;
    report.check(Check::below(
        CRITERION,
        "even-degree coefficients of the Riesz kernel",
        odd_even_max(&riesz_dec),
        1e-10,
    ));

    // Normalise on the ball of radius 4nΛℓ about the cube, then sit at the pushed centre.
    let radius = 4.0 * N_DIM as f64 * field.lambda() * side;
    let cov = field.normalize_cov(&center, radius, budget, seed)?;
    let x = cov.s_inv * center;
    let k3 = K3Kernel::new(&cov.hat_a, x, delta_frac * side, side, budget, seed)?;
    let dec = k3.decompose(j_max, &quad)?;
    let omega = field.declared_modulus();
    let decay = decay_report(&dec, &omega, side)?;
    report.check(Check::below(CRITERION, "even-degree coefficients of K3", decay.even_max, 1e-10));
    let slope = decay.slope.unwrap_or(f64::INFINITY);
    report.check(
        Check::at_most(CRITERION, "odd-degree log-log slope of K3", slope, slope_bound)
            .note(format!("J_max = {j_max}; fitted envelope constant {:?}", decay.envelope_c)),
    );
    report.check(Check::holds(CRITERION, "K3 decomposition is not vacuous", !decay.vacuous));
    let parseval = parseval_defect(&dec).max(parseval_defect(&riesz_dec));
    report.check(Check::below(None, "Parseval with residual", parseval, 1e-10));

    let mut curve = Table::new("decay", &["j", "max_coeff", "envelope", "slack"]);
    for row in &decay.per_j {
        curve.push(vec![row.j.into(), row.max_coeff.into(), row.envelope.into(), row.slack.unwrap_or(f64::NAN).into()]);
    }
    let mut coeffs = Table::new("coefficients", &["component", "j", "ell", "coeff"]);
    for (c, j, ell, v) in dec.rows() {
        coeffs.push(vec![c.into(), j.into(), ell.into(), v.into()]);
    }
    report.table(curve);
    report.table(coeffs);
    Ok(report)
}
