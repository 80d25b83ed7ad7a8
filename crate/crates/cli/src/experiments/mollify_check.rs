use layerpot_core::measures::{DiscreteMeasure, MeasureFamily, MollifiedMeasure};
use layerpot_core::Point;

use super::{strictly_decreasing, ExperimentConfig};
use crate::error::CliResult;
use crate::report::{Check, ReportBundle, Table};
use crate::seeds::SeedSplitter;

const CRITERION: Option<u8> = Some(8);

/// Smooth test function for the weak-convergence proxy.
fn test_function(p: &Point) -> f64 {
    (2.0 * p.x).cos() + p.y * p.y * p.z.exp()
}

pub(super) fn run(cfg: &ExperimentConfig, _seeds: &SeedSplitter) -> CliResult<ReportBundle> {
    let p = cfg.params();
    let order = p.usize("quad_order", 3)?;
    let ball_order = p.usize("ball_order", 8)?;
    let eps_small = p.f64("small_ball_eps", 0.05)?;
    let k_max = p.usize("k_max", 4)?;
    let eps_weak = p.list_f64("weak_eps", &[0.1, 0.01, 0.001])?;
    let tetrix = DiscreteMeasure::generate(&MeasureFamily::tetrix(4), 0)?;
    let mut report = ReportBundle::new(&cfg.experiment, cfg.seed, cfg.params.clone());

    let mut mass = Table::new("mass", &["measure", "eps", "atoms", "mass_before", "mass_after", "abs_error"]);
    let mut worst_mass: f64 = 0.0;
    for family in [MeasureFamily::tetrix(4), MeasureFamily::PlanePatch { n: 16 }, MeasureFamily::Sphere { n: 200 }] {
        let m = DiscreteMeasure::generate(&family, 0)?;
        for &eps in &[0.1, 0.01, 0.001] {
            let me = m.mollify(eps, order)?;
            let err = (me.total_mass() - m.total_mass()).abs();
            worst_mass = worst_mass.max(err);
            mass.push(vec![
                family.name().into(),
                eps.into(),
                me.len().into(),
                m.total_mass().into(),
                me.total_mass().into(),
                err.into(),
            ]);
        }
    }
    report.check(Check::below(CRITERION, "mass conservation", worst_mass, 1e-12));

    // C from nu_eps(B(x,s)) <= |B(0,1)| max(phi) eps^-3 s^3 nu(B(x, s + eps)) at k = 0, reused for k <= k_max.
    let eps = eps_small;
    let nu = MollifiedMeasure::new(&tetrix, eps)?;
    let centers: Vec<Point> = tetrix.points.iter().step_by(7).cloned().collect();
    let big = centers.iter().map(|x| tetrix.ball_masses(x, &[2.0 * eps])[0]).fold(0.0, f64::max);
    let c = 2.0 * (4.0 * std::f64::consts::PI / 3.0) * big / (eps * eps);
    let mut growth = Table::new("small_ball", &["k", "s", "max_mass", "bound", "ratio"]);
    let mut worst_ratio: f64 = 0.0;
    for k in 0..=k_max as i32 {
        let s = eps * 2f64.powi(-k);
        let bound = c * eps * eps * 2f64.powi(-3 * k);
        let max_mass = centers.iter().map(|x| nu.ball_mass(x, s, ball_order)).fold(0.0, f64::max);
        worst_ratio = worst_ratio.max(max_mass / bound);
        growth.push(vec![(k as usize).into(), s.into(), max_mass.into(), bound.into(), (max_mass / bound).into()]);
    }
    report.check(
        Check::at_most(CRITERION, "small-ball growth nu_eps(B) / (C eps^2 2^-3k)", worst_ratio, 1.0)
            .note(format!("tetrix(4), eps = {eps}, C = {c:.4e} fitted at k = 0, k <= {k_max}")),
    );

    let exact = tetrix.integrate(test_function);
    let mut weak = Table::new("weak", &["eps", "integral", "exact", "abs_error"]);
    let mut errs = Vec::new();
    for &e in &eps_weak {
        let v = tetrix.mollify(e, order)?.integrate(test_function);
        errs.push((v - exact).abs());
        weak.push(vec![e.into(), v.into(), exact.into(), (v - exact).abs().into()]);
    }
    report.check(
        Check::holds(CRITERION, "weak-convergence error strictly decreasing", strictly_decreasing(&errs)).note(
            format!("eps {eps_weak:?}, errors {:?}", errs.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()),
        ),
    );
    report.table(mass);
    report.table(growth);
    report.table(weak);
    Ok(report)
}
