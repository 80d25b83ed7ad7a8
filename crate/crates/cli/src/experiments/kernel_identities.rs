use layerpot_core::kernels::{riesz_kernel, ConstKernel};
use layerpot_core::{Mat3, Point, OMEGA_N};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ExperimentConfig;
use crate::error::CliResult;
use crate::report::{Check, ReportBundle, Table};
use crate::seeds::SeedSplitter;

const CRITERION: Option<u8> = Some(1);

pub(crate) fn random_direction(rng: &mut impl Rng) -> Point {
    loop {
        let p = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = p.norm();
        if n > 1e-3 && n <= 1.0 {
            return p / n;
        }
    }
}

/// `z = r ζ` with `ζ` uniform on the sphere and `log₁₀ r` uniform on `[-3, 3]`.
fn random_z(rng: &mut impl Rng) -> Point {
    random_direction(rng) * 10f64.powf(rng.gen_range(-3.0..3.0))
}

fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let q = loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            break v.map(|x| x / n);
        }
    };
    let [w, x, y, z] = q;
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Symmetric matrix with spectrum in `[1/Λ, Λ]`, exactly symmetric.
pub(crate) fn random_spd(rng: &mut impl Rng, lambda: f64) -> Mat3 {
    let q = random_rotation(rng);
    let d = Mat3::from_diagonal(&Point::new(
        rng.gen_range(1.0 / lambda..lambda),
        rng.gen_range(1.0 / lambda..lambda),
        rng.gen_range(1.0 / lambda..lambda),
    ));
    let m = q * d * q.transpose();
    (m + m.transpose()) * 0.5
}

fn random_skew(rng: &mut impl Rng, size: f64) -> Mat3 {
    let (a, b, c) = (rng.gen_range(-size..size), rng.gen_range(-size..size), rng.gen_range(-size..size));
    Mat3::new(0.0, a, b, -a, 0.0, c, -b, -c, 0.0)
}

fn rel(a: &Point, b: &Point) -> f64 {
    (a - b).norm() / b.norm()
}

pub(super) fn run(cfg: &ExperimentConfig, seeds: &SeedSplitter) -> CliResult<ReportBundle> {
    let p = cfg.params();
    let samples = p.usize("samples", 10_000)?;
    let matrices = p.usize("matrices", 100)?;
    let lambda = p.f64("lambda", 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.stream("kernel-identities"));
    let mut report = ReportBundle::new(&cfg.experiment, cfg.seed, cfg.params.clone());
    let mut table = Table::new("identities", &["identity", "samples", "max_rel_error", "tolerance"]);

    let id = ConstKernel::new(Mat3::identity())?;
    let mut worst_riesz: f64 = 0.0;
    for _ in 0..samples {
        let z = random_z(&mut rng);
        let want = riesz_kernel(&z)? / OMEGA_N;
        worst_riesz = worst_riesz.max(rel(&id.grad_general(&z), &want));
    }
    table.push(vec!["identity-is-riesz".into(), samples.into(), worst_riesz.into(), 1e-13.into()]);
    report.check(Check::below(CRITERION, "grad_theta(Id) = riesz/4pi", worst_riesz, 1e-13));

    let per = (samples / matrices.max(1)).max(1);
    let (mut worst_skew, mut worst_hom, mut worst_odd): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut dyadic_exact = true;
    for _ in 0..matrices {
        let s = random_spd(&mut rng, lambda);
        let k_sym = ConstKernel::new(s)?;
        let k_full = ConstKernel::new(s + random_skew(&mut rng, 0.5))?;
        // Dyadic entries symmetrise without rounding, so invariance is bitwise.
        let dy = (s * 64.0).map(f64::round) / 64.0 + Mat3::identity();
        let k_dy = ConstKernel::new(dy)?;
        let k_dy_skew = ConstKernel::new(dy + (random_skew(&mut rng, 0.5) * 64.0).map(f64::round) / 64.0)?;
        for _ in 0..per {
            let z = random_z(&mut rng);
            let base = k_sym.grad_theta(&z)?;
            worst_skew = worst_skew.max(rel(&k_full.grad_theta(&z)?, &base));
            dyadic_exact &= k_dy.grad_theta(&z)? == k_dy_skew.grad_theta(&z)?;
            dyadic_exact &= k_dy.theta(&z)? == k_dy_skew.theta(&z)?;
            worst_odd = worst_odd.max(rel(&k_full.grad_theta(&-z)?, &-k_full.grad_theta(&z)?));
            for lam in [0.5, 2.0, 10.0] {
                let scaled = k_full.grad_theta(&(z * lam))?;
                worst_hom = worst_hom.max(rel(&scaled, &(k_full.grad_theta(&z)? / (lam * lam))));
            }
        }
    }
    let checked = per * matrices;
    table.push(vec!["antisymmetric-invariance".into(), checked.into(), worst_skew.into(), 1e-14.into()]);
    table.push(vec!["homogeneity-degree-minus-2".into(), (3 * checked).into(), worst_hom.into(), 1e-13.into()]);
    table.push(vec!["oddness".into(), checked.into(), worst_odd.into(), 1e-13.into()]);
    report.check(Check::below(CRITERION, "antisymmetric-part invariance", worst_skew, 1e-14));
    report.check(Check::holds(CRITERION, "antisymmetric-part invariance exact on dyadic matrices", dyadic_exact));
    report.check(Check::below(CRITERION, "homogeneity", worst_hom, 1e-13));
    report.check(Check::below(CRITERION, "oddness", worst_odd, 1e-13));
    report.table(table);
    Ok(report)
}
