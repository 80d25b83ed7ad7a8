//! Property tests for the cross-module invariants.

use layerpot_core::dini::DEFAULT_PANELS;
use layerpot_core::matrixfield::sym_part;
use layerpot_core::measures::MeasureMeta;
use layerpot_core::operators::{discrete_schur, power_norm, svd_norm, PairStore, PowerOptions};
use layerpot_core::spherical::{build_quadrature, decompose, level_for};
use layerpot_core::{ConstKernel, DiscreteMeasure, KernelSpec, Mat3, MatrixField, OscillationModulus, Point};
use proptest::prelude::*;

fn modulus() -> impl Strategy<Value = OscillationModulus> {
    prop_oneof![
        (0.05f64..0.95).prop_map(OscillationModulus::power),
        (0.05f64..2.0).prop_map(OscillationModulus::log_power),
    ]
}

fn symmetric(e: [f64; 6], scale: f64) -> Mat3 {
    Mat3::new(e[0], e[1], e[2], e[1], e[3], e[4], e[2], e[4], e[5]) * scale
}

fn elliptic() -> impl Strategy<Value = Mat3> {
    prop::array::uniform6(-1.0f64..1.0).prop_map(|e| Mat3::identity() + symmetric(e, 0.15))
}

fn point() -> impl Strategy<Value = Point> {
    prop::array::uniform3(-1.0f64..1.0).prop_map(|[x, y, z]| Point::new(x, y, z))
}

fn small_measure() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::array::uniform3(0.0f64..1.0), 0.1f64..2.0), 3..24).prop_filter_map(
        "atoms must be distinct",
        |atoms| {
            let (points, weights): (Vec<Point>, Vec<f64>) =
                atoms.into_iter().map(|([x, y, z], w)| (Point::new(x, y, z), w)).unzip();
            DiscreteMeasure::new(points, weights, MeasureMeta::default()).ok().filter(|m| m.min_spacing() > 1e-3)
        },
    )
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn small_dini_is_monotone_and_dominates_theta(theta in modulus(), r1 in 1e-6f64..0.9, f in 1.0f64..50.0) {
        let r2 = r1 * f;
        let (a, b) = (theta.dini_small(r1, DEFAULT_PANELS).unwrap(), theta.dini_small(r2, DEFAULT_PANELS).unwrap());
        prop_assert!(a >= 0.0 && a.is_finite() && a <= b * (1.0 + 1e-12));
        prop_assert!(theta.eval(r1).unwrap() <= theta.kappa() * a * (1.0 + 1e-12));
    }

    #[test]
    fn large_dini_is_doubling_and_satisfies_fubini(theta in modulus(), t in 1e-5f64..0.9, s in 0.5f64..1.0) {
        let d = 2.0;
        let lt = theta.dini_large(d, t, DEFAULT_PANELS).unwrap();
        let ls = theta.dini_large(d, s * t, DEFAULT_PANELS).unwrap();
        prop_assert!(lt <= 4.0 * ls * (1.0 + 1e-12));
        let lhs = d * theta.dini_large_of_small(d, t, DEFAULT_PANELS).unwrap();
        let rhs = theta.dini_small(t, DEFAULT_PANELS).unwrap() + lt;
        prop_assert!(rel(lhs, rhs) < 1e-6, "{lhs} vs {rhs}");
    }

    #[test]
    fn const_kernel_is_homogeneous_odd_and_blind_to_skew(a in elliptic(), z in point(), k in prop::array::uniform3(-1.0f64..1.0)) {
        prop_assume!(z.norm() > 1e-3);
        let base = ConstKernel::new(a).unwrap();
        let g = base.grad_theta(&z).unwrap();
        for lambda in [0.5, 2.0, 10.0] {
            let scaled = base.grad_theta(&(z * lambda)).unwrap() * (lambda * lambda);
            prop_assert!((scaled - g).norm() <= 1e-13 * g.norm());
        }
        prop_assert!((base.grad_theta(&-z).unwrap() + g).norm() <= 1e-13 * g.norm());
        let skew = Mat3::new(0.0, k[0], k[1], -k[0], 0.0, k[2], -k[1], -k[2], 0.0) * 0.25;
        let shifted = ConstKernel::new(a + skew).unwrap();
        prop_assert!((shifted.grad_theta(&z).unwrap() - g).norm() <= 1e-14 * g.norm());
    }

    #[test]
    fn ball_average_is_deterministic_and_commutes_with_symmetrisation(x in point(), r in 0.01f64..1.0, seed in 0u64..1000) {
        let field = MatrixField::log_dini(0.25);
        let a = field.ball_average(&x, r, 256, seed);
        prop_assert_eq!(a, field.ball_average(&x, r, 256, seed));
        prop_assert!((sym_part(&a) - a).abs().max() <= 1e-12);
    }

    #[test]
    fn admissible_pairs_grow_as_delta_shrinks(m in small_measure(), d1 in 0.05f64..1.0, f in 0.1f64..1.0) {
        let store = PairStore::build(&KernelSpec::Riesz, &m, 64).unwrap();
        let (wide, narrow) = (store.dense(d1), store.dense(d1 * f));
        for (a, b) in wide.iter().zip(narrow.iter()) {
            prop_assert!(*a == 0.0 || *b != 0.0);
        }
    }

    #[test]
    fn power_matches_svd_and_schur_dominates(m in small_measure(), theta in modulus(), delta in 1e-3f64..0.5) {
        let kernel = KernelSpec::Theta { theta, d: 2.0 };
        let store = PairStore::build(&kernel, &m, 64).unwrap();
        let svd = svd_norm(&store, delta).unwrap().sigma_max;
        let (p, _) = power_norm(&store.at(delta), None, &PowerOptions::default()).unwrap();
        prop_assert!((p.sigma_max - svd).abs() <= 1e-8 * svd.max(1e-300), "{} vs {svd}", p.sigma_max);
        let schur = discrete_schur(&store, &m.weights, delta);
        prop_assert!(svd <= schur.discrete * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn odd_kernels_reconstruct_oddly(a in elliptic(), zeta in point()) {
        prop_assume!(zeta.norm() > 1e-3);
        let zeta = zeta.normalize();
        let kernel = ConstKernel::new(a).unwrap();
        let j_max = 8;
        let quad = build_quadrature(level_for(j_max, 4)).unwrap();
        let dec = decompose(|z| kernel.grad_theta(z).unwrap(), j_max, &quad).unwrap();
        let (plus, minus) = (dec.reconstruct(&zeta), dec.reconstruct(&-zeta));
        prop_assert!((plus + minus).norm() <= 1e-10 * plus.norm().max(1.0));
        let kept: f64 = dec.coeffs.iter().flat_map(|c| c.iter()).map(|c| c * c).sum();
        prop_assert!(rel(kept + dec.residual * dec.residual, dec.norm_sq) < 1e-8);
    }
}
