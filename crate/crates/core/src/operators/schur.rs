//! Schur-test bounds for `(θ, d)`-kernels on discrete measures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PairStore;
use crate::dini::OscillationModulus;
use crate::measures::DiscreteMeasure;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchurReport {
    /// `c₀ 𝔍_θ(R)`, the continuous budget up to its implicit constant.
    pub analytic: Option<f64>,
    /// `max(max row sum, max column sum)` of `|K| w`.
    pub discrete: f64,
    pub max_row: f64,
    pub max_col: f64,
    /// `√(max row · max col)`, the sharper form of the same test.
    pub geometric: f64,
}

impl SchurReport {
    fn from_sums(rows: &[f64], cols: &[f64], analytic: Option<f64>) -> Self {
        let max_row = rows.iter().cloned().fold(0.0, f64::max);
        let max_col = cols.iter().cloned().fold(0.0, f64::max);
        Self { analytic, discrete: max_row.max(max_col), max_row, max_col, geometric: (max_row * max_col).sqrt() }
    }
}

/// Schur bound for the envelope kernel `θ(|x-y|)/|x-y|^d` on `μ`, together
/// with the analytic budget `c₀ 𝔍_θ(R)`. `R` must cover the support.
pub fn schur_bound(
    theta: &OscillationModulus,
    d: f64,
    measure: &DiscreteMeasure,
    big_r: f64,
    c0: f64,
    panels: usize,
) -> Result<SchurReport> {
    if !(d > 0.0 && d <= 3.0) {
        return Err(Error::Domain(format!("kernel exponent must lie in (0, 3], got {d}")));
    }
    let diam = super::diameter(&measure.points);
    if big_r < diam {
        return Err(Error::Domain(format!("R = {big_r} is smaller than the support diameter {diam}")));
    }
    let analytic = c0 * theta.dini_small(big_r, panels)?;
    let pts = &measure.points;
    let w = &measure.weights;
    let env = |r: f64| theta.eval_log(r.ln()) / r.powf(d);
    // The envelope is symmetric, so row and column sums differ only in the weight placement.
    let rows: Vec<f64> = pts
        .par_iter()
        .enumerate()
        .map(|(i, x)| pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(j, y)| env((x - y).norm()) * w[j]).sum())
        .collect();
    let cols: Vec<f64> = pts
        .par_iter()
        .enumerate()
        .map(|(j, y)| pts.iter().enumerate().filter(|(i, _)| *i != j).map(|(i, x)| env((x - y).norm()) * w[i]).sum())
        .collect();
    Ok(SchurReport::from_sums(&rows, &cols, Some(analytic)))
}

/// Schur bound of the stored kernel itself at truncation `delta`.
pub fn discrete_schur(store: &PairStore, weights: &[f64], delta: f64) -> SchurReport {
    let (rows, cols) = store.abs_sums(weights, delta);
    SchurReport::from_sums(&rows, &cols, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::measures::{MeasureFamily, MeasureMeta};
    use crate::operators::{opnorm_pairs, NormMethod, PowerOptions, DEFAULT_MAX_ATOMS};
    use crate::Point;

    #[test]
    fn zero_modulus_gives_zero() {
        let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(2), 0).unwrap();
        let s = schur_bound(&OscillationModulus::constant(0.0), 2.0, &m, 2.0, 1.0, 0).unwrap();
        assert_eq!(s.discrete, 0.0);
        assert_eq!(s.analytic, Some(0.0));
    }

    #[test]
    fn two_atom_bound_is_one() {
        let m = DiscreteMeasure::new(
            vec![Point::zeros(), Point::new(1.0, 0.0, 0.0)],
            vec![1.0, 1.0],
            MeasureMeta::default(),
        )
        .unwrap();
        let s = schur_bound(&OscillationModulus::power(1.0), 2.0, &m, 1.0, 1.0, 0).unwrap();
        assert!((s.discrete - 1.0).abs() < 1e-15);
        assert!(schur_bound(&OscillationModulus::power(1.0), 2.0, &m, 0.5, 1.0, 0).is_err());
    }

    #[test]
    fn theta_kernel_norm_is_dominated() {
        let m = DiscreteMeasure::generate(&MeasureFamily::PlanePatch { n: 32 }, 0).unwrap();
        let theta = OscillationModulus::power(0.5);
        let k = KernelSpec::Theta { theta: theta.clone(), d: 2.0 };
        let store = PairStore::build(&k, &m, DEFAULT_MAX_ATOMS).unwrap();
        let grid = [0.999 / 32.0, 0.1, 0.3];
        let norms = opnorm_pairs(&store, &grid, NormMethod::Power, &PowerOptions::default()).unwrap();
        let s = schur_bound(&theta, 2.0, &m, 2.0, 1.0, 0).unwrap();
        assert!(norms.sup <= s.discrete, "{} > {}", norms.sup, s.discrete);
        for &d in &grid {
            let own = discrete_schur(&store, &m.weights, d);
            assert!(own.discrete <= s.discrete * (1.0 + 1e-12));
        }
    }
}
