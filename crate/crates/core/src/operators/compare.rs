//! Frozen-coefficient operator `T` against the normalised Riesz transform.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::norm::{opnorm_pairs, NormMethod, PowerOptions};
use super::PairStore;
use crate::kernels::{riesz, FrozenKernel};
use crate::matrixfield::{mat_to_row_major, MatrixField};
use crate::measures::DiscreteMeasure;
use crate::{Error, Point, Result, N_DIM, OMEGA_N};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub delta: f64,
    pub norm_t: f64,
    pub norm_r: f64,
    pub diff_norm: f64,
    /// `(1 + ‖T‖)/(1 + ‖R‖)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// Each column's supremum over the grid (`delta` is NaN).
    pub sup: CompareRow,
    /// Row-major `S` when the measure was normalised.
    pub normalization: Option<[f64; 9]>,
    pub normalization_radius: Option<f64>,
    pub atoms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// Ball-average samples for the frozen kernel and the normalisation.
    pub budget: usize,
    pub seed: u64,
    pub power: PowerOptions,
    pub max_atoms: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { budget: 256, seed: 0, power: PowerOptions::default(), max_atoms: super::DEFAULT_MAX_ATOMS }
    }
}

/// Axis-parallel bounding cube (center, side) of the atoms.
pub fn bounding_cube(points: &[Point]) -> Option<(Point, f64)> {
    let first = points.first()?;
    let (mut lo, mut hi) = (*first, *first);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let side = (hi - lo).max();
    Some(((lo + hi) / 2.0, side))
}

/// Stores for `T`, `R` and `T - R/(4π)` from a single pass over the pairs.
fn frozen_triplet(frozen: &FrozenKernel, measure: &DiscreteMeasure, max_atoms: usize) -> Result<[PairStore; 3]> {
    let n = measure.len();
    if n > max_atoms {
        return Err(Error::BudgetExceeded { atoms: n, max: max_atoms });
    }
    let pts = &measure.points;
    let sw: Vec<f64> = measure.weights.iter().map(|w| w.sqrt()).collect();
    type Row = (Vec<[f64; 3]>, Vec<[f64; 3]>, Vec<[f64; 3]>, Vec<f64>);
    let rows: Vec<Row> = pts
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut row = frozen.row_evaluator(*x);
            let mut out: Row =
                (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
            for (j, y) in pts.iter().enumerate() {
                if i == j {
                    out.0.push([0.0; 3]);
                    out.1.push([0.0; 3]);
                    out.2.push([0.0; 3]);
                    out.3.push(0.0);
                    continue;
                }
                let s = sw[i] * sw[j];
                let t = row.eval(y);
                let r = riesz(&(x - y));
                let d = t - r / OMEGA_N;
                let (t, r, d) = (t * s, r * s, d * s);
                out.0.push([t.x, t.y, t.z]);
                out.1.push([r.x, r.y, r.z]);
                out.2.push([d.x, d.y, d.z]);
                out.3.push((x - y).norm());
            }
            out
        })
        .collect();
    let mut t = Vec::with_capacity(n * n);
    let mut r = Vec::with_capacity(n * n);
    let mut d = Vec::with_capacity(n * n);
    let mut dist = Vec::with_capacity(n * n);
    for row in rows {
        t.extend(row.0);
        r.extend(row.1);
        d.extend(row.2);
        dist.extend(row.3);
    }
    Ok([
        PairStore { n, values: t, dist: dist.clone() },
        PairStore { n, values: r, dist: dist.clone() },
        PairStore { n, values: d, dist },
    ])
}

/// Norms of `T`, `R` and `T - (4π)⁻¹R` over a δ-grid.
///
/// With `normalize`, the field is conjugated by `S = √(sym Ā)` where `Ā` is
/// the average over the ball of radius `4nΛℓ(Q)` around the center of the
/// bounding cube `Q`, and the measure is pushed forward by `S⁻¹`.
pub fn compare_t_r(
    measure: &DiscreteMeasure,
    field: &MatrixField,
    delta_grid: &[f64],
    normalize: bool,
    opts: &CompareOptions,
) -> Result<CompareReport> {
    if measure.is_empty() {
        return Err(Error::EmptyRestriction);
    }
    let (mu, used_field, s, radius) = if normalize {
        let (center, side) = bounding_cube(&measure.points).ok_or(Error::EmptyRestriction)?;
        if !(side > 0.0) {
            return Err(Error::Domain("cannot normalise a measure supported at one point".into()));
        }
        let radius = 4.0 * N_DIM as f64 * field.lambda() * side;
        let cov = field.normalize_cov(&center, radius, opts.budget.max(1024), opts.seed)?;
        let pushed = DiscreteMeasure {
            points: measure.points.iter().map(|p| cov.s_inv * p).collect(),
            weights: measure.weights.clone(),
            meta: measure.meta.clone(),
        };
        (pushed, cov.hat_a, Some(mat_to_row_major(cov.s.matrix())), Some(radius))
    } else {
        (measure.clone(), field.clone(), None, None)
    };
    let frozen = FrozenKernel::new(used_field, opts.budget, opts.seed)?;
    let [t, r, d] = frozen_triplet(&frozen, &mu, opts.max_atoms)?;
    let nt = opnorm_pairs(&t, delta_grid, NormMethod::Power, &opts.power)?;
    let nr = opnorm_pairs(&r, delta_grid, NormMethod::Power, &opts.power)?;
    let nd = opnorm_pairs(&d, delta_grid, NormMethod::Power, &opts.power)?;
    let rows: Vec<CompareRow> = delta_grid
        .iter()
        .enumerate()
        .map(|(k, &delta)| {
            let (a, b, c) = (nt.per_delta[k].sigma_max, nr.per_delta[k].sigma_max, nd.per_delta[k].sigma_max);
            CompareRow { delta, norm_t: a, norm_r: b, diff_norm: c, ratio: (1.0 + a) / (1.0 + b) }
        })
        .collect();
    let sup = CompareRow {
        delta: f64::NAN,
        norm_t: nt.sup,
        norm_r: nr.sup,
        diff_norm: nd.sup,
        ratio: (1.0 + nt.sup) / (1.0 + nr.sup),
    };
    Ok(CompareReport { rows, sup, normalization: s, normalization_radius: radius, atoms: mu.len() })
}
