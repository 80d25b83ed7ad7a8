//! Truncated singular integral operators on `L²(μ)` for discrete measures.
//!
//! `T_{μ,δ} f(x) = Σ_{|x-y|>δ} K(x,y) f(y) w(y)` is applied pointwise, assembled
//! densely (`3N × N` blocks) or kept in a weighted pair store that serves
//! every truncation radius of a δ-grid from one kernel evaluation pass.

mod compare;
mod geometry;
mod norm;
mod schur;

pub use compare::{bounding_cube, compare_t_r, CompareOptions, CompareReport, CompareRow};
pub use geometry::{
    beta_flatness, beta_for_plane, criterion_check, geometry_functionals, mean_oscillation, AlphaSpec, BetaReport,
    CriterionParams, CriterionReport, GeometryReport, Hypothesis, Plane,
};
pub use norm::{
    opnorm, opnorm_pairs, power_norm, svd_norm, NormMethod, NormalOperator, OpNormEstimate, OpNormReport, PowerOptions,
    SVD_MAX_ATOMS,
};
pub use schur::{discrete_schur, schur_bound, SchurReport};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::kernels::KernelSpec;
use crate::measures::DiscreteMeasure;
use crate::numeric::{geometric_grid, pairwise_sum_with};
use crate::{Error, Point, Result};

/// Default cap on atoms for dense assembly.
pub const DEFAULT_MAX_ATOMS: usize = 8192;

/// Rows per chunk in parallel reductions; fixed so results do not depend on
/// the thread count.
const ROW_CHUNK: usize = 32;

/// Kernel, measure and truncation radius.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedOperator<'a> {
    pub kernel: &'a KernelSpec,
    pub measure: &'a DiscreteMeasure,
    pub delta: f64,
}

impl<'a> TruncatedOperator<'a> {
    pub fn new(kernel: &'a KernelSpec, measure: &'a DiscreteMeasure, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("truncation radius must be positive, got {delta}")));
        }
        Ok(Self { kernel, measure, delta })
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    /// `T_{μ,δ} f(x)` with a fixed pairwise summation tree over the atoms.
    pub fn apply(&self, f: &[f64], x: &Point) -> Point {
        let pts = &self.measure.points;
        let w = &self.measure.weights;
        pairwise_sum_with(pts.len(), Point::zeros(), &|j| {
            let y = &pts[j];
            if (x - y).norm() > self.delta {
                (self.kernel.eval_unchecked(x, y) * w[j]) * f[j]
            } else {
                Point::zeros()
            }
        })
    }

    /// `T_{μ,δ} f` at every atom.
    pub fn apply_at_atoms(&self, f: &[f64]) -> Vec<Point> {
        self.measure.points.par_iter().map(|x| self.apply(f, x)).collect()
    }

    /// Dense `3N × N` matrix with block `(i, j) = K(x_i, x_j) w_j [|x_i - x_j| > δ]`.
    pub fn assemble(&self, max_atoms: usize) -> Result<AssembledOperator> {
        let n = self.len();
        if n > max_atoms {
            return Err(Error::BudgetExceeded { atoms: n, max: max_atoms });
        }
        let pts = &self.measure.points;
        let w = &self.measure.weights;
        let rows: Vec<Vec<Point>> = pts
            .par_iter()
            .map(|x| {
                let mut row = self.kernel.row_evaluator(*x);
                pts.iter()
                    .zip(w)
                    .map(|(y, &wj)| if (x - y).norm() > self.delta { row.eval(y) * wj } else { Point::zeros() })
                    .collect()
            })
            .collect();
        let mut m = DMatrix::zeros(3 * n, n);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                for c in 0..3 {
                    m[(3 * i + c, j)] = v[c];
                }
            }
        }
        Ok(AssembledOperator { matrix: m })
    }
}

/// Dense block matrix of a truncated operator.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledOperator {
    /// Row `3i + c`, column `j`.
    pub matrix: DMatrix<f64>,
}

impl AssembledOperator {
    pub fn atoms(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn block(&self, i: usize, j: usize) -> Point {
        Point::new(self.matrix[(3 * i, j)], self.matrix[(3 * i + 1, j)], self.matrix[(3 * i + 2, j)])
    }

    /// Matrix times `f`, summed with the same tree as [`TruncatedOperator::apply`].
    pub fn apply(&self, f: &[f64]) -> Vec<Point> {
        (0..self.atoms())
            .map(|i| pairwise_sum_with(self.atoms(), Point::zeros(), &|j| self.block(i, j) * f[j]))
            .collect()
    }

    /// Conjugation `D^{1/2} M D^{-1/2}` whose spectral norm is the `L²(μ)` norm.
    pub fn weighted(&self, weights: &[f64]) -> DMatrix<f64> {
        let n = self.atoms();
        DMatrix::from_fn(3 * n, n, |r, j| {
            let i = r / 3;
            self.matrix[(r, j)] * (weights[i] / weights[j]).sqrt()
        })
    }
}

/// Weighted kernel values `√(w_i w_j) K(x_i, x_j)` for all ordered pairs
/// `i ≠ j`, stored row-major with pair distances, so that any truncation
/// radius is a mask.
#[derive(Debug, Clone)]
pub struct PairStore {
    pub(crate) n: usize,
    pub(crate) values: Vec<[f64; 3]>,
    pub(crate) dist: Vec<f64>,
}

impl PairStore {
    pub fn build(kernel: &KernelSpec, measure: &DiscreteMeasure, max_atoms: usize) -> Result<Self> {
        let n = measure.len();
        if n > max_atoms {
            return Err(Error::BudgetExceeded { atoms: n, max: max_atoms });
        }
        let pts = &measure.points;
        let sw: Vec<f64> = measure.weights.iter().map(|w| w.sqrt()).collect();
        let rows: Vec<(Vec<[f64; 3]>, Vec<f64>)> = pts
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut row = kernel.row_evaluator(*x);
                let mut vals = Vec::with_capacity(n);
                let mut dist = Vec::with_capacity(n);
                for (j, y) in pts.iter().enumerate() {
                    if i == j {
                        vals.push([0.0; 3]);
                        dist.push(0.0);
                    } else {
                        let k = row.eval(y) * (sw[i] * sw[j]);
                        vals.push([k.x, k.y, k.z]);
                        dist.push((x - y).norm());
                    }
                }
                (vals, dist)
            })
            .collect();
        let mut values = Vec::with_capacity(n * n);
        let mut dist = Vec::with_capacity(n * n);
        for (v, d) in rows {
            values.extend(v);
            dist.extend(d);
        }
        Ok(Self { n, values, dist })
    }

    pub fn atoms(&self) -> usize {
        self.n
    }

    /// `a·self + b·other` on the same measure.
    pub fn combine(&self, a: f64, other: &PairStore, b: f64) -> Result<PairStore> {
        if self.n != other.n || self.dist != other.dist {
            return Err(Error::Invalid("pair stores live on different measures".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| [a * u[0] + b * v[0], a * u[1] + b * v[1], a * u[2] + b * v[2]])
            .collect();
        Ok(Self { n: self.n, values, dist: self.dist.clone() })
    }

    /// Truncated view at radius `delta`.
    pub fn at(&self, delta: f64) -> TruncatedPairs<'_> {
        TruncatedPairs { store: self, delta }
    }

    /// Dense conjugated `3N × N` matrix at radius `delta`.
    pub fn dense(&self, delta: f64) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(3 * n, n, |r, j| {
            let (i, c) = (r / 3, r % 3);
            let k = i * n + j;
            if self.dist[k] > delta {
                self.values[k][c]
            } else {
                0.0
            }
        })
    }

    /// Row sums `Σ_j |K(x_i,x_j)| w_j` and column sums `Σ_i |K(x_i,x_j)| w_i`
    /// over pairs at distance `> delta`.
    pub fn abs_sums(&self, weights: &[f64], delta: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                if self.dist[k] > delta {
                    let v = self.values[k];
                    // |V| = √(w_i w_j)|K|.
                    let a = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() / (sw[i] * sw[j]);
                    rows[i] += a * weights[j];
                    cols[j] += a * weights[i];
                }
            }
        }
        (rows, cols)
    }
}

/// [`PairStore`] restricted to pairs at distance `> delta`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedPairs<'a> {
    store: &'a PairStore,
    delta: f64,
}

impl NormalOperator for TruncatedPairs<'_> {
    fn dim(&self) -> usize {
        self.store.n
    }

    /// `Bᵀ B v` in one sweep: each row is read once for `u_i = (B v)_i` and
    /// again, while cached, to scatter `u_i` into `Bᵀ u`.
    fn apply_normal(&self, v: &[f64], out: &mut [f64]) {
        let n = self.store.n;
        let delta = self.delta;
        let partials: Vec<Vec<f64>> = (0..n.div_ceil(ROW_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut acc = vec![0.0; n];
                for i in chunk * ROW_CHUNK..((chunk + 1) * ROW_CHUNK).min(n) {
                    let vals = &self.store.values[i * n..(i + 1) * n];
                    let dist = &self.store.dist[i * n..(i + 1) * n];
                    let mut u = [0.0; 3];
                    for j in 0..n {
                        if dist[j] > delta {
                            let k = vals[j];
                            u[0] += k[0] * v[j];
                            u[1] += k[1] * v[j];
                            u[2] += k[2] * v[j];
                        }
                    }
                    for j in 0..n {
                        if dist[j] > delta {
                            let k = vals[j];
                            acc[j] += k[0] * u[0] + k[1] * u[1] + k[2] * u[2];
                        }
                    }
                }
                acc
            })
            .collect();
        reduce_partials(partials, out);
    }
}

/// Sums chunk partials with a fixed pairwise tree into `out`.
fn reduce_partials(mut partials: Vec<Vec<f64>>, out: &mut [f64]) {
    while partials.len() > 1 {
        let mut next = Vec::with_capacity(partials.len().div_ceil(2));
        let mut it = partials.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        partials = next;
    }
    match partials.pop() {
        Some(p) => out.copy_from_slice(&p),
        None => out.iter_mut().for_each(|o| *o = 0.0),
    }
}

/// Matrix-free operator that re-evaluates the kernel on every product.
/// Memory is `O(N)`; use when dense storage is over budget.
#[derive(Debug, Clone, Copy)]
pub struct StreamedOperator<'a> {
    pub op: TruncatedOperator<'a>,
}

impl NormalOperator for StreamedOperator<'_> {
    fn dim(&self) -> usize {
        self.op.len()
    }

    fn apply_normal(&self, v: &[f64], out: &mut [f64]) {
        let m = self.op.measure;
        let n = m.len();
        let sw: Vec<f64> = m.weights.iter().map(|w| w.sqrt()).collect();
        let delta = self.op.delta;
        let partials: Vec<Vec<f64>> = (0..n.div_ceil(ROW_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut acc = vec![0.0; n];
                let mut buf = vec![Point::zeros(); n];
                for i in chunk * ROW_CHUNK..((chunk + 1) * ROW_CHUNK).min(n) {
                    let x = m.points[i];
                    let mut row = self.op.kernel.row_evaluator(x);
                    let mut u = Point::zeros();
                    for (j, y) in m.points.iter().enumerate() {
                        buf[j] = if (x - y).norm() > delta { row.eval(y) * (sw[i] * sw[j]) } else { Point::zeros() };
                        u += buf[j] * v[j];
                    }
                    for j in 0..n {
                        acc[j] += buf[j].dot(&u);
                    }
                }
                acc
            })
            .collect();
        reduce_partials(partials, out);
    }
}

/// Largest pairwise distance.
pub fn diameter(points: &[Point]) -> f64 {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| points[i + 1..].iter().map(|q| (p - q).norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// Default truncation grid: 12 geometric radii from just below the minimum
/// atom spacing (so nearest neighbours interact) to the diameter.
pub fn auto_delta_grid(measure: &DiscreteMeasure, count: usize) -> Result<Vec<f64>> {
    if measure.len() < 2 {
        return Err(Error::Invalid("delta grid needs at least two atoms".into()));
    }
    let lo = 0.999 * measure.min_spacing();
    let hi = diameter(&measure.points);
    Ok(geometric_grid(lo, hi.max(lo), count.max(1)))
}

pub const DEFAULT_DELTA_COUNT: usize = 12;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::FrozenKernel;
    use crate::matrixfield::MatrixField;
    use crate::measures::{MeasureFamily, MeasureMeta};
    use crate::OMEGA_N;

    pub(crate) fn two_atoms() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![Point::zeros(), Point::new(1.0, 0.0, 0.0)], vec![1.0, 1.0], MeasureMeta::default())
            .unwrap()
    }

    #[test]
    fn apply_truncated_examples() {
        let m = two_atoms();
        let k = KernelSpec::Riesz;
        let op = TruncatedOperator::new(&k, &m, 0.5).unwrap();
        assert_eq!(op.apply(&[1.0, 1.0], &Point::zeros()), Point::new(-1.0, 0.0, 0.0));
        let far = TruncatedOperator::new(&k, &m, 2.0).unwrap();
        assert_eq!(far.apply(&[1.0, 1.0], &Point::zeros()), Point::zeros());
        assert!(TruncatedOperator::new(&k, &m, 0.0).is_err());
    }

    #[test]
    fn frozen_identity_is_riesz_over_four_pi() {
        let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(3), 0).unwrap();
        let r = KernelSpec::Riesz;
        let f = KernelSpec::Frozen(FrozenKernel::new(MatrixField::identity(), 64, 0).unwrap());
        let ones = vec![1.0; m.len()];
        for x in m.points.iter().take(8) {
            let a = TruncatedOperator::new(&r, &m, 0.05).unwrap().apply(&ones, x);
            let b = TruncatedOperator::new(&f, &m, 0.05).unwrap().apply(&ones, x);
            assert!((b - a / OMEGA_N).norm() <= 1e-15 * a.norm().max(1.0));
        }
    }

    #[test]
    fn assembly_matches_pointwise_application_exactly() {
        let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(3), 0).unwrap();
        let field = MatrixField::LogDini { gamma: 0.25, lambda: 2.0, axis_weights: Some([1.0, 0.5, 0.2]) };
        for k in [KernelSpec::Riesz, KernelSpec::Frozen(FrozenKernel::new(field, 128, 1).unwrap())] {
            let op = TruncatedOperator::new(&k, &m, 0.1).unwrap();
            let a = op.assemble(DEFAULT_MAX_ATOMS).unwrap();
            let f: Vec<f64> = (0..m.len()).map(|i| (i as f64 * 0.37).sin()).collect();
            assert_eq!(a.apply(&f), op.apply_at_atoms(&f));
            let ones = vec![1.0; m.len()];
            assert_eq!(a.apply(&ones), op.apply_at_atoms(&ones));
        }
    }

    #[test]
    fn two_atom_blocks() {
        let m = two_atoms();
        let k = KernelSpec::Riesz;
        let a = TruncatedOperator::new(&k, &m, 0.5).unwrap().assemble(8).unwrap();
        assert_eq!(a.block(0, 1), Point::new(-1.0, 0.0, 0.0));
        assert_eq!(a.block(1, 0), Point::new(1.0, 0.0, 0.0));
        assert_eq!(a.block(0, 0), Point::zeros());
        assert_eq!(a.block(1, 1), Point::zeros());
        let err = TruncatedOperator::new(&k, &m, 0.5).unwrap().assemble(1).unwrap_err();
        assert!(err.to_string().contains("row-streamed"));
    }

    #[test]
    fn admissible_pairs_grow_as_delta_shrinks() {
        let m = DiscreteMeasure::generate(&MeasureFamily::Sphere { n: 60 }, 0).unwrap();
        let k = KernelSpec::Riesz;
        let grid = geometric_grid(0.01, 2.0, 10);
        let masks: Vec<Vec<bool>> = grid
            .iter()
            .map(|&d| {
                let a = TruncatedOperator::new(&k, &m, d).unwrap().assemble(100).unwrap();
                a.matrix.iter().map(|v| *v != 0.0).collect()
            })
            .collect();
        for w in masks.windows(2) {
            // w[0] has the smaller delta.
            assert!(w[1].iter().zip(&w[0]).all(|(big, small)| !big || *small));
        }
    }

    #[test]
    fn pair_store_matches_assembly() {
        let m = DiscreteMeasure::generate(&MeasureFamily::Sphere { n: 40 }, 0).unwrap();
        let k = KernelSpec::Riesz;
        let store = PairStore::build(&k, &m, 100).unwrap();
        for d in [0.05, 0.3, 1.0] {
            let dense = TruncatedOperator::new(&k, &m, d).unwrap().assemble(100).unwrap().weighted(&m.weights);
            let from_store = store.dense(d);
            assert!((dense - from_store).abs().max() < 1e-15);
        }
    }

    #[test]
    fn streamed_matches_stored_normal_product() {
        let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(3), 0).unwrap();
        let k = KernelSpec::Riesz;
        let store = PairStore::build(&k, &m, 100).unwrap();
        let op = TruncatedOperator::new(&k, &m, 0.1).unwrap();
        let v: Vec<f64> = (0..m.len()).map(|i| (i as f64).cos()).collect();
        let mut a = vec![0.0; m.len()];
        let mut b = vec![0.0; m.len()];
        store.at(0.1).apply_normal(&v, &mut a);
        StreamedOperator { op }.apply_normal(&v, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
