//! Closed-form kernels.
//!
//! * `Θ(z; A₀)` and `∇Θ(z; A₀)`: fundamental solution of `-div(A₀∇·)` for a
//!   constant matrix and its gradient, depending only on the symmetric part.
//! * `z/|z|³`: the Riesz kernel.
//! * The frozen-coefficient kernel `∇Θ(x - y; Ā_{x,|x-y|/2})`.
//! * The difference kernels used by the perturbation argument, and the
//!   envelope that budgets the (non-evaluable) variable-coefficient remainder.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::dini::OscillationModulus;
use crate::matrixfield::{shared_ball_samples, sym_part, MatrixField, SpdMatrix3};
use crate::{Error, Mat3, Point, Result, N_DIM, OMEGA_N};

/// Bins per octave used to quantise frozen-kernel averaging radii.
pub const RADIUS_BINS_PER_OCTAVE: f64 = 64.0;

/// `z / |z|³`.
#[inline]
pub fn riesz(z: &Point) -> Point {
    let r2 = z.norm_squared();
    z / (r2 * r2.sqrt())
}

/// Riesz kernel with the singularity checked.
pub fn riesz_kernel(z: &Point) -> Result<Point> {
    if *z == Point::zeros() {
        return Err(Error::Singular);
    }
    Ok(riesz(z))
}

/// Constant-coefficient kernel data derived from `A₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstKernel {
    a0: Mat3,
    a0_s: Mat3,
    inv_s: Mat3,
    det_s: f64,
    is_identity: bool,
}

impl ConstKernel {
    pub fn new(a0: Mat3) -> Result<Self> {
        let a0_s = sym_part(&a0);
        let spd = SpdMatrix3::new(a0_s)?;
        let inv_s = spd.inverse();
        let det_s = a0_s.determinant();
        Ok(Self { a0, a0_s, inv_s, det_s, is_identity: a0_s == Mat3::identity() })
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.a0
    }

    pub fn symmetric_part(&self) -> &Mat3 {
        &self.a0_s
    }

    pub fn det_symmetric(&self) -> f64 {
        self.det_s
    }

    /// `Θ(z, 0; A₀)`.
    pub fn theta(&self, z: &Point) -> Result<f64> {
        if *z == Point::zeros() {
            return Err(Error::Singular);
        }
        let n = N_DIM as f64;
        let q = (self.inv_s * z).dot(z);
        Ok(-1.0 / ((n - 1.0) * OMEGA_N * self.det_s.sqrt()) * q.powf(-(n - 1.0) / 2.0))
    }

    /// `∇₁Θ(z, 0; A₀)`.
    pub fn grad_theta(&self, z: &Point) -> Result<Point> {
        if *z == Point::zeros() {
            return Err(Error::Singular);
        }
        Ok(self.grad_unchecked(z))
    }

    #[inline]
    pub(crate) fn grad_unchecked(&self, z: &Point) -> Point {
        if self.is_identity {
            return riesz(z) / OMEGA_N;
        }
        self.grad_general(z)
    }

    /// `∇₁Θ` through the general formula, without the identity shortcut.
    #[inline]
    pub fn grad_general(&self, z: &Point) -> Point {
        let w = self.inv_s * z;
        let q = w.dot(z);
        w / (OMEGA_N * self.det_s.sqrt() * q * q.sqrt())
    }
}

/// `∇₁Θ(z; M)` for a matrix whose symmetric part is SPD (not checked).
#[inline]
fn grad_for_average(z: &Point, avg: &Mat3) -> Point {
    let s = sym_part(avg);
    if s == Mat3::identity() {
        return riesz(z) / OMEGA_N;
    }
    let inv = s.try_inverse().expect("averages of elliptic fields are invertible");
    let w = inv * z;
    let q = w.dot(z);
    w / (OMEGA_N * s.determinant().sqrt() * q * q.sqrt())
}

/// Averaging radius bin for a pair at distance `dist`.
#[inline]
pub fn radius_bin(dist: f64) -> i64 {
    ((dist / 2.0).log2() * RADIUS_BINS_PER_OCTAVE).round() as i64
}

#[inline]
pub fn bin_radius(bin: i64) -> f64 {
    2f64.powf(bin as f64 / RADIUS_BINS_PER_OCTAVE)
}

type CacheKey = ([u64; 3], i64);

/// Frozen-coefficient kernel `∇₁Θ(x - y, 0; Ā_{x,ρ})` with `ρ` the
/// 1/64-octave quantisation of `|x - y|/2`.
#[derive(Debug, Clone)]
pub struct FrozenKernel {
    field: MatrixField,
    budget: usize,
    seed: u64,
    samples: Arc<Vec<Point>>,
    constant: Option<ConstKernel>,
    cache: Arc<RwLock<HashMap<CacheKey, Mat3>>>,
}

impl FrozenKernel {
    pub fn new(field: MatrixField, budget: usize, seed: u64) -> Result<Self> {
        field.validate()?;
        let constant = field.constant_value().map(ConstKernel::new).transpose()?;
        Ok(Self {
            field,
            budget,
            seed,
            samples: shared_ball_samples(budget, seed),
            constant,
            cache: Arc::new(RwLock::new(HashMap::new())),
        })
    }

    pub fn field(&self) -> &MatrixField {
        &self.field
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().map(|c| c.len()).unwrap_or(0)
    }

    /// `Ā_{x, ρ(bin)}` without touching the cache.
    pub fn average_uncached(&self, x: &Point, bin: i64) -> Mat3 {
        self.field.ball_average_with(x, bin_radius(bin), &self.samples)
    }

    /// `Ā_{x, ρ(bin)}`, memoised.
    pub fn average(&self, x: &Point, bin: i64) -> Mat3 {
        let key = ([x.x.to_bits(), x.y.to_bits(), x.z.to_bits()], bin);
        if let Some(v) = self.cache.read().ok().and_then(|c| c.get(&key).copied()) {
            return v;
        }
        let v = self.average_uncached(x, bin);
        if let Ok(mut c) = self.cache.write() {
            c.insert(key, v);
        }
        v
    }

    /// Kernel value at `(x, y)`, `x ≠ y`.
    pub fn eval(&self, x: &Point, y: &Point) -> Result<Point> {
        let z = x - y;
        if z == Point::zeros() {
            return Err(Error::Singular);
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &Point, y: &Point) -> Point {
        let z = x - y;
        if let Some(k) = &self.constant {
            return k.grad_unchecked(&z);
        }
        let avg = self.average(x, radius_bin(z.norm()));
        grad_for_average(&z, &avg)
    }

    /// Same value as [`FrozenKernel::eval`], computed without the cache.
    pub fn eval_uncached(&self, x: &Point, y: &Point) -> Result<Point> {
        let z = x - y;
        if z == Point::zeros() {
            return Err(Error::Singular);
        }
        if let Some(k) = &self.constant {
            return Ok(k.grad_unchecked(&z));
        }
        let avg = self.average_uncached(x, radius_bin(z.norm()));
        Ok(grad_for_average(&z, &avg))
    }

    /// Evaluator for a fixed first argument with a private memo, for row-wise assembly.
    pub fn row_evaluator(&self, x: Point) -> FrozenRow<'_> {
        FrozenRow { kernel: self, x, memo: HashMap::new() }
    }
}

/// Row evaluator returned by [`FrozenKernel::row_evaluator`].
pub struct FrozenRow<'a> {
    kernel: &'a FrozenKernel,
    pub(crate) x: Point,
    memo: HashMap<i64, Mat3>,
}

impl FrozenRow<'_> {
    #[inline]
    pub fn eval(&mut self, y: &Point) -> Point {
        let z = self.x - y;
        if let Some(k) = &self.kernel.constant {
            return k.grad_unchecked(&z);
        }
        let bin = radius_bin(z.norm());
        let (kernel, x) = (self.kernel, self.x);
        let avg = *self.memo.entry(bin).or_insert_with(|| kernel.average_uncached(&x, bin));
        grad_for_average(&z, &avg)
    }
}

/// Kernel selector for operators.
#[derive(Debug, Clone)]
pub enum KernelSpec {
    /// `z/|z|³`.
    Riesz,
    /// `∇₁Θ(z; A₀)`.
    Const(ConstKernel),
    /// Frozen-coefficient kernel.
    Frozen(FrozenKernel),
    /// Frozen kernel minus `(4π)⁻¹ × Riesz`.
    FrozenMinusRiesz(FrozenKernel),
    /// `∇₁Θ(z; A₀) - (4π)⁻¹ z/|z|³`.
    ConstMinusRiesz(ConstKernel),
    /// `θ(|z|)/|z|^d · z/|z|`, a `(θ, d)`-kernel with the Riesz sign pattern.
    Theta { theta: OscillationModulus, d: f64 },
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Riesz => "riesz",
            Self::Const(_) => "const",
            Self::Frozen(_) => "frozen",
            Self::FrozenMinusRiesz(_) => "frozen-minus-riesz",
            Self::ConstMinusRiesz(_) => "const-minus-riesz",
            Self::Theta { .. } => "theta",
        }
    }

    /// Kernel value at `(x, y)`; `x ≠ y` is the caller's responsibility.
    #[inline]
    pub fn eval_unchecked(&self, x: &Point, y: &Point) -> Point {
        match self {
            Self::Riesz => riesz(&(x - y)),
            Self::Const(k) => k.grad_unchecked(&(x - y)),
            Self::Frozen(f) => f.eval_unchecked(x, y),
            Self::FrozenMinusRiesz(f) => f.eval_unchecked(x, y) - riesz(&(x - y)) / OMEGA_N,
            Self::ConstMinusRiesz(k) => k.grad_unchecked(&(x - y)) - riesz(&(x - y)) / OMEGA_N,
            Self::Theta { theta, d } => theta_kernel(theta, *d, &(x - y)),
        }
    }

    /// Evaluator with first argument fixed; frozen kernels memoise averages per row.
    pub fn row_evaluator(&self, x: Point) -> KernelRow<'_> {
        match self {
            Self::Frozen(f) if !f.is_constant() => KernelRow::Frozen(f.row_evaluator(x), false),
            Self::FrozenMinusRiesz(f) if !f.is_constant() => KernelRow::Frozen(f.row_evaluator(x), true),
            other => KernelRow::Plain(other, x),
        }
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Result<Point> {
        if x == y {
            return Err(Error::Singular);
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Whether evaluation is cheap enough to stream instead of assembling.
    pub fn is_closed_form(&self) -> bool {
        match self {
            Self::Riesz | Self::Const(_) | Self::ConstMinusRiesz(_) | Self::Theta { .. } => true,
            Self::Frozen(f) | Self::FrozenMinusRiesz(f) => f.is_constant(),
        }
    }
}

/// Row evaluator returned by [`KernelSpec::row_evaluator`].
pub enum KernelRow<'a> {
    Plain(&'a KernelSpec, Point),
    Frozen(FrozenRow<'a>, bool),
}

impl KernelRow<'_> {
    #[inline]
    pub fn eval(&mut self, y: &Point) -> Point {
        match self {
            KernelRow::Plain(k, x) => k.eval_unchecked(x, y),
            KernelRow::Frozen(row, minus_riesz) => {
                let v = row.eval(y);
                if *minus_riesz {
                    v - riesz(&(row.x - y)) / OMEGA_N
                } else {
                    v
                }
            }
        }
    }
}

#[inline]
fn theta_kernel(theta: &OscillationModulus, d: f64, z: &Point) -> Point {
    let r = z.norm();
    z * (theta.eval_log(r.ln()) / (r.powf(d) * r))
}

/// Envelope `C τ(r)/r² + C τ̂(R)/R²` for the discarded variable-coefficient part.
pub fn k1_budget(theta: &OscillationModulus, r: f64, big_r: f64, c: f64, panels: usize) -> Result<f64> {
    if !(r > 0.0) || !(r < big_r) {
        return Err(Error::Domain(format!("k1 budget needs 0 < r < R, got r = {r}, R = {big_r}")));
    }
    let n = N_DIM as i32;
    let (tau, tau_hat) = theta.tau_budgets(r, big_r, panels)?;
    Ok(c * tau / r.powi(n) + c * tau_hat / big_r.powi(n))
}

/// `∇₁Θ(z; Ā_{x,r/2}) - ∇₁Θ(z; Ā_{x,δ/2})`.
pub fn k2_diff(
    field: &MatrixField,
    x: &Point,
    r: f64,
    delta: f64,
    z: &Point,
    budget: usize,
    seed: u64,
) -> Result<Point> {
    if !(0.0 < delta && delta < r && r < 1.0) {
        return Err(Error::Domain(format!("k2 needs 0 < delta < r < 1, got delta = {delta}, r = {r}")));
    }
    if *z == Point::zeros() {
        return Err(Error::Singular);
    }
    let big = ConstKernel::new(field.ball_average(x, r / 2.0, budget, seed))?;
    let small = ConstKernel::new(field.ball_average(x, delta / 2.0, budget, seed))?;
    Ok(big.grad_unchecked(z) - small.grad_unchecked(z))
}

/// `∇₁Θ(z; Ā_{x,δ/2}) - (4π)⁻¹ z/|z|³` for a field already normalised on a
/// cube of side `cube_side`.
pub fn k3_diff(
    normalized: &MatrixField,
    x: &Point,
    delta: f64,
    cube_side: f64,
    z: &Point,
    budget: usize,
    seed: u64,
) -> Result<Point> {
    if !(delta > 0.0) || !(delta < 3f64.sqrt() * cube_side) {
        return Err(Error::Domain(format!(
            "k3 needs 0 < delta < sqrt(3) * side, got delta = {delta}, side = {cube_side}"
        )));
    }
    if *z == Point::zeros() {
        return Err(Error::Singular);
    }
    let k = ConstKernel::new(normalized.ball_average(x, delta / 2.0, budget, seed))?;
    Ok(k.grad_unchecked(z) - riesz(z) / OMEGA_N)
}

/// Serializable description of a kernel choice (`riesz`, `const`, `frozen`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelChoice {
    Riesz,
    Const { a0: [f64; 9] },
    Frozen { field: MatrixField, budget: usize, seed: u64 },
}

impl KernelChoice {
    pub fn build(&self) -> Result<KernelSpec> {
        Ok(match self {
            Self::Riesz => KernelSpec::Riesz,
            Self::Const { a0 } => KernelSpec::Const(ConstKernel::new(Mat3::from_row_slice(a0))?),
            Self::Frozen { field, budget, seed } => {
                KernelSpec::Frozen(FrozenKernel::new(field.clone(), *budget, *seed)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::GaussLegendre;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3::from_diagonal(&Point::new(a, b, c))
    }

    fn rand_point(rng: &mut ChaCha8Rng) -> Point {
        Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn sphere_area_matches_omega_n() {
        // ∫_0^π sin θ dθ · 2π by Gauss–Legendre.
        let rule = GaussLegendre::new(20);
        let area: f64 = rule.on_interval(0.0, PI).map(|(t, w)| w * t.sin()).sum::<f64>() * 2.0 * PI;
        assert!((area - OMEGA_N).abs() < 1e-13);
        // Γ(3/2) = √π/2, so 2π^{3/2}/Γ(3/2) = 4π.
        assert!((2.0 * PI.powf(1.5) / (PI.sqrt() / 2.0) - OMEGA_N).abs() < 1e-13);
    }

    #[test]
    fn theta_examples() {
        let k = ConstKernel::new(Mat3::identity()).unwrap();
        assert!((k.theta(&Point::new(1.0, 0.0, 0.0)).unwrap() + 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!((k.theta(&Point::new(0.0, 2.0, 0.0)).unwrap() + 1.0 / (8.0 * PI)).abs() < 1e-16);
        assert_eq!(k.theta(&Point::zeros()), Err(Error::Singular));
    }

    #[test]
    fn grad_theta_examples() {
        let k = ConstKernel::new(Mat3::identity()).unwrap();
        let g = k.grad_theta(&Point::new(1.0, 0.0, 0.0)).unwrap();
        assert!((g - Point::new(1.0 / (4.0 * PI), 0.0, 0.0)).norm() < 1e-17);
        let k2 = ConstKernel::new(Mat3::identity() * 2.0).unwrap();
        let g = k2.grad_theta(&Point::new(1.0, 0.0, 0.0)).unwrap();
        assert!((g - Point::new(1.0 / (8.0 * PI), 0.0, 0.0)).norm() < 1e-16);
        assert_eq!(k.grad_theta(&Point::zeros()), Err(Error::Singular));
    }

    #[test]
    fn riesz_examples() {
        assert_eq!(riesz_kernel(&Point::new(0.0, 2.0, 0.0)).unwrap(), Point::new(0.0, 0.25, 0.0));
        let z = Point::new(0.3, -0.7, 1.1);
        assert_eq!(riesz(&(-z)), -riesz(&z));
        assert_eq!(riesz_kernel(&Point::zeros()), Err(Error::Singular));
    }

    #[test]
    fn antisymmetric_part_is_irrelevant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a_s = Mat3::new(2.0, 0.25, 0.125, 0.25, 1.0, -0.25, 0.125, -0.25, 1.5);
        // Dyadic skew entries keep the symmetrisation exact in floating point.
        let skew = Mat3::new(0.0, 0.75, -0.5, -0.75, 0.0, 1.25, 0.5, -1.25, 0.0);
        let k = ConstKernel::new(a_s).unwrap();
        let ks = ConstKernel::new(a_s + skew).unwrap();
        for _ in 0..100 {
            let z = rand_point(&mut rng);
            assert_eq!(k.theta(&z).unwrap(), ks.theta(&z).unwrap());
            assert_eq!(k.grad_theta(&z).unwrap(), ks.grad_theta(&z).unwrap());
        }
        // Generic skew parts: equal up to the rounding of the symmetrisation.
        for _ in 0..100 {
            let m = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let ks = ConstKernel::new(a_s + (m - m.transpose())).unwrap();
            let z = rand_point(&mut rng);
            let g = k.grad_theta(&z).unwrap();
            assert!((g - ks.grad_theta(&z).unwrap()).norm() <= 1e-14 * g.norm());
        }
    }

    #[test]
    fn grad_theta_is_gradient_of_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = ConstKernel::new(Mat3::new(1.5, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 1.2)).unwrap();
        let h = 1e-5;
        for _ in 0..50 {
            let z = rand_point(&mut rng).normalize();
            let g = k.grad_theta(&z).unwrap();
            for i in 0..3 {
                let mut e = Point::zeros();
                e[i] = h;
                let fd = (k.theta(&(z + e)).unwrap() - k.theta(&(z - e)).unwrap()) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-6 * g.norm(), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn grad_theta_is_divergence_free_off_the_pole() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a0 = Mat3::new(1.5, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 1.2);
        let k = ConstKernel::new(a0).unwrap();
        let h = 1e-4;
        for _ in 0..50 {
            let z = rand_point(&mut rng).normalize() * rng.gen_range(0.5..2.0);
            let mut div = 0.0;
            for i in 0..3 {
                let mut e = Point::zeros();
                e[i] = h;
                let plus = a0 * k.grad_theta(&(z + e)).unwrap();
                let minus = a0 * k.grad_theta(&(z - e)).unwrap();
                div += (plus[i] - minus[i]) / (2.0 * h);
            }
            assert!(div.abs() < 1e-4, "div = {div}");
        }
    }

    #[test]
    fn homogeneity_and_oddness() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = ConstKernel::new(Mat3::new(1.5, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 1.2)).unwrap();
        for _ in 0..200 {
            let z = rand_point(&mut rng);
            let g = k.grad_theta(&z).unwrap();
            for lam in [0.5, 2.0, 10.0] {
                let gl = k.grad_theta(&(z * lam)).unwrap();
                assert!((gl - g / (lam * lam)).norm() <= 1e-13 * g.norm() / (lam * lam));
            }
            assert_eq!(k.grad_theta(&(-z)).unwrap(), -g);
        }
    }

    #[test]
    fn identity_consistency_with_riesz() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = ConstKernel::new(Mat3::identity()).unwrap();
        for _ in 0..1000 {
            let z = rand_point(&mut rng);
            let a = k.grad_theta(&z).unwrap();
            let b = riesz(&z) / (4.0 * PI);
            assert!((a - b).norm() <= 1e-14 * b.norm());
        }
    }

    /// Sweep over random elliptic matrices with Λ = 2: |∇Θ(z)| |z|² is
    /// bounded above and below by constants depending only on Λ.
    #[test]
    fn kernel_size_bounds_for_lambda_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..10_000 {
            let q = nalgebra::Rotation3::from_euler_angles(rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3), 0.4);
            let d = diag(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
            let a = q.matrix() * d * q.matrix().transpose();
            let k = ConstKernel::new(sym_part(&a)).unwrap();
            let z = rand_point(&mut rng);
            let v = k.grad_theta(&z).unwrap().norm() * z.norm_squared();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        // Eigenvalues in [1/2, 2]: |∇Θ||z|² ∈ [Λ^{-5/2}, Λ^{5/2}]/(4π) up to the det factor.
        let lam: f64 = 2.0;
        assert!(hi <= lam.powf(3.5) / OMEGA_N, "hi = {hi}");
        assert!(lo >= lam.powf(-3.5) / OMEGA_N, "lo = {lo}");
        assert!(lo > 0.0);
    }

    #[test]
    fn frozen_kernel_special_fields() {
        let x = Point::new(0.1, 0.2, 0.3);
        let y = Point::new(-0.4, 0.0, 0.5);
        let f = FrozenKernel::new(MatrixField::identity(), 64, 1).unwrap();
        assert_eq!(f.eval(&x, &y).unwrap(), riesz(&(x - y)) / OMEGA_N);
        let a0 = Mat3::new(2.0, 0.5, 0.0, -0.5, 1.0, 0.1, 0.0, 0.2, 1.5);
        let f = FrozenKernel::new(MatrixField::constant(a0, 3.0), 64, 1).unwrap();
        assert_eq!(f.eval(&x, &y).unwrap(), ConstKernel::new(a0).unwrap().grad_theta(&(x - y)).unwrap());
        assert_eq!(f.eval(&x, &x), Err(Error::Singular));
    }

    #[test]
    fn frozen_kernel_cache_is_a_pure_memo() {
        let f = FrozenKernel::new(MatrixField::log_dini(0.25), 256, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Point> = (0..20).map(|_| rand_point(&mut rng) * 0.1).collect();
        for x in &pts {
            let mut row = f.row_evaluator(*x);
            for y in &pts {
                if x == y {
                    continue;
                }
                let a = f.eval(x, y).unwrap();
                let b = f.eval(x, y).unwrap();
                let c = f.eval_uncached(x, y).unwrap();
                let d = row.eval(y);
                assert_eq!(a, b);
                assert_eq!(a, c);
                assert_eq!(a, d);
            }
        }
        assert!(f.cache_len() > 0);
    }

    #[test]
    fn frozen_kernel_far_from_perturbation_is_riesz() {
        // The log-Dini field is the identity outside the unit ball.
        let f = FrozenKernel::new(MatrixField::log_dini(0.25), 256, 5).unwrap();
        let x = Point::new(5.0, 0.0, 0.0);
        let y = Point::new(5.0, 0.3, 0.1);
        let v = f.eval(&x, &y).unwrap();
        let exact = riesz(&(x - y)) / OMEGA_N;
        let budget = k1_budget(&MatrixField::log_dini(0.25).declared_modulus(), 0.1, 1.0, 1.0, 256).unwrap();
        assert_eq!(v, exact);
        assert!((v - exact).norm() <= budget);
    }

    #[test]
    fn k1_budget_examples() {
        assert_eq!(k1_budget(&OscillationModulus::constant(0.0), 0.1, 1.0, 1.0, 64).unwrap(), 0.0);
        let p = OscillationModulus::power(0.5);
        let tau = p.dini_small(0.25, 0).unwrap() + p.dini_large(2.0, 0.25, 0).unwrap();
        let tau_hat = p.dini_small(1.0, 0).unwrap() + p.dini_large(1.0, 1.0, 0).unwrap();
        let v = k1_budget(&p, 0.25, 1.0, 1.0, 0).unwrap();
        assert!((v - (tau * 16.0 + tau_hat)).abs() < 1e-14);
        assert!(matches!(k1_budget(&p, 1.0, 1.0, 1.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn k2_vanishes_for_constant_fields() {
        let z = Point::new(0.3, 0.1, -0.2);
        let x = Point::new(0.1, 0.0, 0.0);
        for f in [MatrixField::identity(), MatrixField::constant(diag(3.0, 1.0, 2.0), 3.0)] {
            assert_eq!(k2_diff(&f, &x, 0.5, 0.1, &z, 64, 1).unwrap(), Point::zeros());
        }
        let f = MatrixField::identity();
        assert!(k2_diff(&f, &x, 0.1, 0.5, &z, 64, 1).is_err());
        assert!(k2_diff(&f, &x, 1.5, 0.5, &z, 64, 1).is_err());
        assert_eq!(k2_diff(&f, &x, 0.5, 0.1, &Point::zeros(), 64, 1), Err(Error::Singular));
    }

    /// |𝒦²(z)| |z|² against ∫_δ^r θ(t) dt/t over a sweep: the fitted
    /// constant stays within a factor band.
    #[test]
    fn k2_envelope_constant_is_stable() {
        let field = MatrixField::log_dini(0.25);
        let theta = field.declared_modulus();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut ratios = Vec::new();
        for &(r, delta) in &[(0.5, 0.05), (0.2, 0.01), (0.1, 1e-3), (0.05, 1e-4), (0.3, 0.03)] {
            for _ in 0..4 {
                let x = rand_point(&mut rng) * 1e-3;
                let z = rand_point(&mut rng).normalize() * rng.gen_range(0.5..2.0);
                let v = k2_diff(&field, &x, r, delta, &z, 4096, 7).unwrap().norm() * z.norm_squared();
                let env = theta.dini_small(r, 0).unwrap() - theta.dini_small(delta, 0).unwrap();
                ratios.push(v / env);
            }
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let mid = (lo * hi).sqrt();
        eprintln!("k2 C_fit in [{lo:.4e}, {hi:.4e}]");
        assert!(lo > 0.0);
        assert!(hi <= 1.5 * mid / 0.5 && lo >= 0.5 * mid / 1.5, "{lo} {hi}");
    }

    #[test]
    fn k3_homogeneity_oddness_and_identity_case() {
        let x = Point::new(0.02, 0.01, 0.0);
        let n = MatrixField::LogDini { gamma: 0.25, lambda: 2.0, axis_weights: Some([1.0, 0.5, 0.2]) }
            .normalize_cov(&Point::zeros(), 0.25, 4096, 3)
            .unwrap();
        let z = Point::new(0.3, -0.4, 0.5);
        let a = k3_diff(&n.hat_a, &x, 0.01, 0.25, &z, 512, 2).unwrap();
        let b = k3_diff(&n.hat_a, &x, 0.01, 0.25, &(z * 2.0), 512, 2).unwrap();
        assert!((b - a / 4.0).norm() <= 1e-14 * a.norm().max(1e-300));
        let c = k3_diff(&n.hat_a, &x, 0.01, 0.25, &(-z), 512, 2).unwrap();
        assert_eq!(c, -a);
        assert!(a.norm() > 0.0);
        let id = k3_diff(&MatrixField::identity(), &x, 0.01, 0.25, &z, 64, 1).unwrap();
        assert_eq!(id, Point::zeros());
        assert!(k3_diff(&MatrixField::identity(), &x, 1.0, 0.25, &z, 64, 1).is_err());
    }
}
