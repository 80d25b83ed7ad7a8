//! Uniformly elliptic coefficient fields `A(x)`, their ball averages, the
//! empirical mean oscillation and the normalising change of variables.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dini::OscillationModulus;
use crate::numeric::{halton_ball, pairwise_sum, pairwise_sum_with};
use crate::{Error, Mat3, Point, Result};

/// Below this radius a ball average is replaced by the point value.
pub const DEGENERATE_RADIUS: f64 = 1e-12;

fn default_lambda() -> f64 {
    2.0
}

fn identity_lambda() -> f64 {
    1.0
}

/// A parametric uniformly elliptic matrix field on ℝ³.
///
/// Matrices in JSON are row-major 9-entry arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MatrixField {
    Identity {
        #[serde(default = "identity_lambda")]
        lambda: f64,
    },
    Constant {
        a: [f64; 9],
        lambda: f64,
    },
    /// `a_ii(x) = 1 + w_i g(|x|)` with `g(ρ) = (-ln ρ)^{-γ-1}` for `ρ ≤ e⁻¹`,
    /// a linear taper from 1 to 0 on `[e⁻¹, 1]`, and `g = 0` for `ρ ≥ 1`.
    LogDini {
        gamma: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
        /// Per-axis weights in `[0, 1]`; isotropic when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis_weights: Option<[f64; 3]>,
    },
    /// `(1 + amplitude · min(|x|, 1)^α) Id`.
    Holder {
        alpha: f64,
        amplitude: f64,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    /// `A0 + p(|x|)(A1 - A0)` with a cubic step `p`, 1 inside `inner`, 0 outside `outer`.
    RadialBlend {
        a0: [f64; 9],
        a1: [f64; 9],
        inner: f64,
        outer: f64,
        lambda: f64,
    },
    /// `S⁻¹ A(S z) S⁻¹` for a symmetric positive definite `S`.
    Pullback {
        base: Box<MatrixField>,
        s: [f64; 9],
        lambda: f64,
    },
}

/// Symmetric positive definite 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix3(Mat3);

/// The change of variables `S = √((Ā_s)_{x,r})` and the transformed field `Â`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovNormalization {
    pub s: SpdMatrix3,
    pub s_inv: Mat3,
    pub hat_a: MatrixField,
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub lambda_hat: f64,
    pub pass: bool,
    /// Largest operator norm of `A(x)` over the samples (bound on `⟨Aξ, η⟩`).
    pub max_operator_norm: f64,
}

pub fn mat_from_row_major(a: &[f64; 9]) -> Mat3 {
    Mat3::from_row_slice(a)
}

pub fn mat_to_row_major(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
    out
}

pub fn sym_part(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

/// Max-entry matrix norm.
pub fn max_entry_norm(m: &Mat3) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn log_dini_profile(gamma: f64, rho: f64) -> f64 {
    let cap = (-1.0f64).exp();
    if rho <= 0.0 || rho >= 1.0 {
        0.0
    } else if rho <= cap {
        (-rho.ln()).powf(-gamma - 1.0)
    } else {
        (1.0 - rho) / (1.0 - cap)
    }
}

fn smooth_step(inner: f64, outer: f64, rho: f64) -> f64 {
    if rho <= inner {
        1.0
    } else if rho >= outer {
        0.0
    } else {
        let s = (rho - inner) / (outer - inner);
        1.0 - s * s * (3.0 - 2.0 * s)
    }
}

impl MatrixField {
    pub fn identity() -> Self {
        Self::Identity { lambda: 1.0 }
    }

    pub fn constant(a: Mat3, lambda: f64) -> Self {
        Self::Constant { a: mat_to_row_major(&a), lambda }
    }

    pub fn log_dini(gamma: f64) -> Self {
        Self::LogDini { gamma, lambda: 2.0, axis_weights: None }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Self::Identity { lambda }
            | Self::Constant { lambda, .. }
            | Self::LogDini { lambda, .. }
            | Self::Holder { lambda, .. }
            | Self::RadialBlend { lambda, .. }
            | Self::Pullback { lambda, .. } => *lambda,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Identity { .. } => "identity",
            Self::Constant { .. } => "constant",
            Self::LogDini { .. } => "log_dini",
            Self::Holder { .. } => "holder",
            Self::RadialBlend { .. } => "radial_blend",
            Self::Pullback { .. } => "pullback",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::Invalid(format!("ellipticity constant {lambda} must be >= 1")));
        }
        match self {
            Self::LogDini { gamma, axis_weights, .. } => {
                if !(*gamma > -1.0) || !gamma.is_finite() {
                    return Err(Error::Invalid(format!("log_dini gamma = {gamma} must exceed -1")));
                }
                if let Some(w) = axis_weights {
                    if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
                        return Err(Error::Invalid("log_dini axis weights must lie in [0, 1]".into()));
                    }
                }
            }
            Self::Holder { alpha, amplitude, .. } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) || !(*amplitude >= 0.0) {
                    return Err(Error::Invalid("holder field needs alpha in (0,1] and amplitude >= 0".into()));
                }
            }
            Self::RadialBlend { inner, outer, .. } => {
                if !(*inner >= 0.0 && *outer > *inner) {
                    return Err(Error::Invalid("radial_blend needs 0 <= inner < outer".into()));
                }
            }
            Self::Pullback { base, s, .. } => {
                base.validate()?;
                SpdMatrix3::new(mat_from_row_major(s))?;
            }
            _ => {}
        }
        Ok(())
    }

    /// `A(x)`.
    pub fn evaluate(&self, x: &Point) -> Mat3 {
        match self {
            Self::Identity { .. } => Mat3::identity(),
            Self::Constant { a, .. } => mat_from_row_major(a),
            Self::LogDini { gamma, axis_weights, .. } => {
                let g = log_dini_profile(*gamma, x.norm());
                let w = axis_weights.unwrap_or([1.0; 3]);
                Mat3::from_diagonal(&Point::new(1.0 + w[0] * g, 1.0 + w[1] * g, 1.0 + w[2] * g))
            }
            Self::Holder { alpha, amplitude, .. } => {
                Mat3::identity() * (1.0 + amplitude * x.norm().min(1.0).powf(*alpha))
            }
            Self::RadialBlend { a0, a1, inner, outer, .. } => {
                let p = smooth_step(*inner, *outer, x.norm());
                let a0 = mat_from_row_major(a0);
                a0 + (mat_from_row_major(a1) - a0) * p
            }
            Self::Pullback { base, s, .. } => {
                let s = mat_from_row_major(s);
                let s_inv = s.try_inverse().unwrap_or_else(Mat3::identity);
                s_inv * base.evaluate(&(s * x)) * s_inv
            }
        }
    }

    /// Constant value when the field does not depend on `x`.
    pub fn constant_value(&self) -> Option<Mat3> {
        match self {
            Self::Identity { .. } => Some(Mat3::identity()),
            Self::Constant { a, .. } => Some(mat_from_row_major(a)),
            Self::Pullback { base, s, .. } => base.constant_value().map(|a| {
                let s = mat_from_row_major(s);
                let s_inv = s.try_inverse().unwrap_or_else(Mat3::identity);
                s_inv * a * s_inv
            }),
            _ => None,
        }
    }

    /// The modulus of oscillation the field is declared to satisfy.
    pub fn declared_modulus(&self) -> OscillationModulus {
        match self {
            Self::Identity { .. } | Self::Constant { .. } => OscillationModulus::constant(0.0),
            Self::LogDini { gamma, axis_weights, .. } => {
                let w = axis_weights.map_or(1.0, |w| w.iter().fold(0.0f64, |a, b| a.max(*b)));
                OscillationModulus::LogPower { gamma: *gamma, scale: w, kappa: None }
            }
            Self::Holder { alpha, amplitude, .. } => {
                OscillationModulus::Power { alpha: *alpha, scale: *amplitude, kappa: None }
            }
            Self::RadialBlend { a0, a1, inner, outer, .. } => {
                let jump = max_entry_norm(&(mat_from_row_major(a1) - mat_from_row_major(a0)));
                let width = outer - inner;
                // Linear up to the transition width, flat, then volume decay beyond the support.
                let far = 4.0 * outer;
                let mut t = vec![1e-12];
                let mut theta = vec![0.0];
                for k in 0..=40 {
                    let tk = width * 2f64.powf(k as f64 / 4.0 - 8.0);
                    if tk > t[t.len() - 1] && tk < far {
                        t.push(tk);
                        theta.push(jump * (tk / width).min(1.0));
                    }
                }
                for k in 0..=24 {
                    let tk = far * 2f64.powf(k as f64 / 2.0);
                    if tk > t[t.len() - 1] {
                        t.push(tk);
                        theta.push(jump * (far / tk).powi(3));
                    }
                }
                OscillationModulus::Tabulated { t, theta, kappa: 8.0 }
            }
            Self::Pullback { base, .. } => base.declared_modulus(),
        }
    }

    /// Checks the ellipticity bounds at the given sample points.
    pub fn ellipticity_report(&self, samples: &[Point]) -> Result<EllipticityReport> {
        if samples.is_empty() {
            return Err(Error::Invalid("ellipticity report needs at least one sample point".into()));
        }
        let mut lambda_hat: f64 = 0.0;
        let mut op_norm: f64 = 0.0;
        for x in samples {
            let a = self.evaluate(x);
            let eig = sym_eigen(&sym_part(&a)).0;
            let (lo, hi) = (eig.min(), eig.max());
            if !(lo > 0.0) {
                return Err(Error::NotElliptic { point: *x, eigenvalue: lo });
            }
            lambda_hat = lambda_hat.max(hi).max(1.0 / lo);
            op_norm = op_norm.max(a.svd(false, false).singular_values.max());
        }
        Ok(EllipticityReport {
            lambda_hat,
            pass: lambda_hat <= self.lambda() * (1.0 + 1e-12),
            max_operator_norm: op_norm,
        })
    }

    /// `Ā_{x,r}`, the average of `A` over `B(x, r)`.
    ///
    /// Exact for constant fields; otherwise a scrambled Halton average with
    /// `budget` samples, deterministic in `seed`.
    pub fn ball_average(&self, x: &Point, r: f64, budget: usize, seed: u64) -> Mat3 {
        if let Some(a) = self.constant_value() {
            return a;
        }
        if r < DEGENERATE_RADIUS {
            return self.evaluate(x);
        }
        let samples = halton_ball(budget.max(1), seed);
        self.ball_average_with(x, r, &samples)
    }

    /// Ball average over caller-supplied unit-ball samples.
    pub fn ball_average_with(&self, x: &Point, r: f64, unit_samples: &[Point]) -> Mat3 {
        if let Some(a) = self.constant_value() {
            return a;
        }
        if r < DEGENERATE_RADIUS || unit_samples.is_empty() {
            return self.evaluate(x);
        }
        let sum = pairwise_sum_with(unit_samples.len(), Mat3::zeros(), &|k| self.evaluate(&(x + unit_samples[k] * r)));
        sum / unit_samples.len() as f64
    }

    /// Mean oscillation of `A` over `B(x, r)` in the max-entry norm.
    pub fn mean_oscillation_at(&self, x: &Point, r: f64, unit_samples: &[Point]) -> f64 {
        if self.constant_value().is_some() {
            return 0.0;
        }
        let values: Vec<Mat3> = unit_samples.iter().map(|p| self.evaluate(&(x + p * r))).collect();
        let mean = pairwise_sum_with(values.len(), Mat3::zeros(), &|k| values[k]) / values.len() as f64;
        let devs: Vec<f64> = values.iter().map(|v| max_entry_norm(&(v - mean))).collect();
        pairwise_sum(&devs) / devs.len() as f64
    }

    /// `ω̂_A(r)`: maximum over `centers` of the sampled mean oscillation.
    ///
    /// A lower bound for the supremum over all of ℝ³.
    pub fn oscillation_estimate(&self, r: f64, centers: &[Point], budget: usize, seed: u64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("oscillation radius r = {r} must be positive")));
        }
        if centers.is_empty() {
            return Err(Error::Invalid("oscillation estimate needs at least one center".into()));
        }
        if self.constant_value().is_some() {
            return Ok(0.0);
        }
        let samples = halton_ball(budget.max(2), seed);
        let per_center: Vec<f64> = centers.par_iter().map(|x| self.mean_oscillation_at(x, r, &samples)).collect();
        Ok(per_center.into_iter().fold(0.0, f64::max))
    }

    /// Normalising change of variables at `B(x, r)`.
    pub fn normalize_cov(&self, x: &Point, r: f64, budget: usize, seed: u64) -> Result<CovNormalization> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("normalisation radius r = {r} must be positive")));
        }
        let avg = self.ball_average(x, r, budget, seed);
        let s = SpdMatrix3::new(sym_part(&avg))?.sqrt();
        let s_inv = s.inverse();
        let lambda = self.lambda();
        // |det S| |S⁻¹B| / |B| = 1, so only the conjugation remains.
        let hat_a =
            Self::Pullback { base: Box::new(self.clone()), s: mat_to_row_major(s.matrix()), lambda: lambda * lambda };
        Ok(CovNormalization { s, s_inv, hat_a, center: *x, radius: r })
    }
}

impl SpdMatrix3 {
    /// Wraps a matrix, checking exact symmetry and positive definiteness.
    pub fn new(m: Mat3) -> Result<Self> {
        if m != m.transpose() {
            return Err(Error::Invalid("matrix is not symmetric".into()));
        }
        let lo = sym_eigen(&m).0.min();
        if !(lo > 0.0) {
            return Err(Error::NotSpd { min_eigenvalue: lo });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = sym_eigen(&self.0).0;
        let mut v = [e[0], e[1], e[2]];
        v.sort_by(f64::total_cmp);
        v
    }

    /// The unique SPD square root, by eigendecomposition.
    pub fn sqrt(&self) -> SpdMatrix3 {
        let m = &self.0;
        if is_diagonal(m) {
            return Self(Mat3::from_diagonal(&m.diagonal().map(f64::sqrt)));
        }
        let (values, v) = sym_eigen(m);
        let d = Mat3::from_diagonal(&values.map(|l| l.max(0.0).sqrt()));
        let mut s = sym_part(&(v * d * v.transpose()));
        // Newton polish: S ← (S + S⁻¹M)/2.
        if let Some(inv) = s.try_inverse() {
            s = sym_part(&((s + inv * m) * 0.5));
        }
        Self(s)
    }

    pub fn inverse(&self) -> Mat3 {
        if is_diagonal(&self.0) {
            return Mat3::from_diagonal(&self.0.diagonal().map(|v| 1.0 / v));
        }
        let inv = self.0.try_inverse().expect("SPD matrices are invertible");
        sym_part(&inv)
    }
}

/// Eigenvalues and orthonormal eigenvectors (columns) of a symmetric 3×3
/// matrix by cyclic Jacobi rotations.
pub fn sym_eigen(m: &Mat3) -> (Point, Mat3) {
    let mut a = *m;
    let mut v = Mat3::identity();
    for _sweep in 0..64 {
        let off = a[(0, 1)].abs() + a[(0, 2)].abs() + a[(1, 2)].abs();
        let diag = a[(0, 0)].abs() + a[(1, 1)].abs() + a[(2, 2)].abs();
        if off <= f64::EPSILON * 1e-3 * diag || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Mat3::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            a = rot.transpose() * a * rot;
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;
            v *= rot;
        }
    }
    (a.diagonal(), v)
}

fn is_diagonal(m: &Mat3) -> bool {
    (0..3).all(|i| (0..3).all(|j| i == j || m[(i, j)] == 0.0))
}

/// `sqrt_spd` as a free function: errors on non-SPD input.
pub fn sqrt_spd(m: &Mat3) -> Result<SpdMatrix3> {
    Ok(SpdMatrix3::new(*m)?.sqrt())
}

/// Shared unit-ball sample set used by repeated averages.
pub fn shared_ball_samples(budget: usize, seed: u64) -> Arc<Vec<Point>> {
    Arc::new(halton_ball(budget.max(1), seed))
}
