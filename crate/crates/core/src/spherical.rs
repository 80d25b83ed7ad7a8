//! Real spherical harmonics on S², product quadrature, and harmonic
//! decomposition of vector kernels restricted to the unit sphere.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dini::OscillationModulus;
use crate::kernels::{riesz, ConstKernel};
use crate::matrixfield::MatrixField;
use crate::numeric::{pairwise_sum, GaussLegendre};
use crate::{Error, Point, Result, OMEGA_N};

/// Coefficients below this fraction of the largest one are treated as zero in fits.
pub const NOISE_FLOOR: f64 = 1e-15;
/// Extra quadrature exactness beyond `2 J_max` used by [`level_for`].
pub const DEFAULT_SMOOTHNESS_MARGIN: usize = 10;
/// Decay exponent `(n+5)(n-1)/2` of the coefficient envelope at `n = 2`.
pub const ENVELOPE_EXPONENT: f64 = 3.5;

/// Degree `j` and order `ℓ ∈ 1..=2j+1`; order `ℓ` carries azimuthal
/// frequency `m = ℓ - j - 1` (cosine for `m > 0`, sine for `m < 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub j: usize,
    pub ell: usize,
}

impl HarmonicIndex {
    pub fn new(j: usize, ell: usize) -> Result<Self> {
        if ell == 0 || ell > 2 * j + 1 {
            return Err(Error::Domain(format!("order {ell} outside 1..={} for degree {j}", 2 * j + 1)));
        }
        Ok(Self { j, ell })
    }

    pub fn m(&self) -> i64 {
        self.ell as i64 - self.j as i64 - 1
    }

    /// Position in the flat layout `j² + ℓ - 1`.
    pub fn flat(&self) -> usize {
        self.j * self.j + self.ell - 1
    }

    pub fn from_flat(k: usize) -> Self {
        let j = (k as f64).sqrt() as usize;
        let j = if (j + 1) * (j + 1) <= k {
            j + 1
        } else if j * j > k {
            j - 1
        } else {
            j
        };
        Self { j, ell: k - j * j + 1 }
    }

    /// Number of harmonics of degree `≤ j_max`.
    pub fn count(j_max: usize) -> usize {
        (j_max + 1) * (j_max + 1)
    }
}

/// All real orthonormal harmonics of degree `≤ j_max` at `ζ`, in flat order.
/// `ζ` is assumed to be a unit vector.
pub fn eval_all(j_max: usize, zeta: &Point) -> Vec<f64> {
    let x = zeta.z.clamp(-1.0, 1.0);
    let s = (1.0 - x * x).max(0.0).sqrt();
    let phi = zeta.y.atan2(zeta.x);
    let mut out = vec![0.0; HarmonicIndex::count(j_max)];
    // Normalised associated Legendre functions, column by column in m.
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=j_max {
        if m > 0 {
            pmm *= s * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        let (cm, sm) = if m == 0 {
            (1.0, 0.0)
        } else {
            ((m as f64 * phi).cos() * 2f64.sqrt(), (m as f64 * phi).sin() * 2f64.sqrt())
        };
        let mut store = |j: usize, p: f64| {
            if m == 0 {
                out[j * j + j] = p;
            } else {
                out[j * j + j + m] = p * cm;
                out[j * j + j - m] = p * sm;
            }
        };
        store(m, pmm);
        if m == j_max {
            break;
        }
        let mut p_prev = pmm;
        let mut p = x * ((2 * m + 3) as f64).sqrt() * pmm;
        store(m + 1, p);
        for j in m + 2..=j_max {
            let (jf, mf) = (j as f64, m as f64);
            let a = ((4.0 * jf * jf - 1.0) / (jf * jf - mf * mf)).sqrt();
            let b = (((jf - 1.0) * (jf - 1.0) - mf * mf) / (4.0 * (jf - 1.0) * (jf - 1.0) - 1.0)).sqrt();
            let next = a * (x * p - b * p_prev);
            p_prev = p;
            p = next;
            store(j, p);
        }
    }
    out
}

/// `φ_{j,ℓ}(ζ)` for a unit vector `ζ`.
pub fn eval_harmonic(idx: HarmonicIndex, zeta: &Point) -> Result<f64> {
    HarmonicIndex::new(idx.j, idx.ell)?;
    if (zeta.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("harmonics need a unit vector, |zeta| = {}", zeta.norm())));
    }
    Ok(eval_all(idx.j, zeta)[idx.flat()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereQuadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    /// Spherical polynomials of degree `≤ exactness` integrate exactly.
    pub exactness: usize,
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().zip(&self.weights).map(|(p, w)| f(p) * w).collect();
        pairwise_sum(&terms)
    }
}

/// Gauss–Legendre in `cos θ` (`L` nodes) times `2L` uniform azimuths.
pub fn build_quadrature(level: usize) -> Result<SphereQuadrature> {
    if level == 0 {
        return Err(Error::Domain("quadrature level must be at least 1".into()));
    }
    let gl = GaussLegendre::new(level);
    let n_phi = 2 * level;
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(level * n_phi);
    let mut weights = Vec::with_capacity(level * n_phi);
    for (t, w) in gl.on_interval(-1.0, 1.0) {
        let s = (1.0 - t * t).sqrt();
        for k in 0..n_phi {
            let phi = (k as f64 + 0.5) * dphi;
            nodes.push(Point::new(s * phi.cos(), s * phi.sin(), t));
            weights.push(w * dphi);
        }
    }
    Ok(SphereQuadrature { nodes, weights, exactness: 2 * level - 1 })
}

/// Smallest level whose exactness covers `2 j_max + margin`.
pub fn level_for(j_max: usize, margin: usize) -> usize {
    (2 * j_max + margin + 2).div_ceil(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub j_max: usize,
    /// `k_{j,ℓ}` per vector component, in flat order.
    pub coeffs: Vec<[f64; 3]>,
    /// `L²(S²)` norm of the kernel minus its reconstruction.
    pub residual: f64,
    /// `‖K‖²_{L²(S²)}`.
    pub norm_sq: f64,
    pub x: Option<Point>,
    pub delta: Option<f64>,
}

impl Decomposition {
    pub fn coeff(&self, idx: HarmonicIndex) -> [f64; 3] {
        self.coeffs[idx.flat()]
    }

    /// `max_{ℓ, component} |k_{j,ℓ}|`.
    pub fn max_at_degree(&self, j: usize) -> f64 {
        self.coeffs[j * j..(j + 1) * (j + 1)].iter().flat_map(|c| c.iter()).fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn reconstruct(&self, zeta: &Point) -> Point {
        let basis = eval_all(self.j_max, zeta);
        let mut out = Point::zeros();
        for (c, b) in self.coeffs.iter().zip(&basis) {
            out += Point::new(c[0], c[1], c[2]) * *b;
        }
        out
    }

    /// Rows `(component, j, ℓ, coeff)`.
    pub fn rows(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::with_capacity(3 * self.coeffs.len());
        for comp in 0..3 {
            for (k, c) in self.coeffs.iter().enumerate() {
                let idx = HarmonicIndex::from_flat(k);
                out.push((comp, idx.j, idx.ell, c[comp]));
            }
        }
        out
    }
}

/// Projects `kernel` on the harmonics of degree `≤ j_max`.
pub fn decompose<F>(kernel: F, j_max: usize, quad: &SphereQuadrature) -> Result<Decomposition>
where
    F: Fn(&Point) -> Point + Sync,
{
    if quad.exactness < 2 * j_max {
        return Err(Error::Domain(format!(
            "quadrature exact to degree {} cannot resolve j_max = {j_max}",
            quad.exactness
        )));
    }
    let values: Vec<Point> = quad.nodes.par_iter().map(&kernel).collect();
    if values.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
        return Err(Error::Domain("kernel is not finite on the sphere".into()));
    }
    let basis: Vec<Vec<f64>> = quad.nodes.par_iter().map(|p| eval_all(j_max, p)).collect();
    let q = quad.len();
    let coeffs: Vec<[f64; 3]> = (0..HarmonicIndex::count(j_max))
        .into_par_iter()
        .map(|k| {
            let mut c = [0.0; 3];
            for (comp, slot) in c.iter_mut().enumerate() {
                let terms: Vec<f64> = (0..q).map(|i| values[i][comp] * basis[i][k] * quad.weights[i]).collect();
                *slot = pairwise_sum(&terms);
            }
            c
        })
        .collect();
    let resid_terms: Vec<f64> = (0..q)
        .into_par_iter()
        .map(|i| {
            let mut rec = Point::zeros();
            for (c, b) in coeffs.iter().zip(&basis[i]) {
                rec += Point::new(c[0], c[1], c[2]) * *b;
            }
            (values[i] - rec).norm_squared() * quad.weights[i]
        })
        .collect();
    let norm_terms: Vec<f64> = (0..q).map(|i| values[i].norm_squared() * quad.weights[i]).collect();
    Ok(Decomposition {
        j_max,
        coeffs,
        residual: pairwise_sum(&resid_terms).max(0.0).sqrt(),
        norm_sq: pairwise_sum(&norm_terms),
        x: None,
        delta: None,
    })
}

/// `z ↦ ∇₁Θ(z; Ā_{x,δ/2}) - (4π)⁻¹ z/|z|³` with the ball average computed once.
#[derive(Debug, Clone)]
pub struct K3Kernel {
    pub x: Point,
    pub delta: f64,
    frozen: ConstKernel,
}

impl K3Kernel {
    pub fn new(
        normalized: &MatrixField,
        x: Point,
        delta: f64,
        cube_side: f64,
        budget: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(delta > 0.0) || !(delta < 3f64.sqrt() * cube_side) {
            return Err(Error::Domain(format!(
                "k3 needs 0 < delta < sqrt(3) * side, got delta = {delta}, side = {cube_side}"
            )));
        }
        let frozen = ConstKernel::new(normalized.ball_average(&x, delta / 2.0, budget, seed))?;
        Ok(Self { x, delta, frozen })
    }

    pub fn eval(&self, z: &Point) -> Point {
        self.frozen.grad_unchecked(z) - riesz(z) / OMEGA_N
    }

    pub fn decompose(&self, j_max: usize, quad: &SphereQuadrature) -> Result<Decomposition> {
        let mut dec = decompose(|z| self.eval(z), j_max, quad)?;
        dec.x = Some(self.x);
        dec.delta = Some(self.delta);
        Ok(dec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub j: usize,
    pub max_coeff: f64,
    /// `𝔍_ω(ℓQ)^{1/2} j^{-7/2}`.
    pub envelope: f64,
    /// `max_coeff / (C envelope)` with the fitted `C`.
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// Largest coefficient over even degrees.
    pub even_max: f64,
    /// Log-space least-squares `C` over odd degrees above the noise floor.
    pub envelope_c: Option<f64>,
    /// Smallest `C` for which the envelope holds at every odd degree.
    pub envelope_c_sup: Option<f64>,
    /// Log–log slope of `max_ℓ |k_{j,ℓ}|` against odd `j ∈ [3, J_max]`.
    pub slope: Option<f64>,
    pub per_j: Vec<DecayRow>,
    /// Set when no odd degree carries a coefficient above the noise floor.
    pub vacuous: bool,
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Parity and envelope diagnostics for a decomposition.
pub fn decay_report(dec: &Decomposition, omega: &OscillationModulus, cube_side: f64) -> Result<DecayReport> {
    if dec.j_max < 8 {
        return Err(Error::Domain(format!("decay fits need j_max >= 8, got {}", dec.j_max)));
    }
    let scale = omega.dini_small(cube_side, 0)?.sqrt();
    let maxes: Vec<f64> = (0..=dec.j_max).map(|j| dec.max_at_degree(j)).collect();
    let even_max = maxes.iter().step_by(2).cloned().fold(0.0, f64::max);
    let floor = NOISE_FLOOR * maxes.iter().cloned().fold(0.0, f64::max);
    let odd: Vec<usize> = (1..=dec.j_max).step_by(2).filter(|&j| maxes[j] > floor && maxes[j] > 0.0).collect();
    let envelope = |j: usize| scale * (j as f64).powf(-ENVELOPE_EXPONENT);

    let (c_fit, c_sup) = if scale > 0.0 && !odd.is_empty() {
        let logs: Vec<f64> = odd.iter().map(|&j| (maxes[j] / envelope(j)).ln()).collect();
        let c_fit = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
        let c_sup = odd.iter().map(|&j| maxes[j] / envelope(j)).fold(0.0, f64::max);
        (Some(c_fit), Some(c_sup))
    } else {
        (None, None)
    };
    let fit: Vec<usize> = odd.iter().cloned().filter(|&j| j >= 3).collect();
    let xs: Vec<f64> = fit.iter().map(|&j| (j as f64).ln()).collect();
    let ys: Vec<f64> = fit.iter().map(|&j| maxes[j].ln()).collect();
    let per_j = (1..=dec.j_max)
        .step_by(2)
        .map(|j| DecayRow {
            j,
            max_coeff: maxes[j],
            envelope: envelope(j),
            slack: c_fit.map(|c| maxes[j] / (c * envelope(j))),
        })
        .collect();
    Ok(DecayReport {
        even_max,
        envelope_c: c_fit,
        envelope_c_sup: c_sup,
        slope: least_squares_slope(&xs, &ys),
        per_j,
        vacuous: odd.is_empty(),
    })
}
