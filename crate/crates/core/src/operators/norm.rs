//! `L²(μ)` operator norms: power iteration on the normal operator and a
//! dense SVD oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{PairStore, StreamedOperator, TruncatedOperator};
use crate::kernels::KernelSpec;
use crate::measures::DiscreteMeasure;
use crate::{Error, Result};

/// Largest atom count accepted by the SVD oracle.
pub const SVD_MAX_ATOMS: usize = 512;

/// Symmetric positive semidefinite operator `BᵀB` on `ℝᴺ`.
pub trait NormalOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_normal(&self, v: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMethod {
    Power,
    Svd,
}

impl std::str::FromStr for NormMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Self::Power),
            "svd" => Ok(Self::Svd),
            other => Err(Error::Invalid(format!("unknown norm method '{other}' (power|svd)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    /// Relative tolerance on the Rayleigh quotient.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra attempts from fresh random starts after a non-converged run.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, restarts: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpNormEstimate {
    pub delta: f64,
    pub sigma_max: f64,
    pub method: NormMethod,
    pub iterations: usize,
    /// Estimated relative error of `σ²` (0 for the SVD oracle).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpNormReport {
    pub per_delta: Vec<OpNormEstimate>,
    /// `max_δ σ_max(δ)` over the grid.
    pub sup: f64,
    pub argsup_delta: f64,
}

impl OpNormReport {
    fn from_estimates(per_delta: Vec<OpNormEstimate>) -> Self {
        let best = per_delta.iter().fold((0.0, f64::NAN), |acc, e| {
            if e.sigma_max > acc.0 || acc.1.is_nan() {
                (e.sigma_max, e.delta)
            } else {
                acc
            }
        });
        Self { per_delta, sup: best.0, argsup_delta: best.1 }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);
    v
}

/// Power iteration on `BᵀB`. Stops once the relative Rayleigh-quotient
/// increment and its geometric-tail extrapolation are both below `tol`.
/// When every restart stalls (a cluster of nearly equal top singular
/// values), the last iterate seeds a Lanczos run whose Ritz residual must
/// meet the same tolerance. Returns the estimate of `‖B‖` and the final iterate (a warm start for a
/// nearby operator).
pub fn power_norm<O: NormalOperator + ?Sized>(
    op: &O,
    start: Option<&[f64]>,
    opts: &PowerOptions,
) -> Result<(OpNormEstimate, Vec<f64>)> {
    let n = op.dim();
    let est = |sigma, iterations, residual| OpNormEstimate {
        delta: f64::NAN,
        sigma_max: sigma,
        method: NormMethod::Power,
        iterations,
        residual,
    };
    if n == 0 {
        return Ok((est(0.0, 0, 0.0), Vec::new()));
    }
    let mut total_iters = 0;
    let mut last_residual = f64::INFINITY;
    let mut carry: Option<Vec<f64>> = start.filter(|s| s.len() == n).map(|s| s.to_vec());
    for attempt in 0..=opts.restarts {
        // Restarts resume from the last iterate; the perturbation keeps a
        // generic component so no eigendirection is missed.
        let mut v = match carry.take() {
            Some(s) => {
                let noise = random_unit(n, (opts.seed ^ 0x5eed).wrapping_add(attempt as u64));
                let mut v: Vec<f64> = s.iter().zip(&noise).map(|(a, b)| a + 1e-3 * b).collect();
                if normalize(&mut v) == 0.0 {
                    v = noise;
                }
                v
            }
            None => random_unit(n, opts.seed.wrapping_add(attempt as u64)),
        };
        let mut w = vec![0.0; n];
        let mut lambda_prev = f64::NAN;
        let mut delta_prev = f64::NAN;
        for k in 1..=opts.max_iter {
            total_iters += 1;
            op.apply_normal(&v, &mut w);
            let lambda = dot(&v, &w);
            let norm_w = dot(&w, &w).sqrt();
            if norm_w == 0.0 {
                return Ok((est(0.0, total_iters, 0.0), v));
            }
            v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm_w);
            if k >= 2 {
                let step = lambda - lambda_prev;
                let rel = step.abs() / lambda;
                let mut tail = rel;
                if delta_prev.is_finite() && delta_prev > 0.0 && step >= 0.0 {
                    let rho = step / delta_prev;
                    tail = if rho < 1.0 { rel * rho / (1.0 - rho) } else { f64::INFINITY };
                }
                let residual = rel.max(tail);
                last_residual = residual;
                // Increments at the rounding floor carry no information.
                let stalled = rel <= 4.0 * f64::EPSILON && k >= 4;
                if residual < opts.tol || stalled {
                    return Ok((est(lambda.max(0.0).sqrt(), total_iters, residual.min(rel.max(f64::EPSILON))), v));
                }
                delta_prev = step;
            }
            lambda_prev = lambda;
        }
        carry = Some(v);
    }
    let start = carry.unwrap_or_else(|| random_unit(n, opts.seed));
    match lanczos_top(op, start, opts.tol, opts.max_iter.min(n).max(1)) {
        Ok(p) => Ok((est(p.theta.max(0.0).sqrt(), total_iters + p.steps, p.residual), p.vector)),
        Err((steps, residual)) => {
            Err(Error::NoConvergence { iterations: total_iters + steps, residual: residual.min(last_residual) })
        }
    }
}

struct RitzPair {
    theta: f64,
    steps: usize,
    /// `‖BᵀB y − θy‖/θ`.
    residual: f64,
    vector: Vec<f64>,
}

/// Top eigenpair of `BᵀB` by Lanczos with full reorthogonalisation.
/// On failure returns the steps taken and the last residual.
fn lanczos_top<O: NormalOperator + ?Sized>(
    op: &O,
    mut q: Vec<f64>,
    tol: f64,
    max_steps: usize,
) -> std::result::Result<RitzPair, (usize, f64)> {
    const CHECK_EVERY: usize = 8;
    let n = op.dim();
    if normalize(&mut q) == 0.0 {
        return Err((0, f64::INFINITY));
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut w = vec![0.0; n];
    let mut last = f64::INFINITY;
    for j in 1..=max_steps {
        op.apply_normal(&q, &mut w);
        alpha.push(dot(&q, &w));
        basis.push(q);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        let exhausted = b <= f64::EPSILON * alpha.iter().fold(0.0f64, |m, a| m.max(a.abs())) || j == n;
        if exhausted || j % CHECK_EVERY == 0 || j == max_steps {
            let mut t = nalgebra::DMatrix::<f64>::zeros(j, j);
            for i in 0..j {
                t[(i, i)] = alpha[i];
                if i + 1 < j {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = t.symmetric_eigen();
            let top = eig.eigenvalues.imax();
            let theta = eig.eigenvalues[top];
            let s = eig.eigenvectors.column(top);
            let residual = if exhausted || theta <= 0.0 { 0.0 } else { (b * s[j - 1]).abs() / theta };
            last = residual;
            if residual < tol || exhausted {
                let mut y = vec![0.0; n];
                for (coef, v) in s.iter().zip(&basis) {
                    y.iter_mut().zip(v).for_each(|(a, x)| *a += coef * x);
                }
                normalize(&mut y);
                return Ok(RitzPair { theta, steps: j, residual: residual.max(f64::EPSILON), vector: y });
            }
        }
        beta.push(b);
        q = w.iter().map(|x| x / b).collect();
    }
    Err((max_steps, last))
}

/// Largest singular value of the conjugated dense matrix.
pub fn svd_norm(store: &PairStore, delta: f64) -> Result<OpNormEstimate> {
    if store.atoms() > SVD_MAX_ATOMS {
        return Err(Error::Invalid(format!("svd oracle limited to {SVD_MAX_ATOMS} atoms, got {}", store.atoms())));
    }
    let m = store.dense(delta);
    let sigma = if m.is_empty() { 0.0 } else { m.singular_values().max() };
    Ok(OpNormEstimate { delta, sigma_max: sigma, method: NormMethod::Svd, iterations: 0, residual: 0.0 })
}

/// Norms over a δ-grid from a prebuilt pair store, warm-starting each power
/// run from the previous iterate.
pub fn opnorm_pairs(
    store: &PairStore,
    delta_grid: &[f64],
    method: NormMethod,
    opts: &PowerOptions,
) -> Result<OpNormReport> {
    let mut out = Vec::with_capacity(delta_grid.len());
    let mut warm: Option<Vec<f64>> = None;
    for &delta in delta_grid {
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("truncation radius must be positive, got {delta}")));
        }
        let e = match method {
            NormMethod::Svd => svd_norm(store, delta)?,
            NormMethod::Power => {
                let (mut e, v) = power_norm(&store.at(delta), warm.as_deref(), opts)?;
                e.delta = delta;
                warm = Some(v);
                e
            }
        };
        out.push(e);
    }
    Ok(OpNormReport::from_estimates(out))
}

/// `sup_δ ‖T_{μ,δ}‖` over the grid. Dense storage up to `max_atoms`,
/// matrix-free power iteration beyond.
pub fn opnorm(
    kernel: &KernelSpec,
    measure: &DiscreteMeasure,
    method: NormMethod,
    delta_grid: &[f64],
    opts: &PowerOptions,
    max_atoms: usize,
) -> Result<OpNormReport> {
    if measure.len() <= max_atoms {
        let store = PairStore::build(kernel, measure, max_atoms)?;
        return opnorm_pairs(&store, delta_grid, method, opts);
    }
    if method == NormMethod::Svd {
        return Err(Error::BudgetExceeded { atoms: measure.len(), max: max_atoms });
    }
    let mut out = Vec::with_capacity(delta_grid.len());
    let mut warm: Option<Vec<f64>> = None;
    for &delta in delta_grid {
        let op = TruncatedOperator::new(kernel, measure, delta)?;
        let (mut e, v) = power_norm(&StreamedOperator { op }, warm.as_deref(), opts)?;
        e.delta = delta;
        warm = Some(v);
        out.push(e);
    }
    Ok(OpNormReport::from_estimates(out))
}
