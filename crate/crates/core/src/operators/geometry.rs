//! Geometric functionals of a measure on a ball: densities, Poisson-type
//! sums, flatness coefficients, mean oscillation of `T 1`, and the local
//! rectifiability criterion built from them.

use serde::{Deserialize, Serialize};

use super::norm::{opnorm_pairs, NormMethod, PowerOptions};
use super::{auto_delta_grid, PairStore, TruncatedOperator, DEFAULT_DELTA_COUNT};
use crate::dini::OscillationModulus;
use crate::kernels::{FrozenKernel, KernelSpec};
use crate::matrixfield::{sym_eigen, MatrixField};
use crate::measures::{Ball, DiscreteMeasure};
use crate::numeric::{geometric_grid, pairwise_sum};
use crate::{Error, Point, Result, N_DIM};

const NELDER_MEAD_ITERS: usize = 200;

/// Hyperplane `{x : ⟨normal, x⟩ = offset}` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Point,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Point, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0) {
            return Err(Error::Domain("plane normal must be nonzero".into()));
        }
        Ok(Self { normal: normal / n, offset: offset / n })
    }

    pub fn through(point: &Point, normal: Point) -> Result<Self> {
        let p = Self::new(normal, 0.0)?;
        Ok(Self { normal: p.normal, offset: p.normal.dot(point) })
    }

    pub fn distance(&self, x: &Point) -> f64 {
        (self.normal.dot(x) - self.offset).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    /// Best value found (never above `beta_pca`).
    pub beta: f64,
    pub plane: Plane,
    pub beta_pca: f64,
    pub pca_plane: Plane,
    /// `β^L` for a caller-supplied plane.
    pub beta_given: Option<f64>,
    pub through_center: bool,
}

/// `β^L_{μ,1}(B) = r^{-n} Σ_{x∈B} dist(x, L)/r · w(x)`.
pub fn beta_for_plane(measure: &DiscreteMeasure, ball: &Ball, plane: &Plane) -> f64 {
    let r = ball.radius;
    let terms: Vec<f64> = measure
        .points
        .iter()
        .zip(&measure.weights)
        .filter(|(p, _)| ball.contains(p))
        .map(|(p, w)| plane.distance(p) / r * w)
        .collect();
    pairwise_sum(&terms) / r.powi(N_DIM as i32)
}

fn normal_from_angles(theta: f64, phi: f64) -> Point {
    Point::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

fn angles_from_normal(n: &Point) -> (f64, f64) {
    (n.z.clamp(-1.0, 1.0).acos(), n.y.atan2(n.x))
}

/// Minimises `f` from `x0` with a fixed number of Nelder–Mead iterations.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: &[f64], iters: usize) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += step[i];
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let centroid: Vec<f64> =
            (0..dim).map(|k| simplex[..dim].iter().map(|v| v[k]).sum::<f64>() / dim as f64).collect();
        let along =
            |t: f64| -> Vec<f64> { (0..dim).map(|k| centroid[k] + t * (simplex[dim][k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[dim] = xe;
                vals[dim] = fe;
            } else {
                simplex[dim] = xr;
                vals[dim] = fr;
            }
        } else if fr < vals[dim - 1] {
            simplex[dim] = xr;
            vals[dim] = fr;
        } else {
            let (xc, fc) = if fr < vals[dim] {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < vals[dim].min(fr) {
                simplex[dim] = xc;
                vals[dim] = fc;
            } else {
                for i in 1..=dim {
                    simplex[i] = (0..dim).map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k])).collect();
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=dim).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    (simplex[best].clone(), vals[best])
}

/// Best-fitting plane for `μ` on `B`: weighted PCA start, then Nelder–Mead
/// over the normal's angles (and the offset unless `through_center`).
pub fn beta_flatness(
    measure: &DiscreteMeasure,
    ball: &Ball,
    plane: Option<&Plane>,
    through_center: bool,
) -> Result<BetaReport> {
    let inside: Vec<(Point, f64)> =
        measure.points.iter().zip(&measure.weights).filter(|(p, _)| ball.contains(p)).map(|(p, w)| (*p, *w)).collect();
    if inside.is_empty() {
        return Err(Error::EmptyRestriction);
    }
    let mass: f64 = inside.iter().map(|(_, w)| w).sum();
    let bary = if through_center {
        ball.center
    } else {
        inside.iter().fold(Point::zeros(), |acc, (p, w)| acc + p * *w) / mass
    };
    let mut cov = crate::Mat3::zeros();
    for (p, w) in &inside {
        let d = p - bary;
        cov += d * d.transpose() * *w;
    }
    let (evals, evecs) = sym_eigen(&cov);
    let k = (0..3).min_by(|&a, &b| evals[a].total_cmp(&evals[b])).unwrap_or(0);
    let pca_plane = Plane::through(&bary, evecs.column(k).into_owned())?;
    let beta_pca = beta_for_plane(measure, ball, &pca_plane);

    let (t0, p0) = angles_from_normal(&pca_plane.normal);
    let r = ball.radius;
    let (best_plane, best) = if through_center {
        let (x, v) = nelder_mead(
            |a| {
                beta_for_plane(
                    measure,
                    ball,
                    &Plane {
                        normal: normal_from_angles(a[0], a[1]),
                        offset: normal_from_angles(a[0], a[1]).dot(&ball.center),
                    },
                )
            },
            &[t0, p0],
            &[0.2, 0.2],
            NELDER_MEAD_ITERS,
        );
        let n = normal_from_angles(x[0], x[1]);
        (Plane { normal: n, offset: n.dot(&ball.center) }, v)
    } else {
        let (x, v) = nelder_mead(
            |a| beta_for_plane(measure, ball, &Plane { normal: normal_from_angles(a[0], a[1]), offset: a[2] }),
            &[t0, p0, pca_plane.offset],
            &[0.2, 0.2, 0.1 * r],
            NELDER_MEAD_ITERS,
        );
        (Plane { normal: normal_from_angles(x[0], x[1]), offset: x[2] }, v)
    };
    let (beta, plane_out) = if best < beta_pca { (best, best_plane) } else { (beta_pca, pca_plane) };
    Ok(BetaReport {
        beta,
        plane: plane_out,
        beta_pca,
        pca_plane,
        beta_given: plane.map(|l| beta_for_plane(measure, ball, l)),
        through_center,
    })
}

/// `α_A(t) = t + t^β + ω_A(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSpec {
    pub beta: f64,
    pub omega: OscillationModulus,
}

impl AlphaSpec {
    pub fn new(beta: f64, omega: OscillationModulus) -> Self {
        Self { beta, omega }
    }

    pub fn eval(&self, t: f64) -> f64 {
        t + t.powf(self.beta) + self.omega.eval_log(t.ln())
    }

    /// `𝔍_α(t) = t + t^β/β + 𝔍_ω(t)`.
    pub fn dini(&self, t: f64) -> Result<f64> {
        Ok(t + t.powf(self.beta) / self.beta + self.omega.dini_small(t, 0)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    /// `Θ_μ(B) = μ(B)/r(B)²`.
    pub theta_b: f64,
    /// `P_{γ,μ}(B) = Σ_j 2^{-γj} Θ_μ(2ʲB)`.
    pub p_gamma: f64,
    /// `𝒫ᴺ_{ω,μ}(B) = Σ_{j≥N} α(2^{-j}) Θ_μ(2ʲB)`.
    pub p_n_omega: f64,
    /// `𝒫⁰_{ω,μ}(B)`.
    pub p_0_omega: f64,
    /// `Θ_μ(2ʲB)` for `j = 0..J`.
    pub theta_dyadic: Vec<f64>,
    pub beta1: Option<BetaReport>,
    pub mean_osc: Option<f64>,
}

/// Dyadic densities and Poisson-type sums truncated after `j_terms` terms.
pub fn geometry_functionals(
    measure: &DiscreteMeasure,
    ball: &Ball,
    gamma: f64,
    n: u32,
    alpha: &AlphaSpec,
    j_terms: usize,
) -> Result<GeometryReport> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let radii: Vec<f64> = (0..j_terms).map(|j| ball.radius * 2f64.powi(j as i32)).collect();
    let masses = measure.ball_masses(&ball.center, &radii);
    let theta: Vec<f64> = masses.iter().zip(&radii).map(|(m, r)| m / (r * r)).collect();
    let p_gamma =
        pairwise_sum(&theta.iter().enumerate().map(|(j, t)| 2f64.powf(-gamma * j as f64) * t).collect::<Vec<_>>());
    let poisson = |from: usize| {
        let terms: Vec<f64> =
            theta.iter().enumerate().skip(from).map(|(j, t)| alpha.eval(2f64.powi(-(j as i32))) * t).collect();
        pairwise_sum(&terms)
    };
    Ok(GeometryReport {
        theta_b: theta.first().copied().unwrap_or(0.0),
        p_gamma,
        p_n_omega: poisson(n as usize),
        p_0_omega: poisson(0),
        theta_dyadic: theta,
        beta1: None,
        mean_osc: None,
    })
}

/// `⨍_B |T_{μ,δ}1 - m_B(T_{μ,δ}1, μ)|² dμ` at fixed truncation.
pub fn mean_oscillation(measure: &DiscreteMeasure, kernel: &KernelSpec, ball: &Ball, delta: f64) -> Result<f64> {
    let op = TruncatedOperator::new(kernel, measure, delta)?;
    let ones = vec![1.0; measure.len()];
    let inside: Vec<(Point, f64)> =
        measure.points.iter().zip(&measure.weights).filter(|(p, _)| ball.contains(p)).map(|(p, w)| (*p, *w)).collect();
    if inside.is_empty() {
        return Err(Error::EmptyRestriction);
    }
    let vals: Vec<Point> = inside.iter().map(|(x, _)| op.apply(&ones, x)).collect();
    let mass = pairwise_sum(&inside.iter().map(|(_, w)| *w).collect::<Vec<_>>());
    let mut mean = Point::zeros();
    for (v, (_, w)) in vals.iter().zip(&inside) {
        mean += v * *w;
    }
    mean /= mass;
    let sq: Vec<f64> = vals.iter().zip(&inside).map(|(v, (_, w))| (v - mean).norm_squared() * w).collect();
    Ok(pairwise_sum(&sq) / mass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionParams {
    pub c0: f64,
    pub c0_prime: f64,
    pub n: u32,
    pub delta_flat: f64,
    pub tau: f64,
    pub lambda: f64,
    /// Hölder exponent `β` in `α_A`.
    pub beta: f64,
    pub j_terms: usize,
    /// Truncation for `T 1` in the mean oscillation; defaults to just below the atom spacing.
    pub trunc_delta: Option<f64>,
    pub budget: usize,
    pub seed: u64,
}

impl Default for CriterionParams {
    fn default() -> Self {
        Self {
            c0: f64::INFINITY,
            c0_prime: f64::INFINITY,
            n: 2,
            delta_flat: 1e-3,
            tau: 0.1,
            lambda: 1.0,
            beta: 0.5,
            j_terms: 40,
            trunc_delta: None,
            budget: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub index: u8,
    pub name: String,
    /// Measured quantity, normalised so that the hypothesis reads `value ≤ bound`.
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub hypotheses: Vec<Hypothesis>,
    pub all_pass: bool,
    pub geometry: GeometryReport,
    pub theta_2n: f64,
    pub opnorm_2n: f64,
    /// Set when `2ᴺ r(B)` exceeds the support diameter.
    pub warnings: Vec<String>,
}

impl CriterionReport {
    /// `(C₀, C₀′)` that the measured values just satisfy, scaled by `slack`.
    pub fn calibrated_constants(&self, slack: f64) -> (f64, f64) {
        let get = |i: u8| self.hypotheses.iter().find(|h| h.index == i).map(|h| h.value).unwrap_or(0.0);
        (slack * get(2), slack * get(3))
    }

    pub fn hypothesis(&self, index: u8) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.index == index)
    }
}

/// Evaluates hypotheses (1)–(5) of the local criterion for `μ`, `B` and the
/// frozen-coefficient operator of `field`.
pub fn criterion_check(
    measure: &DiscreteMeasure,
    ball: &Ball,
    params: &CriterionParams,
    field: &MatrixField,
) -> Result<CriterionReport> {
    let mut warnings = Vec::new();
    let big = ball.dilate(2f64.powi(params.n as i32));
    let diam = super::diameter(&measure.points);
    if big.radius > diam {
        warnings.push(format!("2^N r(B) = {} exceeds diam(supp mu) = {diam}", big.radius));
    }
    let alpha = AlphaSpec::new(params.beta, field.declared_modulus());
    let mut geo = geometry_functionals(measure, ball, 0.5, params.n, &alpha, params.j_terms)?;
    let theta_b = geo.theta_b;
    let theta_2n = geo.theta_dyadic.get(params.n as usize).copied().unwrap_or(0.0);
    if theta_b == 0.0 {
        return Err(Error::EmptyRestriction);
    }
    let mut hyps = Vec::new();
    hyps.push(Hypothesis {
        index: 1,
        name: "radius".into(),
        value: ball.radius,
        bound: params.lambda,
        pass: ball.radius <= params.lambda,
    });

    // (2): Poisson sums and the local density bound above the atomic scale.
    let r_p0 = geo.p_0_omega / theta_b;
    let jn = alpha.dini(2f64.powi(-(params.n as i32)))?;
    let r_pn = geo.p_n_omega / (jn * theta_2n);
    let atomic = measure.atomic_scale();
    let r_hi = big.radius;
    let mut r_local: f64 = 0.0;
    if atomic < r_hi {
        let grid = geometric_grid(atomic, r_hi, 16);
        let centers: Vec<&Point> = measure.points.iter().filter(|p| ball.contains(p)).collect();
        let stride = centers.len().div_ceil(256).max(1);
        for x in centers.iter().step_by(stride) {
            for (m, r) in measure.ball_masses(x, &grid).iter().zip(&grid) {
                r_local = r_local.max(m / (r * r) / theta_2n);
            }
        }
    } else {
        warnings.push("atomic scale exceeds 2^N r(B): local density bound not sampled".into());
    }
    let v2 = r_p0.max(r_pn).max(r_local);
    hyps.push(Hypothesis {
        index: 2,
        name: "poisson-and-growth".into(),
        value: v2,
        bound: params.c0,
        pass: v2 <= params.c0,
    });

    // (3): operator norm on the restriction to 2ᴺB.
    let restricted = measure.restrict(big);
    let kernel = KernelSpec::Frozen(FrozenKernel::new(field.clone(), params.budget, params.seed)?);
    let opnorm_2n = if restricted.len() >= 2 {
        let store = PairStore::build(&kernel, &restricted, super::DEFAULT_MAX_ATOMS)?;
        let grid = auto_delta_grid(&restricted, DEFAULT_DELTA_COUNT)?;
        let opts = PowerOptions { tol: 1e-8, seed: params.seed, ..PowerOptions::default() };
        opnorm_pairs(&store, &grid, NormMethod::Power, &opts)?.sup
    } else {
        0.0
    };
    let v3 = opnorm_2n / theta_2n;
    hyps.push(Hypothesis {
        index: 3,
        name: "operator-bound".into(),
        value: v3,
        bound: params.c0_prime,
        pass: v3 <= params.c0_prime,
    });

    // (4): flatness against planes through the center.
    let beta = beta_flatness(measure, ball, None, true)?;
    let v4 = beta.beta / theta_b;
    hyps.push(Hypothesis {
        index: 4,
        name: "flatness".into(),
        value: v4,
        bound: params.delta_flat,
        pass: v4 <= params.delta_flat,
    });

    // (5): mean oscillation of T1.
    let delta = match params.trunc_delta {
        Some(d) => d,
        None => 0.999 * measure.min_spacing(),
    };
    let osc = mean_oscillation(measure, &kernel, ball, delta)?;
    let v5 = osc / (theta_2n * theta_2n);
    hyps.push(Hypothesis {
        index: 5,
        name: "mean-oscillation".into(),
        value: v5,
        bound: params.tau,
        pass: v5 <= params.tau,
    });

    geo.beta1 = Some(beta);
    geo.mean_osc = Some(osc);
    let all_pass = hyps.iter().all(|h| h.pass);
    Ok(CriterionReport { hypotheses: hyps, all_pass, geometry: geo, theta_2n, opnorm_2n, warnings })
}
