//! Doubling moduli of oscillation and their Dini integrals.
//!
//! For a modulus `θ` the small-scale integral is
//! `J(r) = ∫₀^r θ(t) dt/t` and the large-scale integral of order `d` is
//! `L_d(r) = r^d ∫_r^∞ θ(t) t^{-d-1} dt`. The budgets
//! `τ(r) = J(r) + L_2(r)` and `τ̂(R) = J(R) + L_1(R)` control every kernel
//! estimate in the crate.
//!
//! All integrals are carried out on the logarithmic axis `u = ln t`, where
//! every supported family is smooth away from a known set of breakpoints.

use serde::{Deserialize, Serialize};

use crate::numeric::{pairwise_sum, GaussLegendre};
use crate::{Error, Result, N_DIM};

/// Default number of Gauss panels for integrals without a closed form.
pub const DEFAULT_PANELS: usize = 2048;
const GAUSS_ORDER: usize = 8;
/// Exponent of the algebraic map `u = ln r + 1 - v^{-m}` used for the
/// semi-infinite small-scale range.
const SMALL_SCALE_MAP: f64 = 4.0;

fn one() -> f64 {
    1.0
}

/// A nonnegative function `θ(t)` on `(0, ∞)` from a closed, serialisable family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OscillationModulus {
    /// `scale · t^α`.
    Power {
        alpha: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    /// `scale · (-ln t)^{-γ-2}` for `t ≤ e⁻¹`, capped at `scale` above.
    LogPower {
        gamma: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    Constant {
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    /// Piecewise linear in `ln t` through `(t_i, θ_i)`, constant outside the table.
    Tabulated { t: Vec<f64>, theta: Vec<f64>, kappa: f64 },
}

/// Result of [`OscillationModulus::check_doubling`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub holds: bool,
    pub worst_ratio: f64,
}

/// Dini integrals of one modulus on a grid of radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiniProfile {
    pub r_grid: Vec<f64>,
    pub i_values: Vec<f64>,
    pub l_values: Vec<f64>,
    pub d: f64,
}

const LOG_CAP: f64 = -1.0;

impl OscillationModulus {
    pub fn power(alpha: f64) -> Self {
        Self::Power { alpha, scale: 1.0, kappa: None }
    }

    pub fn log_power(gamma: f64) -> Self {
        Self::LogPower { gamma, scale: 1.0, kappa: None }
    }

    pub fn constant(c: f64) -> Self {
        Self::Constant { c, kappa: None }
    }

    /// Builds a tabulated modulus, validating the table.
    pub fn tabulated(t: Vec<f64>, theta: Vec<f64>, kappa: f64) -> Result<Self> {
        let m = Self::Tabulated { t, theta, kappa };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::Invalid(s.to_string()));
        match self {
            Self::Power { alpha, scale, kappa } => {
                if !alpha.is_finite() || !(*scale >= 0.0) || !scale.is_finite() {
                    return bad("power modulus needs finite alpha and nonnegative scale");
                }
                check_kappa(*kappa)
            }
            Self::LogPower { gamma, scale, kappa } => {
                if !gamma.is_finite() || !(*scale >= 0.0) || !scale.is_finite() {
                    return bad("log_power modulus needs finite gamma and nonnegative scale");
                }
                check_kappa(*kappa)
            }
            Self::Constant { c, kappa } => {
                if !(*c >= 0.0) || !c.is_finite() {
                    return bad("constant modulus must be finite and nonnegative");
                }
                check_kappa(*kappa)
            }
            Self::Tabulated { t, theta, kappa } => {
                if t.is_empty() || t.len() != theta.len() {
                    return bad("tabulated modulus needs equally long, nonempty t and theta");
                }
                if t.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return bad("tabulated abscissae must be positive and finite");
                }
                if t.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated abscissae must be strictly increasing");
                }
                if theta.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                    return bad("tabulated ordinates must be nonnegative and finite");
                }
                check_kappa(Some(*kappa))
            }
        }
    }

    /// Doubling constant: declared, or closed form for the analytic families.
    pub fn kappa(&self) -> f64 {
        match self {
            Self::Power { alpha, kappa, .. } => kappa.unwrap_or(2f64.powf(alpha.abs())),
            // Worst pair is s = t/2 with -ln t = 1, just below the cap.
            Self::LogPower { gamma, kappa, .. } => {
                kappa.unwrap_or((1.0 + std::f64::consts::LN_2).powf((gamma + 2.0).max(0.0)))
            }
            Self::Constant { kappa, .. } => kappa.unwrap_or(1.0),
            Self::Tabulated { kappa, .. } => *kappa,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Power { .. } => "power",
            Self::LogPower { .. } => "log_power",
            Self::Constant { .. } => "constant",
            Self::Tabulated { .. } => "tabulated",
        }
    }

    /// `θ(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("modulus evaluated at t = {t}")));
        }
        Ok(self.eval_log(t.ln()))
    }

    /// `θ(e^u)`; total on the whole real line, so integrands never underflow `t`.
    pub fn eval_log(&self, u: f64) -> f64 {
        match self {
            Self::Power { alpha, scale, .. } => scale * (alpha * u).exp(),
            Self::LogPower { gamma, scale, .. } => {
                if u >= LOG_CAP {
                    *scale
                } else {
                    scale * (-u).powf(-gamma - 2.0)
                }
            }
            Self::Constant { c, .. } => *c,
            Self::Tabulated { t, theta, .. } => {
                let n = t.len();
                let u0 = t[0].ln();
                if u <= u0 {
                    return theta[0];
                }
                if u >= t[n - 1].ln() {
                    return theta[n - 1];
                }
                let k = t.partition_point(|&x| x.ln() <= u).clamp(1, n - 1);
                let (ua, ub) = (t[k - 1].ln(), t[k].ln());
                let s = (u - ua) / (ub - ua);
                theta[k - 1] + s * (theta[k] - theta[k - 1])
            }
        }
    }

    /// Points on the log axis where the modulus is not smooth.
    fn log_breakpoints(&self) -> Vec<f64> {
        match self {
            Self::LogPower { .. } => vec![LOG_CAP],
            Self::Tabulated { t, .. } => t.iter().map(|x| x.ln()).collect(),
            _ => Vec::new(),
        }
    }

    /// Whether `∫₀ θ(t) dt/t` converges, with the reason when it does not.
    fn small_scale_obstruction(&self) -> Option<String> {
        match self {
            Self::Power { alpha, scale, .. } if *alpha <= 0.0 && *scale > 0.0 => {
                Some(format!("power modulus with alpha = {alpha} <= 0"))
            }
            Self::LogPower { gamma, scale, .. } if *gamma <= -1.0 && *scale > 0.0 => {
                Some(format!("log_power modulus with gamma = {gamma} <= -1"))
            }
            Self::Constant { c, .. } if *c > 0.0 => Some(format!("constant modulus c = {c} > 0")),
            Self::Tabulated { theta, .. } if theta[0] > 0.0 => {
                Some(format!("tabulated modulus extrapolates as theta = {} > 0 towards t = 0", theta[0]))
            }
            _ => None,
        }
    }

    fn large_scale_obstruction(&self, d: f64) -> Option<String> {
        match self {
            Self::Power { alpha, scale, .. } if *alpha >= d && *scale > 0.0 => {
                Some(format!("power modulus with alpha = {alpha} >= d = {d}"))
            }
            _ => None,
        }
    }

    /// `J` at `r = e^u`, valid far below the smallest positive float.
    fn small_at_log(&self, u: f64) -> f64 {
        match self {
            Self::Power { alpha, scale, .. } => {
                if *scale == 0.0 {
                    0.0
                } else {
                    scale * (alpha * u).exp() / alpha
                }
            }
            Self::LogPower { gamma, scale, .. } => {
                let g1 = gamma + 1.0;
                if *scale == 0.0 {
                    0.0
                } else if u <= LOG_CAP {
                    scale * (-u).powf(-g1) / g1
                } else {
                    scale * (1.0 / g1 + (u - LOG_CAP))
                }
            }
            Self::Constant { .. } => 0.0,
            Self::Tabulated { t, theta, .. } => tabulated_small(t, theta, u),
        }
    }

    /// `L_d` at `r = e^u`.
    fn large_at_log(&self, d: f64, u: f64, panels: usize) -> f64 {
        match self {
            Self::Power { alpha, scale, .. } => {
                if *scale == 0.0 {
                    0.0
                } else {
                    scale * (alpha * u).exp() / (d - alpha)
                }
            }
            Self::Constant { c, .. } => c / d,
            Self::LogPower { scale, .. } => {
                if u >= LOG_CAP {
                    scale / d
                } else {
                    // Finite part up to the cap, then the constant tail.
                    let s_b = LOG_CAP - u;
                    let rule = GaussLegendre::new(GAUSS_ORDER);
                    let panels = if panels == 0 { DEFAULT_PANELS } else { panels };
                    let finite = crate::numeric::composite_gauss(&rule, 0.0, s_b, panels, |s| {
                        self.eval_log(u + s) * (-d * s).exp()
                    });
                    finite + scale * (-d * s_b).exp() / d
                }
            }
            Self::Tabulated { t, theta, .. } => tabulated_large(t, theta, d, u),
        }
    }

    /// Small-scale Dini integral `J(r)`; closed form where available.
    ///
    /// `panels` is only used for families without a closed form.
    pub fn dini_small(&self, r: f64, panels: usize) -> Result<f64> {
        check_radius(r)?;
        if let Some(reason) = self.small_scale_obstruction() {
            return Err(Error::NotDs(reason));
        }
        let _ = panels;
        Ok(self.small_at_log(r.ln()))
    }

    /// Small-scale Dini integral computed by quadrature only, ignoring closed forms.
    pub fn dini_small_quadrature(&self, r: f64, panels: usize) -> Result<f64> {
        check_radius(r)?;
        if let Some(reason) = self.small_scale_obstruction() {
            return Err(Error::NotDs(reason));
        }
        Ok(dini_small_log(|u| self.eval_log(u), r.ln(), panels, &self.log_breakpoints()))
    }

    /// Large-scale Dini integral `L_d(r)`.
    pub fn dini_large(&self, d: f64, r: f64, panels: usize) -> Result<f64> {
        check_radius(r)?;
        check_order(d)?;
        if let Some(reason) = self.large_scale_obstruction(d) {
            return Err(Error::NotDl { d, reason });
        }
        Ok(self.large_at_log(d, r.ln(), panels))
    }

    /// Large-scale Dini integral computed by quadrature only.
    pub fn dini_large_quadrature(&self, d: f64, r: f64, panels: usize) -> Result<f64> {
        check_radius(r)?;
        check_order(d)?;
        if let Some(reason) = self.large_scale_obstruction(d) {
            return Err(Error::NotDl { d, reason });
        }
        Ok(dini_large_log(|u| self.eval_log(u), d, r.ln(), panels, &self.log_breakpoints()))
    }

    /// `(τ(r), τ̂(R))` with `τ = J + L_n` and `τ̂ = J + L_{n-1}`, `n = 2`.
    pub fn tau_budgets(&self, r: f64, big_r: f64, panels: usize) -> Result<(f64, f64)> {
        let n = N_DIM as f64;
        let tau = self.dini_small(r, panels)? + self.dini_large(n, r, panels)?;
        let tau_hat = self.dini_small(big_r, panels)? + self.dini_large(n - 1.0, big_r, panels)?;
        Ok((tau, tau_hat))
    }

    pub fn tau(&self, r: f64, panels: usize) -> Result<f64> {
        Ok(self.dini_small(r, panels)? + self.dini_large(N_DIM as f64, r, panels)?)
    }

    pub fn tau_hat(&self, big_r: f64, panels: usize) -> Result<f64> {
        Ok(self.dini_small(big_r, panels)? + self.dini_large(N_DIM as f64 - 1.0, big_r, panels)?)
    }

    /// `J_τ(r) = ∫₀^r τ(t) dt/t`, by quadrature on the log axis.
    pub fn dini_small_of_tau(&self, r: f64, panels: usize) -> Result<f64> {
        check_radius(r)?;
        // Validate once so the integrand below cannot fail.
        self.tau(r, 1)?;
        let inner = (panels / 16).max(16);
        Ok(dini_small_log(
            |u| self.small_at_log(u) + self.large_at_log(N_DIM as f64, u, inner),
            r.ln(),
            panels,
            &self.log_breakpoints(),
        ))
    }

    /// `L_d` applied to `J` itself: `∫_r^∞ J(t) (r/t)^d dt/t`, by quadrature.
    pub fn dini_large_of_small(&self, d: f64, r: f64, panels: usize) -> Result<f64> {
        check_radius(r)?;
        check_order(d)?;
        if let Some(reason) = self.small_scale_obstruction() {
            return Err(Error::NotDs(reason));
        }
        if let Some(reason) = self.large_scale_obstruction(d) {
            return Err(Error::NotDl { d, reason });
        }
        Ok(dini_large_log(|u| self.small_at_log(u), d, r.ln(), panels, &self.log_breakpoints()))
    }

    /// Checks `θ(t) ≤ κ θ(s)` on every grid pair with `t/2 ≤ s ≤ t`.
    pub fn check_doubling(&self, kappa: f64, t_grid: &[f64]) -> DoublingReport {
        let mut grid: Vec<f64> = t_grid.iter().copied().filter(|t| *t > 0.0).collect();
        grid.sort_by(f64::total_cmp);
        let values: Vec<f64> = grid.iter().map(|&t| self.eval_log(t.ln())).collect();
        let mut worst: f64 = 0.0;
        for (i, &t) in grid.iter().enumerate() {
            for j in (0..=i).rev() {
                let s = grid[j];
                if s < 0.5 * t {
                    break;
                }
                let (a, b) = (values[i], values[j]);
                let ratio = if a == 0.0 && b == 0.0 {
                    1.0
                } else if b == 0.0 {
                    f64::INFINITY
                } else {
                    a / b
                };
                worst = worst.max(ratio);
            }
        }
        DoublingReport { holds: worst <= kappa * (1.0 + 1e-12), worst_ratio: worst }
    }

    pub fn profile(&self, r_grid: &[f64], d: f64, panels: usize) -> Result<DiniProfile> {
        let i_values = r_grid.iter().map(|&r| self.dini_small(r, panels)).collect::<Result<Vec<_>>>()?;
        let l_values = r_grid.iter().map(|&r| self.dini_large(d, r, panels)).collect::<Result<Vec<_>>>()?;
        Ok(DiniProfile { r_grid: r_grid.to_vec(), i_values, l_values, d })
    }
}

/// Dyadic doubling grid: `per_octave` points per factor of two on `[lo, hi]`.
pub fn doubling_grid(lo: f64, hi: f64, per_octave: usize) -> Vec<f64> {
    let octaves = (hi / lo).log2().ceil().max(1.0) as usize;
    let count = octaves * per_octave.max(2) + 1;
    (0..count).map(|k| lo * 2f64.powf(k as f64 / per_octave.max(2) as f64)).collect()
}

fn check_kappa(kappa: Option<f64>) -> Result<()> {
    match kappa {
        Some(k) if !(k >= 1.0) || !k.is_finite() => {
            Err(Error::Invalid(format!("doubling constant kappa = {k} must be >= 1")))
        }
        _ => Ok(()),
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius r = {r} must be positive and finite")))
    }
}

fn check_order(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("large-scale order d = {d} must be positive")))
    }
}

/// `∫_{-∞}^{ln_r} f(u) du` for `f` given on the log axis.
///
/// The finite stretch above the lowest breakpoint is integrated panel-wise
/// between breakpoints; the semi-infinite remainder is mapped to `(0, 1]` by
/// `u = a + 1 - v^{-m}`. `panels = 0` selects [`DEFAULT_PANELS`].
pub fn dini_small_log<F: Fn(f64) -> f64>(f: F, ln_r: f64, panels: usize, breakpoints: &[f64]) -> f64 {
    let rule = GaussLegendre::new(GAUSS_ORDER);
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&b| b < ln_r).collect();
    cuts.sort_by(f64::total_cmp);
    let anchor = cuts.first().copied().unwrap_or(ln_r);
    let mut parts = Vec::new();

    let m = SMALL_SCALE_MAP;
    let panels = if panels == 0 { DEFAULT_PANELS } else { panels };
    parts.push(crate::numeric::composite_gauss(&rule, 0.0, 1.0, panels, |v| {
        if v <= 0.0 {
            return 0.0;
        }
        let vm = v.powf(-m);
        if !vm.is_finite() {
            return 0.0;
        }
        let u = anchor + 1.0 - vm;
        f(u) * m * vm / v
    }));

    cuts.push(ln_r);
    let finite_panels = (panels / 8).max(4);
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            parts.push(crate::numeric::composite_gauss(&rule, w[0], w[1], finite_panels, &f));
        }
    }
    pairwise_sum(&parts)
}

/// `e^{d ln_r} ∫_{ln_r}^∞ f(u) e^{-d u} du`. `panels = 0` selects [`DEFAULT_PANELS`].
pub fn dini_large_log<F: Fn(f64) -> f64>(f: F, d: f64, ln_r: f64, panels: usize, breakpoints: &[f64]) -> f64 {
    let rule = GaussLegendre::new(GAUSS_ORDER);
    let mut cuts: Vec<f64> = vec![0.0];
    let mut extra: Vec<f64> = breakpoints.iter().map(|b| b - ln_r).filter(|&s| s > 0.0).collect();
    extra.sort_by(f64::total_cmp);
    cuts.extend(extra);
    let last = *cuts.last().unwrap_or(&0.0);
    let panels = if panels == 0 { DEFAULT_PANELS } else { panels };
    let finite_panels = (panels / 8).max(4);
    let mut parts = Vec::new();
    for w in cuts.windows(2) {
        parts.push(crate::numeric::composite_gauss(&rule, w[0], w[1], finite_panels, |s| f(ln_r + s) * (-d * s).exp()));
    }
    // Tail: s = last + w/(1-w).
    parts.push(crate::numeric::composite_gauss(&rule, 0.0, 1.0, panels, |w| {
        if w >= 1.0 {
            return 0.0;
        }
        let s = last + w / (1.0 - w);
        let jac = 1.0 / ((1.0 - w) * (1.0 - w));
        let e = (-d * s).exp();
        if e == 0.0 {
            0.0
        } else {
            f(ln_r + s) * e * jac
        }
    }));
    pairwise_sum(&parts)
}

fn tabulated_small(t: &[f64], theta: &[f64], ln_r: f64) -> f64 {
    // theta[0] == 0 here, so the range below the table contributes nothing.
    let u: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let mut parts = Vec::new();
    for k in 1..u.len() {
        let (a, b) = (u[k - 1], u[k]);
        if ln_r <= a {
            break;
        }
        let hi = b.min(ln_r);
        let th_hi = theta[k - 1] + (theta[k] - theta[k - 1]) * (hi - a) / (b - a);
        parts.push(0.5 * (theta[k - 1] + th_hi) * (hi - a));
    }
    let u_last = *u.last().unwrap();
    if ln_r > u_last {
        parts.push(theta[theta.len() - 1] * (ln_r - u_last));
    }
    pairwise_sum(&parts)
}

/// `∫_a^b (p + q (u - a)) e^{-d (u - u_ref)} du` in closed form.
fn linear_exp_integral(p: f64, q: f64, a: f64, b: f64, d: f64, u_ref: f64) -> f64 {
    let antideriv = |u: f64| {
        let x = u - a;
        -(-d * (u - u_ref)).exp() * ((p + q * x) / d + q / (d * d))
    };
    antideriv(b) - antideriv(a)
}

fn tabulated_large(t: &[f64], theta: &[f64], d: f64, ln_r: f64) -> f64 {
    let u: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let n = u.len();
    let mut parts = Vec::new();
    if ln_r < u[0] {
        parts.push(theta[0] * (1.0 - (-d * (u[0] - ln_r)).exp()) / d);
    }
    for k in 1..n {
        let (a, b) = (u[k - 1], u[k]);
        if b <= ln_r {
            continue;
        }
        let lo = a.max(ln_r);
        let slope = (theta[k] - theta[k - 1]) / (b - a);
        let p = theta[k - 1] + slope * (lo - a);
        parts.push(linear_exp_integral(p, slope, lo, b, d, ln_r));
    }
    let start = u[n - 1].max(ln_r);
    parts.push(theta[n - 1] * (-d * (start - ln_r)).exp() / d);
    pairwise_sum(&parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(OscillationModulus::power(0.5).eval(4.0).unwrap(), 2.0);
        assert_eq!(OscillationModulus::constant(0.0).eval(123.0).unwrap(), 0.0);
        let v = OscillationModulus::log_power(0.25).eval((-4.0f64).exp()).unwrap();
        assert!(close(v, 4f64.powf(-2.25), 1e-14));
        assert!(matches!(OscillationModulus::power(0.5).eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(OscillationModulus::power(0.5).eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn dini_of_tau_matches_power_closed_form() {
        // τ = r^α/α + r^α/(2-α), so J_τ(r) = r^α/α² + r^α/(α(2-α)).
        for alpha in [0.25, 0.5, 1.0] {
            let m = OscillationModulus::power(alpha);
            for r in [1e-3f64, 0.1, 1.0] {
                let exact = r.powf(alpha) * (1.0 / (alpha * alpha) + 1.0 / (alpha * (2.0 - alpha)));
                assert!(close(m.dini_small_of_tau(r, DEFAULT_PANELS).unwrap(), exact, 1e-8));
            }
        }
        let m = OscillationModulus::log_power(0.25);
        let a = m.dini_small_of_tau(0.5, 0).unwrap();
        let b = m.dini_small_of_tau(0.03125, 0).unwrap();
        assert!(a.is_finite() && b < a);
    }

    #[test]
    fn large_of_small_satisfies_fubini() {
        // d L_d(J) = J + L_d.
        for m in
            [OscillationModulus::power(0.5), OscillationModulus::log_power(0.25), OscillationModulus::log_power(1.0)]
        {
            for d in [1.0, 2.0] {
                for r in [1e-6, 0.01, 0.3, 2.0] {
                    let lhs = d * m.dini_large_of_small(d, r, 0).unwrap();
                    let rhs = m.dini_small(r, 0).unwrap() + m.dini_large(d, r, 0).unwrap();
                    assert!(close(lhs, rhs, 1e-8), "{m:?} d={d} r={r}: {lhs} vs {rhs}");
                }
            }
        }
        assert!(OscillationModulus::power(1.0).dini_large_of_small(1.0, 0.5, 0).is_err());
    }

    #[test]
    fn log_power_is_capped_above_inverse_e() {
        let m = OscillationModulus::log_power(0.25);
        assert_eq!(m.eval(0.5).unwrap(), 1.0);
        assert_eq!(m.eval(10.0).unwrap(), 1.0);
        assert!(close(m.eval((-1.0f64).exp()).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn tabulated_interpolates_in_log_and_clamps() {
        let m = OscillationModulus::tabulated(vec![0.1, 1.0], vec![0.0, 2.0], 4.0).unwrap();
        assert_eq!(m.eval(0.01).unwrap(), 0.0);
        assert_eq!(m.eval(5.0).unwrap(), 2.0);
        assert!(close(m.eval(10f64.powf(-0.5)).unwrap(), 1.0, 1e-14));
        assert!(OscillationModulus::tabulated(vec![1.0, 0.5], vec![0.0, 1.0], 2.0).is_err());
        assert!(OscillationModulus::tabulated(vec![0.5, 1.0], vec![0.0, -1.0], 2.0).is_err());
    }

    #[test]
    fn dini_small_examples() {
        let p = OscillationModulus::power(0.5);
        assert_eq!(p.dini_small(1.0, DEFAULT_PANELS).unwrap(), 2.0);
        for alpha in [0.1, 0.5, 1.0, 1.7] {
            let m = OscillationModulus::power(alpha);
            let r = 0.37f64;
            assert!(close(m.dini_small(r, 0).unwrap(), r.powf(alpha) / alpha, 1e-15));
        }
        let c = OscillationModulus::constant(0.3);
        assert!(matches!(c.dini_small(1.0, 10), Err(Error::NotDs(_))));
        assert_eq!(OscillationModulus::constant(0.0).dini_small(1.0, 10).unwrap(), 0.0);
    }

    #[test]
    fn dini_large_examples() {
        let p = OscillationModulus::power(0.5);
        assert!(close(p.dini_large(2.0, 1.0, 0).unwrap(), 2.0 / 3.0, 1e-15));
        assert!(close(p.dini_large(1.0, 1.0, 0).unwrap(), 2.0, 1e-15));
        assert!(matches!(OscillationModulus::power(1.0).dini_large(1.0, 1.0, 0), Err(Error::NotDl { .. })));
    }

    #[test]
    fn tau_examples() {
        let p = OscillationModulus::power(0.5);
        let (tau, tau_hat) = p.tau_budgets(1.0, 1.0, 0).unwrap();
        assert!(close(tau, 8.0 / 3.0, 1e-15));
        assert!(close(tau_hat, 4.0, 1e-15));
        assert_eq!(OscillationModulus::constant(0.0).tau_budgets(0.3, 2.0, 0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn doubling_examples() {
        let grid: Vec<f64> = (-20..=5).map(|k| 2f64.powi(k)).collect();
        let r = OscillationModulus::power(1.0).check_doubling(2.0, &grid);
        assert!(r.holds);
        assert!(close(r.worst_ratio, 2.0, 1e-15));
        assert!(OscillationModulus::power(0.5).check_doubling(2f64.sqrt(), &grid).holds);
        assert!(!OscillationModulus::power(1.0).check_doubling(1.5, &grid).holds);
        let zero = OscillationModulus::constant(0.0).check_doubling(1.0, &grid);
        assert!(zero.holds);
        assert_eq!(zero.worst_ratio, 1.0);
    }

    #[test]
    fn analytic_kappa_is_attained_on_fine_grids() {
        let grid = doubling_grid(1e-6, 10.0, 64);
        for m in [OscillationModulus::power(0.7), OscillationModulus::log_power(0.25)] {
            let rep = m.check_doubling(m.kappa(), &grid);
            assert!(rep.holds, "{m:?}: {rep:?}");
            assert!(rep.worst_ratio > 0.97 * m.kappa(), "{m:?}: {rep:?}");
        }
    }

    #[test]
    fn tabulated_small_and_large_are_exact_for_piecewise_data() {
        // theta = 0 below t = 1e-2, linear in log up to 1 at t = 1, constant beyond.
        let m = OscillationModulus::tabulated(vec![1e-2, 1.0], vec![0.0, 1.0], 8.0).unwrap();
        let width = (1e2f64).ln();
        // J(1) = area of the triangle in u.
        assert!(close(m.dini_small(1.0, 0).unwrap(), 0.5 * width, 1e-14));
        assert!(close(m.dini_small(std::f64::consts::E, 0).unwrap(), 0.5 * width + 1.0, 1e-14));
        // L_d(1) = 1/d.
        assert!(close(m.dini_large(2.0, 1.0, 0).unwrap(), 0.5, 1e-14));
        // Quadrature route agrees with the exact route.
        for r in [0.02, 0.1, 0.5, 3.0] {
            let a = m.dini_large(2.0, r, 0).unwrap();
            let b = m.dini_large_quadrature(2.0, r, DEFAULT_PANELS).unwrap();
            assert!(close(a, b, 1e-10), "r = {r}: {a} vs {b}");
            let a = m.dini_small(r, 0).unwrap();
            let b = m.dini_small_quadrature(r, DEFAULT_PANELS).unwrap();
            assert!(close(a, b, 1e-10), "r = {r}: {a} vs {b}");
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn json_shape() {
        let m: OscillationModulus = serde_json::from_str(r#"{"family":"power","alpha":0.5,"kappa":1.4142}"#).unwrap();
        assert_eq!(m, OscillationModulus::Power { alpha: 0.5, scale: 1.0, kappa: Some(1.4142) });
        let t: OscillationModulus =
            serde_json::from_str(r#"{"family":"tabulated","t":[0.1,1.0],"theta":[0.0,1.0],"kappa":3.0}"#).unwrap();
        assert!(t.validate().is_ok());
        let back = serde_json::to_string(&OscillationModulus::log_power(0.25)).unwrap();
        assert_eq!(back, r#"{"family":"log_power","gamma":0.25,"scale":1.0}"#);
    }
}
