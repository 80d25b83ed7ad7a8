//! Small numerical building blocks shared by the modules: deterministic
//! pairwise summation, Gauss–Legendre rules and a scrambled Halton sequence.

use std::ops::Add;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Point;

const PAIRWISE_BLOCK: usize = 8;

/// Sums `f(0) + … + f(len-1)` with a fixed pairwise tree.
///
/// The tree depends only on `len`, so any two callers producing the same
/// terms get bit-identical results.
pub fn pairwise_sum_with<T, F>(len: usize, zero: T, f: &F) -> T
where
    T: Copy + Add<Output = T>,
    F: Fn(usize) -> T,
{
    fn rec<T, F>(lo: usize, hi: usize, zero: T, f: &F) -> T
    where
        T: Copy + Add<Output = T>,
        F: Fn(usize) -> T,
    {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut acc = zero;
            for i in lo..hi {
                acc = acc + f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, zero, f) + rec(mid, hi, zero, f)
        }
    }
    rec(0, len, zero, f)
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_with(values.len(), 0.0, &|i| values[i])
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss–Legendre order must be at least 1");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Maps the rule onto `[a, b]`, returning `(node, weight)` pairs.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre quadrature of `f` over `[a, b]` with `panels`
/// equal panels of the given rule.
pub fn composite_gauss<F: Fn(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, panels: usize, f: F) -> f64 {
    let h = (b - a) / panels as f64;
    let panel_sums: Vec<f64> = (0..panels)
        .map(|p| {
            let lo = a + h * p as f64;
            let hi = if p + 1 == panels { b } else { lo + h };
            rule.on_interval(lo, hi).map(|(x, w)| w * f(x)).sum()
        })
        .collect();
    pairwise_sum(&panel_sums)
}

const HALTON_BASES: [u64; 3] = [2, 3, 5];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    value
}

/// Halton points in the unit cube with a Cranley–Patterson rotation drawn
/// from `seed`. Deterministic given `(count, seed)`.
pub fn halton_cube(count: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    (0..count)
        .map(|i| {
            let mut u = [0.0; 3];
            for (d, base) in HALTON_BASES.iter().enumerate() {
                let v = radical_inverse(i as u64 + 1, *base) + shift[d];
                u[d] = v - v.floor();
            }
            u
        })
        .collect()
}

/// Low-discrepancy samples of the unit ball (uniform with respect to volume).
pub fn halton_ball(count: usize, seed: u64) -> Vec<Point> {
    halton_cube(count, seed)
        .into_iter()
        .map(|[u0, u1, u2]| {
            let rho = u0.cbrt();
            let cos_t = 2.0 * u1 - 1.0;
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * u2;
            Point::new(rho * sin_t * phi.cos(), rho * sin_t * phi.sin(), rho * cos_t)
        })
        .collect()
}

/// Minimum pairwise distance of a point cloud; `f64::INFINITY` for fewer than two points.
pub fn min_spacing(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return f64::INFINITY;
    }
    // Sweep along the first coordinate.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
    let mut best = f64::INFINITY;
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j].x - points[i].x >= best {
                break;
            }
            let d = (points[i] - points[j]).norm();
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Geometric grid of `count` points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| if i + 1 == count { hi } else { lo * (ratio * i as f64).exp() }).collect()
}
