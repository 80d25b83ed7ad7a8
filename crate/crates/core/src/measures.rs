//! Discrete measures in ℝ³ with 2-dimensional growth: generators for flat,
//! curved and self-similar supports, growth and density statistics, the
//! mollified measure `ν_ε` and restriction to balls and cubes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{min_spacing, pairwise_sum, GaussLegendre};
use crate::{Error, Point, Result};

/// Closed ball `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn dilate(&self, lambda: f64) -> Self {
        Self { center: self.center, radius: lambda * self.radius }
    }

    pub fn contains(&self, p: &Point) -> bool {
        (p - self.center).norm_squared() <= self.radius * self.radius
    }
}

/// Closed axis-parallel cube with center `center` and side `side`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Point,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Point, side: f64) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::Domain(format!("cube side must be positive, got {side}")));
        }
        Ok(Self { center, side })
    }

    /// Cube with lower corner `corner`.
    pub fn from_corner(corner: Point, side: f64) -> Result<Self> {
        Self::new(corner + Point::repeat(side / 2.0), side)
    }

    pub fn dilate(&self, lambda: f64) -> Self {
        Self { center: self.center, side: lambda * self.side }
    }

    pub fn contains(&self, p: &Point) -> bool {
        let h = self.side / 2.0;
        (0..3).all(|i| (p[i] - self.center[i]).abs() <= h)
    }

    /// Diameter `√3 ℓ(Q)`.
    pub fn diameter(&self) -> f64 {
        3f64.sqrt() * self.side
    }
}

/// Region for [`DiscreteMeasure::restrict`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Ball(Ball),
    Cube(Cube),
}

impl Region {
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Region::Ball(b) => b.contains(p),
            Region::Cube(q) => q.contains(p),
        }
    }
}

impl From<Ball> for Region {
    fn from(b: Ball) -> Self {
        Region::Ball(b)
    }
}

impl From<Cube> for Region {
    fn from(q: Cube) -> Self {
        Region::Cube(q)
    }
}

/// Similarity `x ↦ p + ρ (x - p)` with fixed point `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub ratio: f64,
    pub fixed_point: [f64; 3],
}

impl Similarity {
    #[inline]
    pub fn apply(&self, x: &Point) -> Point {
        let p = Point::from(self.fixed_point);
        p + (x - p) * self.ratio
    }
}

/// Iterated function system of similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsSpec {
    pub name: String,
    pub maps: Vec<Similarity>,
}

impl IfsSpec {
    /// Four maps of ratio 1/2 towards the vertices of a regular tetrahedron
    /// inscribed in the unit cube.
    pub fn tetrix() -> Self {
        let fixed = [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        Self { name: "tetrix".into(), maps: fixed.iter().map(|&p| Similarity { ratio: 0.5, fixed_point: p }).collect() }
    }

    /// Sixteen maps of ratio 1/4 onto the cells `(i, j, k)` of the 4×4×4
    /// grid with `i + j + k ≡ 0 (mod 4)`.
    pub fn garnett3d() -> Self {
        let rho = 0.25;
        let mut maps = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                let k = (8 - i - j) % 4;
                let t = Point::new(i as f64, j as f64, k as f64) * rho;
                let p = t / (1.0 - rho);
                maps.push(Similarity { ratio: rho, fixed_point: [p.x, p.y, p.z] });
            }
        }
        Self { name: "garnett3d".into(), maps }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "tetrix" => Ok(Self::tetrix()),
            "garnett3d" | "garnett" => Ok(Self::garnett3d()),
            other => Err(Error::Invalid(format!("unknown ifs preset '{other}'"))),
        }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// `log k / log(1/ρ)` for equal ratios; `None` otherwise.
    pub fn similarity_dimension(&self) -> Option<f64> {
        let rho = self.maps.first()?.ratio;
        if self.maps.iter().any(|m| m.ratio != rho) {
            return None;
        }
        Some((self.maps.len() as f64).ln() / (1.0 / rho).ln())
    }

    /// Images of the unit cube must have pairwise disjoint interiors.
    pub fn check_open_set(&self) -> Result<()> {
        if self.maps.is_empty() {
            return Err(Error::Invalid("ifs has no maps".into()));
        }
        for (i, m) in self.maps.iter().enumerate() {
            if !(m.ratio > 0.0 && m.ratio < 1.0) {
                return Err(Error::Invalid(format!("map {i} has ratio {} outside (0, 1)", m.ratio)));
            }
        }
        let boxes: Vec<(Point, f64)> = self.maps.iter().map(|m| (m.apply(&Point::zeros()), m.ratio)).collect();
        let tol = 1e-12;
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let (a, ra) = boxes[i];
                let (b, rb) = boxes[j];
                let overlap = (0..3).all(|d| a[d].max(b[d]) + tol < (a[d] + ra).min(b[d] + rb));
                if overlap {
                    return Err(Error::OverlappingIfs(i, j));
                }
            }
        }
        Ok(())
    }
}

/// Generator families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MeasureFamily {
    /// `n × n` cell-centred grid on `[0,1]² × {0}`, weight `1/n²`.
    PlanePatch { n: usize },
    /// Fibonacci lattice of `n` points on the unit sphere, weight `4π/n`.
    Sphere { n: usize },
    /// Graph of `amp·sin(freq x₁)·sin(freq x₂)` over an `n × n` grid, area-element weights.
    LipschitzGraph { amp: f64, freq: f64, n: usize },
    /// All `k^level` images of the seed point, weight `k^{-level}`.
    Ifs { ifs: IfsSpec, level: u32 },
    /// IFS where odd generations route a fraction `skew` of the mass to the first child.
    Lacunary {
        ifs: IfsSpec,
        level: u32,
        #[serde(default = "default_skew")]
        skew: f64,
    },
}

fn default_skew() -> f64 {
    1.0
}

impl MeasureFamily {
    pub fn name(&self) -> String {
        match self {
            Self::PlanePatch { .. } => "plane_patch".into(),
            Self::Sphere { .. } => "sphere".into(),
            Self::LipschitzGraph { .. } => "lipschitz_graph".into(),
            Self::Ifs { ifs, .. } => ifs.name.clone(),
            Self::Lacunary { ifs, .. } => format!("lacunary_{}", ifs.name),
        }
    }

    pub fn tetrix(level: u32) -> Self {
        Self::Ifs { ifs: IfsSpec::tetrix(), level }
    }

    pub fn garnett3d(level: u32) -> Self {
        Self::Ifs { ifs: IfsSpec::garnett3d(), level }
    }

    pub fn lacunary_tetrix(level: u32) -> Self {
        Self::Lacunary { ifs: IfsSpec::tetrix(), level, skew: 1.0 }
    }
}

/// Provenance stored with a measure.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureMeta {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_spacing: Option<f64>,
}

/// Finite sum of weighted atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub meta: MeasureMeta,
}

/// Mass of `B(x, r)` over a grid of radii, maximised over centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub r: f64,
    pub max_ratio: f64,
    pub argmax: Point,
    /// Radius below twice the minimum inter-atom spacing.
    pub atomic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub exponent: f64,
    /// Lower bound for the growth constant over all sampled radii.
    pub c0_hat: f64,
    /// Same maximum restricted to radii above the atomic scale.
    pub c0_hat_continuum: Option<f64>,
    pub atomic_scale: f64,
    pub per_radius: Vec<GrowthRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub x: Point,
    pub r: Vec<f64>,
    /// `μ(B(x,r)) / (2r)²`.
    pub theta_vals: Vec<f64>,
    pub atomic_scale: f64,
    pub upper_hat: Option<f64>,
    pub lower_hat: Option<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>, meta: MeasureMeta) -> Result<Self> {
        let m = Self { points, weights, meta };
        m.validate()?;
        Ok(m)
    }

    /// Atoms with positive finite weights at pairwise distinct points.
    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.weights.len() {
            return Err(Error::Invalid(format!("{} points but {} weights", self.points.len(), self.weights.len())));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Invalid(format!("weights must be positive and finite, found {w}")));
        }
        if self.points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Invalid("non-finite coordinate".into()));
        }
        if min_spacing(&self.points) <= 0.0 {
            return Err(Error::Invalid("points are not pairwise distinct".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `‖μ‖`.
    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    pub fn min_spacing(&self) -> f64 {
        min_spacing(&self.points)
    }

    /// Twice the minimum spacing: statistics below this radius see single atoms.
    pub fn atomic_scale(&self) -> f64 {
        2.0 * self.min_spacing()
    }

    /// Builds a measure from a generator family. `seed` is recorded in the metadata.
    pub fn generate(family: &MeasureFamily, seed: u64) -> Result<Self> {
        let mut m = match family {
            MeasureFamily::PlanePatch { n } => plane_patch(*n)?,
            MeasureFamily::Sphere { n } => sphere(*n)?,
            MeasureFamily::LipschitzGraph { amp, freq, n } => lipschitz_graph(*amp, *freq, *n)?,
            MeasureFamily::Ifs { ifs, level } => ifs_measure(ifs, *level)?,
            MeasureFamily::Lacunary { ifs, level, skew } => lacunary(ifs, *level, *skew)?,
        };
        m.meta.family = family.name();
        m.meta.seed = seed;
        let s = m.min_spacing();
        m.meta.min_spacing = s.is_finite().then_some(s);
        Ok(m)
    }

    /// `μ(B(x, r))` for each radius; nondecreasing in `r`.
    pub fn ball_masses(&self, x: &Point, r_grid: &[f64]) -> Vec<f64> {
        let r_max = r_grid.iter().cloned().fold(0.0, f64::max);
        let mut near: Vec<(f64, f64)> = self
            .points
            .iter()
            .zip(&self.weights)
            .filter_map(|(p, &w)| {
                let d = (p - x).norm();
                (d <= r_max).then_some((d, w))
            })
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prefix = Vec::with_capacity(near.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &(_, w) in &near {
            acc += w;
            prefix.push(acc);
        }
        r_grid
            .iter()
            .map(|&r| {
                let k = near.partition_point(|&(d, _)| d <= r);
                prefix[k]
            })
            .collect()
    }

    fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// Empirical growth constant `max μ(B(x,r))/r^exponent` over all atoms and
    /// `ball_samples` uniform centres in the bounding box. This is a lower
    /// bound for the true constant.
    pub fn growth_report(&self, exponent: f64, ball_samples: usize, r_grid: &[f64], seed: u64) -> GrowthReport {
        let atomic_scale = self.atomic_scale();
        let mut centers = self.points.clone();
        if !self.points.is_empty() && ball_samples > 0 {
            let (lo, hi) = self.bounding_box();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..ball_samples {
                let u = Point::new(rng.gen(), rng.gen(), rng.gen());
                centers.push(lo + (hi - lo).component_mul(&u));
            }
        }
        let per_center: Vec<Vec<f64>> = centers.par_iter().map(|x| self.ball_masses(x, r_grid)).collect();
        let per_radius: Vec<GrowthRow> = r_grid
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let mut best = (0.0, Point::zeros());
                for (c, masses) in centers.iter().zip(&per_center) {
                    let v = masses[k] / r.powf(exponent);
                    if v > best.0 {
                        best = (v, *c);
                    }
                }
                GrowthRow { r, max_ratio: best.0, argmax: best.1, atomic: r < atomic_scale }
            })
            .collect();
        let c0_hat = per_radius.iter().map(|g| g.max_ratio).fold(0.0, f64::max);
        let cont: Vec<f64> = per_radius.iter().filter(|g| !g.atomic).map(|g| g.max_ratio).collect();
        GrowthReport {
            exponent,
            c0_hat,
            c0_hat_continuum: (!cont.is_empty()).then(|| cont.iter().cloned().fold(0.0, f64::max)),
            atomic_scale,
            per_radius,
        }
    }

    /// `μ(B(x,r))/(2r)²` on a radius grid, with extremes over radii above
    /// the atomic scale.
    pub fn density_profile(&self, x: &Point, r_grid: &[f64]) -> DensityProfile {
        let atomic_scale = self.atomic_scale();
        let masses = self.ball_masses(x, r_grid);
        let theta_vals: Vec<f64> = masses.iter().zip(r_grid).map(|(m, r)| m / (4.0 * r * r)).collect();
        let safe: Vec<f64> =
            theta_vals.iter().zip(r_grid).filter(|(_, &r)| r >= atomic_scale).map(|(v, _)| *v).collect();
        DensityProfile {
            x: *x,
            r: r_grid.to_vec(),
            theta_vals,
            atomic_scale,
            upper_hat: safe.iter().cloned().reduce(f64::max),
            lower_hat: safe.iter().cloned().reduce(f64::min),
        }
    }

    /// Atoms inside the closed region, weights unchanged. May be empty.
    pub fn restrict(&self, region: impl Into<Region>) -> DiscreteMeasure {
        let region = region.into();
        let (points, weights) =
            self.points.iter().zip(&self.weights).filter(|(p, _)| region.contains(p)).map(|(p, w)| (*p, *w)).unzip();
        DiscreteMeasure { points, weights, meta: self.meta.clone() }
    }

    /// Replaces each atom by a product quadrature of `w φ_ε(· - p)`, with the
    /// node weights of each atom renormalised to sum to `w`.
    pub fn mollify(&self, eps: f64, quad_order: usize) -> Result<DiscreteMeasure> {
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("mollification scale must be positive, got {eps}")));
        }
        if quad_order == 0 {
            return Err(Error::Domain("quadrature order must be at least 1".into()));
        }
        let unit = bump_quadrature(quad_order);
        let total: f64 = pairwise_sum(&unit.iter().map(|(_, w)| *w).collect::<Vec<_>>());
        let mut points = Vec::with_capacity(self.len() * unit.len());
        let mut weights = Vec::with_capacity(self.len() * unit.len());
        for (p, &w) in self.points.iter().zip(&self.weights) {
            for (z, uw) in &unit {
                points.push(p + z * eps);
                weights.push(w * uw / total);
            }
        }
        let mut meta = self.meta.clone();
        meta.family = format!("{}_mollified", self.meta.family);
        meta.min_spacing = None;
        Ok(DiscreteMeasure { points, weights, meta })
    }

    /// `∫ g dμ`.
    pub fn integrate<G: Fn(&Point) -> f64 + Sync>(&self, g: G) -> f64 {
        let vals: Vec<f64> = self.points.iter().zip(&self.weights).map(|(p, w)| w * g(p)).collect();
        pairwise_sum(&vals)
    }
}

fn plane_patch(n: usize) -> Result<DiscreteMeasure> {
    if n < 2 {
        return Err(Error::Domain(format!("plane_patch needs N >= 2, got {n}")));
    }
    let h = 1.0 / n as f64;
    let w = h * h;
    let mut points = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            points.push(Point::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, 0.0));
        }
    }
    let meta = MeasureMeta { resolution: Some(n), ..Default::default() };
    Ok(DiscreteMeasure { weights: vec![w; points.len()], points, meta })
}

fn sphere(n: usize) -> Result<DiscreteMeasure> {
    if n < 2 {
        return Err(Error::Domain(format!("sphere needs N >= 2, got {n}")));
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let points = (0..n)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Point::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect();
    let meta = MeasureMeta { resolution: Some(n), ..Default::default() };
    Ok(DiscreteMeasure { points, weights: vec![4.0 * std::f64::consts::PI / n as f64; n], meta })
}

fn lipschitz_graph(amp: f64, freq: f64, n: usize) -> Result<DiscreteMeasure> {
    if n < 2 {
        return Err(Error::Domain(format!("lipschitz_graph needs N >= 2, got {n}")));
    }
    if !amp.is_finite() || !freq.is_finite() {
        return Err(Error::Domain("lipschitz_graph parameters must be finite".into()));
    }
    let h = 1.0 / n as f64;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let z = amp * (freq * x).sin() * (freq * y).sin();
            let gx = amp * freq * (freq * x).cos() * (freq * y).sin();
            let gy = amp * freq * (freq * x).sin() * (freq * y).cos();
            points.push(Point::new(x, y, z));
            weights.push((1.0 + gx * gx + gy * gy).sqrt() * h * h);
        }
    }
    let meta = MeasureMeta { resolution: Some(n), ..Default::default() };
    Ok(DiscreteMeasure { points, weights, meta })
}

const IFS_SEED_POINT: [f64; 3] = [0.5, 0.5, 0.5];

/// Level-`L` points built as `P_{L} = ⋃_f f(P_{L-1})`, the new map outermost.
fn ifs_measure(ifs: &IfsSpec, level: u32) -> Result<DiscreteMeasure> {
    if level < 1 {
        return Err(Error::Domain("ifs level must be at least 1".into()));
    }
    ifs.check_open_set()?;
    let k = ifs.len();
    let mut pts = vec![Point::from(IFS_SEED_POINT)];
    for _ in 0..level {
        pts = ifs.maps.iter().flat_map(|m| pts.iter().map(move |p| m.apply(p))).collect();
    }
    let w = (k as f64).powi(-(level as i32));
    let meta = MeasureMeta { level: Some(level), ..Default::default() };
    Ok(DiscreteMeasure { weights: vec![w; pts.len()], points: pts, meta })
}

/// Words `i₁…i_L` (coarsest first). Odd generations give mass `skew` to
/// map 0 and `(1 - skew)/(k - 1)` to each other map; zero-mass branches are
/// dropped. Even generations split mass uniformly.
fn lacunary(ifs: &IfsSpec, level: u32, skew: f64) -> Result<DiscreteMeasure> {
    if level < 1 {
        return Err(Error::Domain("lacunary level must be at least 1".into()));
    }
    if !(skew > 0.0 && skew <= 1.0) {
        return Err(Error::Domain(format!("skew must lie in (0, 1], got {skew}")));
    }
    ifs.check_open_set()?;
    let k = ifs.len();
    let child_mass = |generation: u32, i: usize| -> f64 {
        if generation % 2 == 1 {
            if i == 0 {
                skew
            } else if k > 1 {
                (1.0 - skew) / (k - 1) as f64
            } else {
                0.0
            }
        } else {
            1.0 / k as f64
        }
    };
    // Build from the finest generation outwards so each step applies the outermost map.
    let mut atoms = vec![(Point::from(IFS_SEED_POINT), 1.0f64)];
    for generation in (1..=level).rev() {
        let mut next = Vec::with_capacity(atoms.len() * k);
        for (i, m) in ifs.maps.iter().enumerate() {
            let c = child_mass(generation, i);
            if c == 0.0 {
                continue;
            }
            next.extend(atoms.iter().map(|(p, w)| (m.apply(p), w * c)));
        }
        atoms = next;
    }
    let (points, weights) = atoms.into_iter().unzip();
    let meta = MeasureMeta { level: Some(level), ..Default::default() };
    Ok(DiscreteMeasure { points, weights, meta })
}

/// Normalising constant of `φ(z) = c (1 - |z|²)²` on the unit ball.
pub const BUMP_NORMALIZATION: f64 = 105.0 / (32.0 * std::f64::consts::PI);

/// Radial bump `φ`, supported in `B(0,1)`, `0 ≤ φ ≤ 2`, `∫φ = 1`.
#[inline]
pub fn bump(z: &Point) -> f64 {
    let s = z.norm_squared();
    if s >= 1.0 {
        0.0
    } else {
        BUMP_NORMALIZATION * (1.0 - s) * (1.0 - s)
    }
}

/// Product rule on the unit ball: Gauss in radius and in `cos θ`, uniform in
/// azimuth, `order³` nodes weighted by `φ`.
fn bump_quadrature(order: usize) -> Vec<(Point, f64)> {
    let ball = ball_rule(order);
    ball.into_iter().map(|(z, w)| (z, w * bump(&z))).collect()
}

/// Volume quadrature on the unit ball with `order³` nodes.
pub fn ball_rule(order: usize) -> Vec<(Point, f64)> {
    let gl = GaussLegendre::new(order);
    let radial: Vec<(f64, f64)> = gl.on_interval(0.0, 1.0).collect();
    let polar: Vec<(f64, f64)> = gl.on_interval(-1.0, 1.0).collect();
    let dphi = 2.0 * std::f64::consts::PI / order as f64;
    let mut out = Vec::with_capacity(order * order * order);
    for &(r, wr) in &radial {
        for &(ct, wt) in &polar {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for a in 0..order {
                let phi = (a as f64 + 0.5) * dphi;
                let z = Point::new(r * st * phi.cos(), r * st * phi.sin(), r * ct);
                out.push((z, wr * r * r * wt * dphi));
            }
        }
    }
    out
}

/// The absolutely continuous measure `ν_ε = φ_ε * ν`.
#[derive(Debug, Clone)]
pub struct MollifiedMeasure<'a> {
    pub source: &'a DiscreteMeasure,
    pub eps: f64,
}

impl<'a> MollifiedMeasure<'a> {
    pub fn new(source: &'a DiscreteMeasure, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("mollification scale must be positive, got {eps}")));
        }
        Ok(Self { source, eps })
    }

    /// Density of `ν_ε` at `y`.
    pub fn density(&self, y: &Point) -> f64 {
        let e3 = self.eps.powi(3);
        let terms: Vec<f64> = self
            .source
            .points
            .iter()
            .zip(&self.source.weights)
            .filter(|(p, _)| (y - *p).norm_squared() < self.eps * self.eps)
            .map(|(p, w)| w * bump(&((y - p) / self.eps)) / e3)
            .collect();
        pairwise_sum(&terms)
    }

    /// `ν_ε(B(x, s))` by a product ball rule of the given order applied to
    /// each atom's contribution.
    pub fn ball_mass(&self, x: &Point, s: f64, order: usize) -> f64 {
        let rule = ball_rule(order);
        let e3 = self.eps.powi(3);
        let reach = s + self.eps;
        let terms: Vec<f64> = self
            .source
            .points
            .iter()
            .zip(&self.source.weights)
            .filter(|(p, _)| (x - *p).norm() < reach)
            .map(|(p, w)| {
                let q: Vec<f64> = rule.iter().map(|(z, wz)| wz * bump(&((x + z * s - p) / self.eps))).collect();
                w * pairwise_sum(&q) * s.powi(3) / e3
            })
            .collect();
        pairwise_sum(&terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::geometric_grid;
    use proptest::prelude::*;
    use std::collections::HashSet;
    use std::f64::consts::PI;

    fn key(p: &Point) -> [u64; 3] {
        [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
    }

    #[test]
    fn generator_examples() {
        let t = DiscreteMeasure::generate(&MeasureFamily::tetrix(3), 0).unwrap();
        assert_eq!(t.len(), 64);
        assert!(t.weights.iter().all(|&w| w == 1.0 / 64.0));
        assert_eq!(t.total_mass(), 1.0);
        let p = DiscreteMeasure::generate(&MeasureFamily::PlanePatch { n: 32 }, 0).unwrap();
        assert_eq!(p.len(), 1024);
        assert!((p.total_mass() - 1.0).abs() < 1e-15);
        let l = DiscreteMeasure::generate(&MeasureFamily::lacunary_tetrix(4), 0).unwrap();
        assert_eq!(l.len(), 16);
        assert!((l.total_mass() - 1.0).abs() < 1e-15);
        let s = DiscreteMeasure::generate(&MeasureFamily::Sphere { n: 500 }, 0).unwrap();
        assert!(s.points.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
        assert!((s.total_mass() - 4.0 * PI).abs() < 1e-12);
        let g = DiscreteMeasure::generate(&MeasureFamily::garnett3d(2), 0).unwrap();
        assert_eq!(g.len(), 256);
        assert!(DiscreteMeasure::generate(&MeasureFamily::PlanePatch { n: 1 }, 0).is_err());
        assert!(DiscreteMeasure::generate(&MeasureFamily::tetrix(0), 0).is_err());
    }

    #[test]
    fn lipschitz_graph_weights_are_area_elements() {
        let flat = DiscreteMeasure::generate(&MeasureFamily::LipschitzGraph { amp: 0.0, freq: 3.0, n: 16 }, 0).unwrap();
        assert!((flat.total_mass() - 1.0).abs() < 1e-14);
        let bumpy =
            DiscreteMeasure::generate(&MeasureFamily::LipschitzGraph { amp: 0.1, freq: 6.0, n: 64 }, 0).unwrap();
        assert!(bumpy.total_mass() > 1.0);
    }

    #[test]
    fn presets_have_dimension_two_and_open_set_condition() {
        for ifs in [IfsSpec::tetrix(), IfsSpec::garnett3d()] {
            assert!((ifs.similarity_dimension().unwrap() - 2.0).abs() < 1e-15);
            ifs.check_open_set().unwrap();
        }
        let mut bad = IfsSpec::tetrix();
        bad.maps[1] = bad.maps[0];
        assert_eq!(bad.check_open_set(), Err(Error::OverlappingIfs(0, 1)));
        assert!(DiscreteMeasure::generate(&MeasureFamily::Ifs { ifs: bad, level: 2 }, 0).is_err());
    }

    #[test]
    fn garnett_cells_are_the_alternating_ones() {
        let ifs = IfsSpec::garnett3d();
        for m in &ifs.maps {
            let c = m.apply(&Point::zeros()) * 4.0;
            let s = c.x.round() + c.y.round() + c.z.round();
            assert_eq!(s as i64 % 4, 0);
            assert!((c - c.map(f64::round)).norm() < 1e-12);
        }
    }

    #[test]
    fn ifs_self_similarity_is_exact() {
        for ifs in [IfsSpec::tetrix(), IfsSpec::garnett3d()] {
            for level in 1..3 {
                let a = DiscreteMeasure::generate(&MeasureFamily::Ifs { ifs: ifs.clone(), level }, 0).unwrap();
                let b =
                    DiscreteMeasure::generate(&MeasureFamily::Ifs { ifs: ifs.clone(), level: level + 1 }, 0).unwrap();
                let image: HashSet<[u64; 3]> =
                    ifs.maps.iter().flat_map(|m| a.points.iter().map(|p| key(&m.apply(p)))).collect();
                let next: HashSet<[u64; 3]> = b.points.iter().map(key).collect();
                assert_eq!(image, next);
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_serializes() {
        let fam = MeasureFamily::lacunary_tetrix(6);
        let a = DiscreteMeasure::generate(&fam, 3).unwrap();
        let b = DiscreteMeasure::generate(&fam, 3).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.starts_with("{\"points\":[["));
        let back: DiscreteMeasure = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        let fam_json = serde_json::to_value(&MeasureFamily::PlanePatch { n: 4 }).unwrap();
        assert_eq!(fam_json["family"], "plane_patch");
    }

    #[test]
    fn lacunary_skew_keeps_unit_mass() {
        let m = DiscreteMeasure::generate(&MeasureFamily::Lacunary { ifs: IfsSpec::tetrix(), level: 5, skew: 0.7 }, 0)
            .unwrap();
        assert_eq!(m.len(), 4usize.pow(5));
        assert!((m.total_mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_atom_growth_and_density() {
        let m = DiscreteMeasure::new(vec![Point::zeros()], vec![1.0], MeasureMeta::default()).unwrap();
        let g = m.growth_report(2.0, 0, &[0.1], 0);
        assert!(g.c0_hat >= 100.0 - 1e-9);
        assert!(g.per_radius[0].atomic);
        let r = geometric_grid(1e-3, 1.0, 10);
        let d = m.density_profile(&Point::zeros(), &r);
        assert!(d.theta_vals.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn plane_patch_growth_is_near_pi() {
        let m = DiscreteMeasure::generate(&MeasureFamily::PlanePatch { n: 64 }, 0).unwrap();
        let r: Vec<f64> = (4..=16).map(|k| k as f64 / 64.0).collect();
        let g = m.growth_report(2.0, 256, &r, 1);
        assert!(g.c0_hat >= 0.8 * PI && g.c0_hat <= 1.3 * PI, "{}", g.c0_hat);
        let d = m.density_profile(&Point::new(0.5, 0.5, 0.0), &r);
        for v in &d.theta_vals {
            assert!((v - PI / 4.0).abs() < 0.1, "{v}");
        }
    }

    #[test]
    fn tetrix_growth_is_stable_across_levels() {
        let r = [0.35, 0.5, 0.7];
        let vals: Vec<f64> = (3..=5)
            .map(|l| {
                let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(l), 0).unwrap();
                m.growth_report(2.0, 64, &r, 2).c0_hat
            })
            .collect();
        let mid = vals.iter().sum::<f64>() / 3.0;
        assert!(vals.iter().all(|v| (v / mid - 1.0).abs() <= 0.5), "{vals:?}");
    }

    /// The lacunary construction concentrates mass: the upper density
    /// estimate grows with the level.
    #[test]
    fn lacunary_upper_density_grows_with_level() {
        let r = geometric_grid(1e-3, 1.0, 40);
        let uppers: Vec<f64> = [4u32, 6, 8]
            .iter()
            .map(|&l| {
                let m = DiscreteMeasure::generate(&MeasureFamily::lacunary_tetrix(l), 0).unwrap();
                m.points.iter().take(16).filter_map(|x| m.density_profile(x, &r).upper_hat).fold(0.0, f64::max)
            })
            .collect();
        assert!(uppers[0] < uppers[1] && uppers[1] < uppers[2], "{uppers:?}");
    }

    #[test]
    fn restriction_examples() {
        let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(4), 0).unwrap();
        assert_eq!(m.restrict(Ball::new(Point::repeat(0.5), 10.0).unwrap()), m);
        assert!(m.restrict(Ball::new(Point::repeat(50.0), 1.0).unwrap()).is_empty());
        // Dyadic cubes offset so no atom sits on a face.
        let side = 0.25;
        let mut total = 0.0;
        for i in -1..5 {
            for j in -1..5 {
                for k in -1..5 {
                    let corner = Point::new(i as f64, j as f64, k as f64) * side + Point::repeat(0.01);
                    total += m.restrict(Cube::from_corner(corner, side).unwrap()).total_mass();
                }
            }
        }
        assert_eq!(total, m.total_mass());
    }

    #[test]
    fn bump_is_a_probability_density_bounded_by_two() {
        let q: f64 = ball_rule(12).iter().map(|(z, w)| w * bump(z)).sum();
        assert!((q - 1.0).abs() < 1e-12, "{q}");
        assert!(bump(&Point::zeros()) <= 2.0);
        assert_eq!(bump(&Point::new(1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn mollify_preserves_mass_and_support() {
        let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(3), 0).unwrap();
        for eps in [0.1, 0.01] {
            let me = m.mollify(eps, 3).unwrap();
            assert_eq!(me.len(), 27 * m.len());
            assert!((me.total_mass() - m.total_mass()).abs() < 1e-12);
            for (i, p) in me.points.iter().enumerate() {
                assert!((p - m.points[i / 27]).norm() <= eps);
            }
        }
        assert!(m.mollify(0.0, 3).is_err());
    }

    #[test]
    fn mollified_small_ball_growth() {
        let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(4), 0).unwrap();
        let eps = 0.05;
        let nu = MollifiedMeasure::new(&m, eps).unwrap();
        let centers: Vec<Point> = m.points.iter().step_by(7).cloned().collect();
        let big = centers.iter().map(|x| m.ball_masses(x, &[2.0 * eps])[0]).fold(0.0, f64::max);
        let c = 2.0 * (4.0 * PI / 3.0) * big / (eps * eps);
        for x in &centers {
            for k in 0..=4 {
                let s = eps * 2f64.powi(-k);
                let v = nu.ball_mass(x, s, 8);
                assert!(v <= c * eps * eps * 2f64.powi(-3 * k), "k = {k}: {v}");
            }
        }
    }

    #[test]
    fn mollified_measure_converges_weakly() {
        let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(3), 0).unwrap();
        let g = |p: &Point| (2.0 * p.x).cos() + p.y * p.y * p.z.exp();
        let exact = m.integrate(g);
        let errs: Vec<f64> =
            [0.1, 0.01, 0.001].iter().map(|&e| (m.mollify(e, 3).unwrap().integrate(g) - exact).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    proptest! {
        #[test]
        fn ball_mass_is_monotone_in_radius(level in 2u32..5, cx in 0.0f64..1.0, cy in 0.0f64..1.0, cz in 0.0f64..1.0) {
            let m = DiscreteMeasure::generate(&MeasureFamily::tetrix(level), 0).unwrap();
            let r = geometric_grid(1e-3, 2.0, 40);
            let masses = m.ball_masses(&Point::new(cx, cy, cz), &r);
            prop_assert!(masses.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn mollify_mass_is_conserved(eps in 1e-4f64..0.5, order in 1usize..5) {
            let m = DiscreteMeasure::generate(&MeasureFamily::Sphere { n: 40 }, 0).unwrap();
            let me = m.mollify(eps, order).unwrap();
            prop_assert!((me.total_mass() - m.total_mass()).abs() < 1e-12);
        }
    }
}
