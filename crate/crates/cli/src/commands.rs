//! Subcommands of the `layerpot` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use layerpot_core::measures::{Ball, DiscreteMeasure, IfsSpec, MeasureFamily, MollifiedMeasure};
use layerpot_core::operators::{
    compare_t_r, criterion_check, opnorm, CompareOptions, CriterionParams, NormMethod, PowerOptions,
};
use layerpot_core::spherical::{build_quadrature, decay_report, level_for, K3Kernel, DEFAULT_SMOOTHNESS_MARGIN};
use layerpot_core::{Point, N_DIM};

use crate::error::{CliError, CliResult};
use crate::experiments::{run_experiment, ExperimentConfig};
use crate::io::{
    parse_list, parse_point, read_field, read_json, read_measure, write_json, write_text, DeltaGridArg, KernelArg,
};
use crate::report::{emit_plotdata, ReportBundle, Selector, Table};

#[derive(Debug, Parser)]
#[command(
    name = "layerpot",
    version,
    about = "Numerical laboratory for elliptic layer potentials and the Riesz transform"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a discrete measure and write it as JSON.
    GenMeasure(GenMeasureArgs),
    /// Sampled mean oscillation of a matrix field over a radius grid.
    Oscillation(OscillationArgs),
    /// sup over truncations of the operator norm on L2(mu).
    Opnorm(OpnormArgs),
    /// Norms of T, R and T - R/(4 pi) over a truncation grid.
    Compare(CompareArgs),
    /// Spherical-harmonic decomposition of the K3 kernel.
    SphDecomp(SphDecompArgs),
    /// Local criterion report for a measure on a ball.
    Criterion(CriterionArgs),
    /// Mollify a measure.
    Mollify(MollifyArgs),
    /// Run a config-driven experiment and write its report bundle.
    Run(RunArgs),
    /// Extract two-column CSVs from a report bundle.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    PlanePatch,
    Sphere,
    LipschitzGraph,
    Tetrix,
    Garnett3d,
    Lacunary,
}

#[derive(Debug, Args)]
pub struct GenMeasureArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Grid or point count (plane_patch, sphere, lipschitz_graph).
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Generation (tetrix, garnett3d, lacunary).
    #[arg(long, default_value_t = 4)]
    pub level: u32,
    #[arg(long, default_value_t = 0.1)]
    pub amp: f64,
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    pub freq: f64,
    /// Lacunary mass fraction routed to the first child.
    #[arg(long, default_value_t = 1.0)]
    pub skew: f64,
    /// IFS preset for the lacunary family.
    #[arg(long, default_value = "tetrix")]
    pub ifs: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OscillationArgs {
    #[arg(long)]
    pub field: PathBuf,
    /// Comma-separated radii.
    #[arg(long)]
    pub radii: String,
    /// Centers as `x,y,z;x,y,z`.
    #[arg(long, default_value = "0,0,0")]
    pub centers: String,
    #[arg(long, default_value_t = 4096)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OpnormArgs {
    #[arg(long)]
    pub measure: PathBuf,
    /// `riesz`, `const:A0.json` or `frozen:field.json`.
    #[arg(long, default_value = "riesz")]
    pub kernel: KernelArg,
    /// `auto`, `auto:COUNT` or a comma-separated list.
    #[arg(long, default_value = "auto")]
    pub delta_grid: DeltaGridArg,
    #[arg(long, default_value = "power")]
    pub method: NormMethod,
    /// Relative tolerance of the power method on the Rayleigh quotient.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = layerpot_core::operators::DEFAULT_MAX_ATOMS)]
    pub max_atoms: usize,
    #[arg(long, default_value_t = 256)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub measure: PathBuf,
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long, default_value = "auto")]
    pub delta_grid: DeltaGridArg,
    /// Normalise the field on the bounding cube before comparing.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 256)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SphDecompArgs {
    #[arg(long)]
    pub field: PathBuf,
    /// Cube center `x,y,z`; the field is normalised there and K3 is taken at the pushed center.
    #[arg(long, default_value = "0,0,0")]
    pub center: String,
    #[arg(long, default_value_t = 0.0625)]
    pub cube_side: f64,
    /// Truncation radius; defaults to 1% of the cube side.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 24)]
    pub j_max: usize,
    #[arg(long, default_value_t = 4096)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CriterionArgs {
    #[arg(long)]
    pub measure: PathBuf,
    #[arg(long)]
    pub center: String,
    #[arg(long)]
    pub radius: f64,
    /// Matrix field JSON; identity when absent.
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, default_value_t = f64::INFINITY)]
    pub c0: f64,
    #[arg(long, default_value_t = f64::INFINITY)]
    pub c0_prime: f64,
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    #[arg(long, default_value_t = 1e-3)]
    pub delta_flat: f64,
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 256)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MollifyArgs {
    #[arg(long)]
    pub measure: PathBuf,
    #[arg(long)]
    pub eps: f64,
    /// Per-axis order of the bump quadrature.
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Also report nu_eps(B(x, s)) for these `x,y,z;...` centers and the radii in `--radii`.
    #[arg(long)]
    pub centers: Option<String>,
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Experiment name; overrides the config.
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// `key=value` parameter override (repeatable).
    #[arg(long = "param")]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PlotdataArgs {
    /// `summary.json` of a report bundle.
    #[arg(long)]
    pub summary: PathBuf,
    /// `x,y` or `table:x,y` (repeatable).
    #[arg(long = "select", required = true)]
    pub selectors: Vec<Selector>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Runs a parsed command; returns the process exit status.
pub fn execute(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::GenMeasure(a) => gen_measure(a),
        Command::Oscillation(a) => oscillation(a),
        Command::Opnorm(a) => opnorm_cmd(a),
        Command::Compare(a) => compare(a),
        Command::SphDecomp(a) => sph_decomp(a),
        Command::Criterion(a) => criterion(a),
        Command::Mollify(a) => mollify(a),
        Command::Run(a) => run(a),
        Command::Plotdata(a) => plotdata(a),
    }
}

fn parse_points(s: &str) -> CliResult<Vec<Point>> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_point).collect()
}

fn emit_table(table: &Table, out: Option<&Path>) -> CliResult<()> {
    let csv = table.to_csv()?;
    match out {
        Some(p) => write_text(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn gen_measure(a: GenMeasureArgs) -> CliResult<i32> {
    let family = match a.family {
        FamilyArg::PlanePatch => MeasureFamily::PlanePatch { n: a.n },
        FamilyArg::Sphere => MeasureFamily::Sphere { n: a.n },
        FamilyArg::LipschitzGraph => MeasureFamily::LipschitzGraph { amp: a.amp, freq: a.freq, n: a.n },
        FamilyArg::Tetrix => MeasureFamily::tetrix(a.level),
        FamilyArg::Garnett3d => MeasureFamily::garnett3d(a.level),
        FamilyArg::Lacunary => MeasureFamily::Lacunary { ifs: IfsSpec::preset(&a.ifs)?, level: a.level, skew: a.skew },
    };
    let m = DiscreteMeasure::generate(&family, a.seed)?;
    write_json(&a.out, &m)?;
    println!("{} atoms, mass {}, written to {}", m.len(), m.total_mass(), a.out.display());
    Ok(0)
}

fn oscillation(a: OscillationArgs) -> CliResult<i32> {
    let field = read_field(&a.field)?;
    let centers = parse_points(&a.centers)?;
    let mut t = Table::new("oscillation", &["r", "omega_hat"]);
    for r in parse_list(&a.radii)? {
        t.push(vec![r.into(), field.oscillation_estimate(r, &centers, a.budget, a.seed)?.into()]);
    }
    emit_table(&t, a.out.as_deref())?;
    Ok(0)
}

fn opnorm_cmd(a: OpnormArgs) -> CliResult<i32> {
    let m = read_measure(&a.measure)?;
    let kernel = a.kernel.build(a.budget, a.seed)?;
    let grid = a.delta_grid.resolve(&m)?;
    if !(a.tol > 0.0 && a.tol < 1.0) {
        return Err(CliError::Usage(format!("--tol must lie in (0, 1), got {}", a.tol)));
    }
    let opts = PowerOptions { tol: a.tol, seed: a.seed, ..PowerOptions::default() };
    let rep = opnorm(&kernel, &m, a.method, &grid, &opts, a.max_atoms)?;
    let mut t = Table::new("opnorm", &["delta", "sigma_max", "iterations", "residual"]);
    for e in &rep.per_delta {
        t.push(vec![e.delta.into(), e.sigma_max.into(), e.iterations.into(), e.residual.into()]);
    }
    emit_table(&t, a.out.as_deref())?;
    eprintln!("sup = {} at delta = {}", rep.sup, rep.argsup_delta);
    Ok(0)
}

fn compare(a: CompareArgs) -> CliResult<i32> {
    let m = read_measure(&a.measure)?;
    let field = read_field(&a.field)?;
    let grid = a.delta_grid.resolve(&m)?;
    let opts = CompareOptions { budget: a.budget, seed: a.seed, ..CompareOptions::default() };
    let rep = compare_t_r(&m, &field, &grid, a.normalize, &opts)?;
    let mut t = Table::new("compare", &["delta", "norm_T", "norm_R", "diff_norm", "ratio"]);
    for r in &rep.rows {
        t.push(vec![r.delta.into(), r.norm_t.into(), r.norm_r.into(), r.diff_norm.into(), r.ratio.into()]);
    }
    emit_table(&t, a.out.as_deref())?;
    eprintln!("sup: norm_T = {}, norm_R = {}, diff_norm = {}", rep.sup.norm_t, rep.sup.norm_r, rep.sup.diff_norm);
    Ok(0)
}

fn sph_decomp(a: SphDecompArgs) -> CliResult<i32> {
    let field = read_field(&a.field)?;
    let center = parse_point(&a.center)?;
    let radius = 4.0 * N_DIM as f64 * field.lambda() * a.cube_side;
    let cov = field.normalize_cov(&center, radius, a.budget, a.seed)?;
    let delta = a.delta.unwrap_or(0.01 * a.cube_side);
    let k3 = K3Kernel::new(&cov.hat_a, cov.s_inv * center, delta, a.cube_side, a.budget, a.seed)?;
    let quad = build_quadrature(level_for(a.j_max, DEFAULT_SMOOTHNESS_MARGIN))?;
    let dec = k3.decompose(a.j_max, &quad)?;
    let mut t = Table::new("coefficients", &["component", "j", "ell", "coeff"]);
    for (c, j, ell, v) in dec.rows() {
        t.push(vec![c.into(), j.into(), ell.into(), v.into()]);
    }
    emit_table(&t, a.out.as_deref())?;
    if a.j_max >= 8 {
        let d = decay_report(&dec, &field.declared_modulus(), a.cube_side)?;
        let slope = d
            .slope
            .map_or_else(|| "n/a (too few coefficients above the noise floor)".to_string(), |s| format!("{s:.3}"));
        eprintln!("even_max = {:e}, odd slope = {slope}, residual = {:e}", d.even_max, dec.residual);
    }
    Ok(0)
}

fn criterion(a: CriterionArgs) -> CliResult<i32> {
    let m = read_measure(&a.measure)?;
    let field = match &a.field {
        Some(p) => read_field(p)?,
        None => layerpot_core::MatrixField::identity(),
    };
    let ball = Ball::new(parse_point(&a.center)?, a.radius)?;
    let params = CriterionParams {
        c0: a.c0,
        c0_prime: a.c0_prime,
        n: a.n,
        delta_flat: a.delta_flat,
        tau: a.tau,
        lambda: a.lambda,
        budget: a.budget,
        seed: a.seed,
        ..CriterionParams::default()
    };
    let rep = criterion_check(&m, &ball, &params, &field)?;
    for h in &rep.hypotheses {
        println!("{} ({}) {}: {:e} <= {:e}", if h.pass { "PASS" } else { "FAIL" }, h.index, h.name, h.value, h.bound);
    }
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = &a.out {
        write_json(out, &rep)?;
    }
    Ok(if rep.all_pass { 0 } else { 1 })
}

fn mollify(a: MollifyArgs) -> CliResult<i32> {
    let m = read_measure(&a.measure)?;
    let me = m.mollify(a.eps, a.order)?;
    write_json(&a.out, &me)?;
    println!("{} atoms, mass {} (source mass {})", me.len(), me.total_mass(), m.total_mass());
    if let (Some(c), Some(r)) = (&a.centers, &a.radii) {
        let nu = MollifiedMeasure::new(&m, a.eps)?;
        let radii = parse_list(r)?;
        let mut t = Table::new("ball_mass", &["x", "y", "z", "s", "mass"]);
        for x in parse_points(c)? {
            for &s in &radii {
                t.push(vec![x.x.into(), x.y.into(), x.z.into(), s.into(), nu.ball_mass(&x, s, 8).into()]);
            }
        }
        emit_table(&t, None)?;
    }
    Ok(0)
}

fn run(a: RunArgs) -> CliResult<i32> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<ExperimentConfig>(p)?,
        None => ExperimentConfig::new(
            a.experiment.as_deref().ok_or_else(|| CliError::Usage("run needs --config or --experiment".into()))?,
        ),
    };
    if let Some(e) = a.experiment {
        cfg.experiment = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.out_dir {
        cfg.out_dir = Some(d);
    }
    for kv in &a.params {
        cfg.set_param(kv)?;
    }
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("reports").join(&cfg.experiment));
    let report = run_experiment(&cfg)?;
    report.write(&out_dir)?;
    print!("{}", report.digest());
    println!("report written to {}", out_dir.display());
    Ok(if report.all_pass() { 0 } else { 1 })
}

fn plotdata(a: PlotdataArgs) -> CliResult<i32> {
    let report: ReportBundle = read_json(&a.summary)?;
    for (name, csv) in emit_plotdata(&report, &a.selectors)? {
        let p = a.out_dir.join(name);
        write_text(&p, &csv)?;
        println!("{}", p.display());
    }
    Ok(0)
}
