use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use fkgclt::experiments::{
    fmt_g17, read_columns, run_audit, run_sweep, write_audit, write_csv, write_json, write_sweep, ExperimentConfig,
};
use fkgclt::inequalities::{
    factorization_bounds, fishdecomp_residual, joint_moment_audit, moment_bound_audit, product_term_audit, theorem_gap,
    ExponentMode, GapOptions, JointSmoothedDensity, Quad2dSpec,
};
use fkgclt::infotheory::{
    gaussian_distances, relative_entropy_debruijn, relative_entropy_debruijn_model, relative_entropy_direct,
    DeBruijnSpec,
};
use fkgclt::lattice::{sample_system, Boundary, ModelKind, ModelSpec};
use fkgclt::quadrature::{QuadRule, QuadratureSpec};
use fkgclt::smoothing::SmoothedDensity;
use fkgclt::{Error, Result};

/// Score functions, Fisher information and FKG audits for smoothed lattice sums.
#[derive(Parser)]
#[command(name = "fkgclt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw lattice configurations and write them as CSV.
    Sample(SampleArgs),
    /// Fisher information of scalar samples smoothed at bandwidth tau.
    Fisher(FisherArgs),
    /// Relative entropy to the standard normal, with Shimizu distance checks.
    Entropy(EntropyArgs),
    /// Decomposition identity and bound audits for paired samples.
    Verify(VerifyArgs),
    /// Convergence sweep over growing boxes.
    Sweep(RunArgs),
    /// Sub-additive recursion audit for adjacent boxes.
    Audit(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Independent,
    Ising1d,
    Ising2d,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Periodic,
    Free,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum, default_value = "ising1d")]
    kind: Kind,
    /// Nearest-neighbour coupling.
    #[arg(short = 'J', long = "coupling", default_value_t = 0.0)]
    coupling: f64,
    /// External field.
    #[arg(long = "field", default_value_t = 0.0)]
    field: f64,
    #[arg(long, value_enum, default_value = "periodic")]
    boundary: BoundaryArg,
    /// Extents, e.g. `64` or `32x32`.
    #[arg(long, default_value = "64")]
    extents: String,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    #[arg(long, default_value_t = 8)]
    chains: usize,
    /// CSV destination; the JSON sidecar goes next to it.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Clone)]
struct QuadArgs {
    /// Minimum number of quadrature nodes.
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    /// Integration half-width in model standard deviations.
    #[arg(long, default_value_t = 12.0)]
    half_width: f64,
    #[arg(long, default_value_t = 1e-10)]
    abs_tol: f64,
    /// Use fixed panels instead of adaptive bisection.
    #[arg(long)]
    fixed: bool,
}

impl QuadArgs {
    fn spec(&self) -> QuadratureSpec<f64> {
        QuadratureSpec {
            rule: if self.fixed { QuadRule::FixedPanels } else { QuadRule::Adaptive },
            nodes: self.nodes,
            half_width: self.half_width,
            abs_tol: self.abs_tol,
            ..QuadratureSpec::default()
        }
    }
}

#[derive(Args)]
struct FisherArgs {
    /// CSV of scalar samples (first column).
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[command(flatten)]
    quad: QuadArgs,
    /// JSON destination; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Route {
    Direct,
    Debruijn,
    Both,
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Smoothing bandwidth; 0 runs the de Bruijn route from the raw samples.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, value_enum, default_value = "both")]
    route: Route,
    /// Number of de Bruijn grid points.
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Smallest added noise on the de Bruijn grid.
    #[arg(long, default_value_t = 1e-4)]
    s_min: f64,
    /// Largest added noise; the remainder is certified.
    #[arg(long, default_value_t = 1e3)]
    t_max: f64,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Audit {
    Decomposition,
    Factorization,
    Moments,
    Product,
    ScoreOfSum,
}

#[derive(Args)]
struct VerifyArgs {
    /// CSV with paired columns s, t.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Moment orders for the score tail bounds.
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 4])]
    ks: Vec<u32>,
    /// Region parameter for the bounds on `|x|, |y| <= B sqrt(tau)`.
    #[arg(short = 'B', long = "region", default_value_t = 3.0)]
    b: f64,
    /// Second-moment bound; defaults to the largest raw second moment of the centers.
    #[arg(short = 'K', long = "second-moment")]
    k_bound: Option<f64>,
    /// Use the exponent (2 + delta) / (6 + delta) instead of 1/3 - epsilon.
    #[arg(long)]
    moment_delta: Option<f64>,
    /// Audits to run; all by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    audits: Vec<Audit>,
    /// Grid points per axis for pointwise checks.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Minimum 2-D quadrature nodes per axis.
    #[arg(long, default_value_t = 256)]
    nodes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides applied after the file, e.g. `--set sweep.samples=2000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        if let Some(d) = &self.output_dir {
            cfg.output.dir = Some(d.clone());
        }
        Ok(cfg)
    }
}

fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => write_json(p, value),
        None => {
            let text = serde_json::to_string_pretty(value)?;
            match writeln!(std::io::stdout(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn parse_extents(s: &str) -> Result<Vec<usize>> {
    s.split(['x', ','])
        .map(|p| p.trim().parse().map_err(|e| Error::InvalidArgument(format!("extents `{s}`: {e}"))))
        .collect()
}

fn sample(a: &SampleArgs) -> Result<()> {
    let spec = ModelSpec {
        kind: match a.kind {
            Kind::Independent => ModelKind::Independent,
            Kind::Ising1d => ModelKind::Ising1d,
            Kind::Ising2d => ModelKind::Ising2d,
        },
        coupling: a.coupling,
        field: a.field,
        boundary: match a.boundary {
            BoundaryArg::Periodic => Boundary::Periodic,
            BoundaryArg::Free => Boundary::Free,
        },
        burn_in: a.burn_in,
        thin: a.thin,
        chains: a.chains,
        ..ModelSpec::default()
    };
    let extents = parse_extents(&a.extents)?;
    let samples = sample_system(&spec, &extents, a.count, a.seed)?;
    let volume: usize = extents.iter().product();
    let header: Vec<String> = (0..volume).map(|i| format!("x{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&a.output, &header, samples.iter().map(|s| s.values.iter().map(|&v| fmt_g17(v)).collect()))?;
    let sidecar = json!({
        "spec": spec,
        "extents": extents,
        "count": a.count,
        "seed": a.seed,
        "exact_sampler": spec.exact_sampler(),
        "layout": "row-major, last axis fastest; values centered by the model mean",
    });
    write_json(&a.output.with_extension("json"), &sidecar)
}

fn fisher(a: &FisherArgs) -> Result<()> {
    let xs = read_columns(&a.input, 1)?.remove(0);
    let f = SmoothedDensity::new(&xs, a.tau)?.fisher(&a.quad.spec())?;
    emit(
        &json!({
            "J": f.j,
            "J_st": f.j_st,
            "error": f.error,
            "tail_bound": f.tail_bound,
            "sigma2": f.sigma2,
            "N": f.samples,
            "tau": a.tau,
        }),
        a.output.as_deref(),
    )
}

fn entropy(a: &EntropyArgs) -> Result<()> {
    let xs = read_columns(&a.input, 1)?.remove(0);
    let quad = a.quad.spec();
    let db_spec =
        DeBruijnSpec { points: a.points, s_min: a.s_min, t_max: a.t_max, tolerance: None, quad: quad.clone() };
    let raw = a.tau == 0.0;
    let model = SmoothedDensity::new(&xs, if raw { a.s_min } else { a.tau })?;
    let standardized = model.standardized()?;
    let direct = match a.route {
        Route::Debruijn => None,
        _ => Some(relative_entropy_direct(&standardized, &quad)?),
    };
    let debruijn = match (a.route, raw) {
        (Route::Direct, _) => None,
        (_, true) => Some(relative_entropy_debruijn(&xs, &db_spec)?),
        (_, false) => Some(relative_entropy_debruijn_model(&model, &db_spec)?),
    };
    let agreement = match (&direct, &debruijn) {
        (Some(d), Some(b)) => {
            let gap = (d.value - b.value).abs();
            Some(
                json!({ "difference": gap, "bound": b.certificate + d.error, "holds": gap <= b.certificate + d.error }),
            )
        }
        _ => None,
    };
    let shimizu = gaussian_distances(&standardized, &quad)?;
    emit(
        &json!({
            "tau": model.tau(),
            "N": xs.len(),
            "direct": direct,
            "debruijn": debruijn,
            "agreement": agreement,
            "shimizu": shimizu,
        }),
        a.output.as_deref(),
    )
}

fn verify(a: &VerifyArgs) -> Result<bool> {
    let cols = read_columns(&a.input, 2)?;
    let pairs: Vec<(f64, f64)> = cols[0].iter().cloned().zip(cols[1].iter().cloned()).collect();
    let joint = JointSmoothedDensity::new(&pairs, a.tau)?;
    let spec = Quad2dSpec { nodes: a.nodes, seed: a.seed, ..Quad2dSpec::default() };
    let quad = QuadratureSpec::default();
    let all = a.audits.is_empty();
    let want = |x: Audit| all || a.audits.contains(&x);
    let mut ok = true;
    let mut report = serde_json::Map::new();
    report.insert("N".into(), json!(pairs.len()));
    report.insert("tau".into(), json!(a.tau));
    report.insert("covariance".into(), json!(joint.covariance()));

    if want(Audit::Decomposition) {
        let mode = a.moment_delta.map_or(ExponentMode::Epsilon, ExponentMode::Moment);
        let opts = GapOptions { beta: a.beta, epsilon: a.epsilon, k_bound: a.k_bound, mode, ks: a.ks.clone() };
        match theorem_gap(&joint, &opts, &spec) {
            Ok(r) => {
                ok &= r.identity_residual <= 1e-5_f64.max(r.identity_tolerance) && r.delta >= -1e-10;
                report.insert("decomposition".into(), serde_json::to_value(&r)?);
            }
            Err(Error::NegativeCovariance(c)) => {
                let check = fishdecomp_residual(&joint, a.beta, &spec)?;
                ok &= check.residual <= 1e-5_f64.max(check.tolerance) && check.rhs >= -1e-10;
                eprintln!("covariance {c} is negative: the FKG correction is not evaluated");
                report.insert("decomposition".into(), serde_json::to_value(&check)?);
            }
            Err(e) => return Err(e),
        }
    }
    if want(Audit::Factorization) {
        let r = factorization_bounds(&joint, a.b, a.beta, a.k_bound, a.grid, &spec)?;
        ok &= !r.flagged;
        report.insert("factorization".into(), serde_json::to_value(&r)?);
    }
    if want(Audit::Moments) {
        let bs = [1.5, 2.0, a.b.max(1.0)];
        let mx = moment_bound_audit(joint.marginal_x(), &a.ks, &bs, a.k_bound, 1000, &quad)?;
        let my = moment_bound_audit(joint.marginal_y(), &a.ks, &bs, a.k_bound, 1000, &quad)?;
        let bs_off = [a.b, 2.0 * a.b, 4.0 * a.b];
        let jm = joint_moment_audit(&joint, &a.ks, &bs_off, a.beta, a.epsilon, a.k_bound, a.grid / 2, &spec)?;
        ok &= mx.all_hold() && my.all_hold();
        ok &= jm.rho1.iter().chain(&jm.rho2).all(|c| c.holds) && jm.off_region.iter().all(|c| c.holds);
        report.insert("moments".into(), json!({ "x": mx, "y": my, "joint": jm }));
    }
    if want(Audit::Product) {
        let r = product_term_audit(&joint, a.b, a.k_bound, &spec)?;
        ok &= r.holds;
        report.insert("product".into(), serde_json::to_value(&r)?);
    }
    if want(Audit::ScoreOfSum) {
        let (lo, hi) = joint.sum_model(a.beta)?.window(6.0);
        let grid: Vec<f64> = (0..41).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect();
        let r = joint.score_of_sum_check(a.beta, &grid, &quad)?;
        ok &= r.max_residual <= 1e-8;
        report.insert("score_of_sum".into(), serde_json::to_value(&r)?);
    }
    report.insert("all_hold".into(), json!(ok));
    emit(&serde_json::Value::Object(report), a.output.as_deref())?;
    Ok(ok)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sample(a) => sample(&a)?,
        Command::Fisher(a) => fisher(&a)?,
        Command::Entropy(a) => entropy(&a)?,
        Command::Verify(a) => {
            if !verify(&a)? {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Sweep(a) => {
            let cfg = a.config()?;
            let report = run_sweep(&cfg)?;
            let dir = cfg.output_dir();
            write_sweep(&report, &dir)?;
            eprintln!("wrote {}", dir.join("sweep.csv").display());
        }
        Command::Audit(a) => {
            let cfg = a.config()?;
            let report = run_audit(&cfg)?;
            let dir = cfg.output_dir();
            write_audit(&report, &dir)?;
            eprintln!("wrote {}", dir.join("audit.csv").display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
