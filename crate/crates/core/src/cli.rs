//! Command-line front end. Exit codes: 0 success, 1 a solve did not converge
//! (outputs are still written), 2 usage or validation error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::admm::{AdmmOptions, Diagnostics};
use crate::datagen::{generate, sample_covariance, GenConfig, Network, GENERATOR_VERSION};
use crate::error::{NjglError, Result};
use crate::eval::{cross_validate, metric_report, GroundTruth, MetricConfig};
use crate::io::{
    parse_matrix_csv, read_json, read_matrix_csv, write_atomic, write_json, write_matrix_csv,
};
use crate::linalg::Mat;
use crate::model::{BlockPartition, EmpiricalModel, GroupNorm, PenaltyConfig, PrecisionSet};
use crate::screening::{
    screen_partition, screen_report, solve_decomposed, solve_direct, Method, ScreenReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "njgl", version, about = "Node-based joint graphical lasso")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-class benchmark.
    Simulate(SimulateArgs),
    /// Fit one method and write estimates and diagnostics.
    Fit(FitArgs),
    /// Report the screening partition and condition checks without solving.
    Screen(ScreenArgs),
    /// Score a fit against a simulated truth.
    Metrics(MetricsArgs),
    /// Cross-validate a tuning grid.
    Cv(CvArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NetworkArg {
    Erdos,
    Scalefree,
    Community,
}

impl From<NetworkArg> for Network {
    fn from(n: NetworkArg) -> Self {
        match n {
            NetworkArg::Erdos => Network::Erdos,
            NetworkArg::Scalefree => Network::Scalefree,
            NetworkArg::Community => Network::Community,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pnjgl,
    Cnjgl,
    Fgl,
    Ggl,
    Gl,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Pnjgl => Method::Pnjgl,
            MethodArg::Cnjgl => Method::Cnjgl,
            MethodArg::Fgl => Method::Fgl,
            MethodArg::Ggl => Method::Ggl,
            MethodArg::Gl => Method::Gl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "inf")]
    Inf,
}

impl From<QArg> for GroupNorm {
    fn from(q: QArg) -> Self {
        match q {
            QArg::One => GroupNorm::L1,
            QArg::Two => GroupNorm::L2,
            QArg::Inf => GroupNorm::Linf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub network: NetworkArg,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub n_perturbed: usize,
    #[arg(long, default_value_t = 2)]
    pub n_cohub: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.5)]
    pub rho0: f64,
    #[arg(long, default_value_t = 5.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1000)]
    pub t_max: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000)]
    pub inner_cap: usize,
    #[arg(long, default_value_t = 1e8)]
    pub rho_max: f64,
}

impl SolverArgs {
    fn options(&self) -> Result<AdmmOptions> {
        let o = AdmmOptions {
            rho0: self.rho0,
            mu: self.mu,
            t_max: self.t_max,
            eps: self.eps,
            inner_cap: self.inner_cap,
            rho_max: self.rho_max,
        };
        o.validate()?;
        Ok(o)
    }
}

/// Covariance inputs: either `--cov` files with `--n` counts, or `--raw`
/// sample matrices from which both are computed.
#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub cov: Vec<PathBuf>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub n: Vec<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub raw: Vec<PathBuf>,
}

impl DataArgs {
    fn model(&self) -> Result<EmpiricalModel> {
        match (self.cov.is_empty(), self.raw.is_empty()) {
            (false, true) => {
                if self.n.len() != self.cov.len() {
                    return Err(NjglError::Validation(format!(
                        "{} covariance files but {} sample counts",
                        self.cov.len(),
                        self.n.len()
                    )));
                }
                let classes = self
                    .cov
                    .iter()
                    .zip(&self.n)
                    .map(|(path, &n)| Ok((read_matrix_csv(path)?, n)))
                    .collect::<Result<Vec<_>>>()?;
                EmpiricalModel::new(classes)
            }
            (true, false) => {
                if !self.n.is_empty() {
                    return Err(NjglError::Validation("--n is implied by --raw".into()));
                }
                let classes = read_all(&self.raw)?
                    .into_iter()
                    .map(|x| {
                        let n = x.nrows() as f64;
                        (sample_covariance(&x), n)
                    })
                    .collect();
                EmpiricalModel::new(classes)
            }
            _ => Err(NjglError::Validation(
                "give either --cov with --n, or --raw".into(),
            )),
        }
    }
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<Mat>> {
    paths.iter().map(|p| read_matrix_csv(p)).collect()
}

#[derive(Debug, Args)]
pub struct PenaltyArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "2")]
    pub q: QArg,
    #[arg(long)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda2: f64,
}

impl PenaltyArgs {
    fn config(&self) -> Result<PenaltyConfig> {
        PenaltyConfig::new(self.lambda1, self.lambda2, self.q.into())
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "off")]
    pub screen: Toggle,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub t0: f64,
    #[arg(long, default_value_t = 5.5)]
    pub ts_multiplier: f64,
    /// Output directory for metrics.json and metrics.csv; defaults to the fit directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    pub raw: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "2")]
    pub q: QArg,
    /// CSV of `lambda1,lambda2` rows; a header line is allowed.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub t0: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub generator_version: String,
    pub config: GenConfig,
    pub perturbed_idx: Vec<usize>,
    pub cohub_idx: Vec<usize>,
    pub diagonal_shift: f64,
    pub files: Vec<String>,
}

/// Written by `fit` as `diagnostics.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitRecord {
    pub method: Method,
    pub penalty: PenaltyConfig,
    pub options: AdmmOptions,
    pub screen: bool,
    pub converged: bool,
    pub objective: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub max_residual: f64,
    pub residuals: std::collections::BTreeMap<String, f64>,
    pub partition: Option<Vec<Vec<usize>>>,
    pub block_wall_secs: Option<Vec<f64>>,
    pub wall_time_secs: f64,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let cfg = GenConfig {
        network: args.network.into(),
        p: args.p,
        n: args.n,
        seed: args.seed,
        n_perturbed: args.n_perturbed,
        n_cohub: args.n_cohub,
    };
    cfg.validate()?;
    let data = generate(&cfg)?;
    ensure_dir(&args.out)?;
    let files = [
        ("theta1.csv", &data.truth.theta1),
        ("theta2.csv", &data.truth.theta2),
        ("x1.csv", &data.x1),
        ("x2.csv", &data.x2),
        ("s1.csv", &data.s1),
        ("s2.csv", &data.s2),
    ];
    for (name, m) in files {
        write_matrix_csv(&args.out.join(name), m)?;
    }
    let manifest = Manifest {
        generator_version: GENERATOR_VERSION.to_string(),
        config: cfg,
        perturbed_idx: data.truth.perturbed_idx.clone(),
        cohub_idx: data.truth.cohub_idx.clone(),
        diagonal_shift: data.truth.shift,
        files: files.iter().map(|(n, _)| n.to_string()).collect(),
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(EXIT_OK)
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32> {
    let method: Method = args.penalty.method.into();
    let cfg = args.penalty.config()?;
    let opts = args.solver.options()?;
    let model = args.data.model()?;
    method.check_classes(model.k())?;

    let (set, diag, partition, block_walls, wall): (
        PrecisionSet,
        Diagnostics,
        Option<BlockPartition>,
        _,
        f64,
    ) = if args.screen == Toggle::On {
        let (set, d) = solve_decomposed(method, &model, &cfg, &opts)?;
        let wall = d.wall_time_secs;
        (
            set,
            d.solver,
            Some(d.partition),
            Some(d.block_wall_secs),
            wall,
        )
    } else {
        let (set, d) = solve_direct(method, &model, &cfg, &opts)?;
        let wall = d.wall_time_secs;
        (set, d, None, None, wall)
    };

    ensure_dir(&args.out)?;
    for (k, t) in set.thetas.iter().enumerate() {
        write_matrix_csv(&args.out.join(format!("theta{}.csv", k + 1)), t)?;
    }
    if let Some(vs) = &set.decomposition {
        match method {
            Method::Pnjgl | Method::Fgl => write_matrix_csv(&args.out.join("v.csv"), &vs[0])?,
            _ => {
                for (k, v) in vs.iter().enumerate() {
                    write_matrix_csv(&args.out.join(format!("v{}.csv", k + 1)), v)?;
                }
            }
        }
    }
    let record = FitRecord {
        method,
        penalty: cfg,
        options: opts,
        screen: args.screen == Toggle::On,
        converged: diag.converged(),
        objective: diag.objective,
        outer_iterations: diag.outer_iterations,
        inner_iterations: diag.inner_iterations,
        max_residual: diag.max_residual,
        residuals: diag.residuals.clone(),
        partition: partition.map(|p| p.blocks().to_vec()),
        block_wall_secs: block_walls,
        wall_time_secs: wall,
    };
    write_json(&args.out.join("diagnostics.json"), &record)?;
    Ok(if diag.converged() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Debug, Serialize)]
pub struct ScreenOutput {
    pub method: Method,
    pub penalty: PenaltyConfig,
    pub report: ScreenReport,
}

pub fn cmd_screen(args: &ScreenArgs) -> Result<i32> {
    let method: Method = args.penalty.method.into();
    let cfg = args.penalty.config()?;
    let model = args.data.model()?;
    method.check_classes(model.k())?;
    let partition = screen_partition(&model, cfg.lambda1)?;
    let report = screen_report(method, &model, &cfg, &partition)?;
    let out = ScreenOutput {
        method,
        penalty: cfg,
        report,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    if let Some(path) = &args.out {
        write_json(path, &out)?;
    }
    Ok(EXIT_OK)
}

fn read_optional(path: &Path) -> Result<Option<Mat>> {
    if path.exists() {
        read_matrix_csv(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn cmd_metrics(args: &MetricsArgs) -> Result<i32> {
    let mcfg = MetricConfig {
        t0: args.t0,
        ts_multiplier: args.ts_multiplier,
    };
    mcfg.validate()?;
    let manifest: Manifest = read_json(&args.truth.join("manifest.json"))?;
    let truth = GroundTruth {
        thetas: vec![
            read_matrix_csv(&args.truth.join("theta1.csv"))?,
            read_matrix_csv(&args.truth.join("theta2.csv"))?,
        ],
        perturbed_idx: manifest.perturbed_idx,
        cohub_idx: manifest.cohub_idx,
    };
    let record: FitRecord = read_json(&args.fit.join("diagnostics.json"))?;
    let mut thetas = Vec::new();
    while let Some(t) = read_optional(&args.fit.join(format!("theta{}.csv", thetas.len() + 1)))? {
        thetas.push(t);
    }
    let decomposition = match record.method {
        Method::Pnjgl | Method::Fgl => read_optional(&args.fit.join("v.csv"))?.map(|v| vec![v]),
        Method::Cnjgl => {
            let mut vs = Vec::new();
            while let Some(v) = read_optional(&args.fit.join(format!("v{}.csv", vs.len() + 1)))? {
                vs.push(v);
            }
            (!vs.is_empty()).then_some(vs)
        }
        _ => None,
    };
    let fit = PrecisionSet {
        thetas,
        decomposition,
        duals: None,
    };
    let report = metric_report(&truth, record.method, &fit, &mcfg)?;

    let out = args.out.clone().unwrap_or_else(|| args.fit.clone());
    ensure_dir(&out)?;
    write_json(&out.join("metrics.json"), &report)?;
    let csv = format!(
        "method,positive_edges,true_positive_edges,ppc,tppc,pcc,tpcc,frobenius_error\n{},{},{},{},{},{},{},{}\n",
        record.method,
        report.positive_edges,
        report.true_positive_edges,
        report.ppc,
        report.tppc,
        report.pcc,
        report.tpcc,
        report.frobenius_error
    );
    write_atomic(&out.join("metrics.csv"), csv.as_bytes())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(EXIT_OK)
}

/// Reads `lambda1,lambda2` rows, skipping a non-numeric header line.
pub fn read_grid(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if let Some(first) = lines.first() {
        if first.split(',').any(|f| f.trim().parse::<f64>().is_err()) {
            lines.remove(0);
        }
    }
    let m = parse_matrix_csv(&lines.join("\n"), &path.display().to_string())?;
    if m.ncols() != 2 {
        return Err(NjglError::Parse {
            path: path.display().to_string(),
            message: format!("expected 2 columns (lambda1, lambda2), found {}", m.ncols()),
        });
    }
    Ok((0..m.nrows()).map(|i| (m[(i, 0)], m[(i, 1)])).collect())
}

pub fn cmd_cv(args: &CvArgs) -> Result<i32> {
    let method: Method = args.method.into();
    let opts = args.solver.options()?;
    let grid = read_grid(&args.grid)?;
    let raw = read_all(&args.raw)?;
    let mcfg = MetricConfig {
        t0: args.t0,
        ..MetricConfig::default()
    };
    let rows = cross_validate(
        &raw,
        method,
        args.q.into(),
        &grid,
        args.folds,
        args.seed,
        &opts,
        &mcfg,
    )?;
    let mut csv = String::from("lambda1,lambda2,mean_loglik,mean_positive_edges,not_converged\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.lambda1, r.lambda2, r.mean_loglik, r.mean_positive_edges, r.not_converged
        ));
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_atomic(&args.out, csv.as_bytes())?;
    Ok(if rows.iter().all(|r| r.not_converged == 0) {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn configure_threads() {
    let Ok(v) = std::env::var("NJGL_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("could not size thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring NJGL_THREADS={v:?}; expected a positive integer"),
    }
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Screen(a) => cmd_screen(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Cv(a) => cmd_cv(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return EXIT_OK;
            }
            eprintln!("\n{}", Cli::command().render_usage());
            return EXIT_USAGE;
        }
    };
    configure_threads();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
