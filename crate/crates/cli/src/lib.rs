//! Command implementations behind the `bidegree` binary.

pub mod io;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bidegree::inference::{contrast_interval, plug_in_variances, ContrastKind, Interval};
use bidegree::simharness::{qq_export, qq_to_csv, rows_to_csv, run_experiment, ExperimentConfig};
use bidegree::solver::{fit, newton_diagnostics, Existence, FitConfig};
use bidegree::{approx_error, bi_degrees, design_params, expected_degrees, fisher_info, sample_graph, LRule, ParamVector, SimDesign, WeightFamily};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NONEXISTENT: i32 = 2;
pub const EXIT_UNDETERMINED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bidegree", version, about = "Fit, sample and study directed bi-degree random graph models")]
pub struct Cli {
    /// Edge-weight family: binary, exponential, geometric or finite:q
    #[arg(long, global = true)]
    pub family: Option<WeightFamily>,

    /// Random seed (sample, diagnose) or base seed (experiment)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Confidence level for intervals
    #[arg(long, global = true)]
    pub level: Option<f64>,

    /// Write the main output here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the MLE to an observed graph and print a JSON report
    Fit(FitArgs),
    /// Draw a graph from a parameter design or an explicit parameter file
    Sample(SampleArgs),
    /// Run a Monte-Carlo experiment described by a JSON config
    Experiment(ExperimentArgs),
    /// Report the Fisher-inverse approximation error and Newton constants over an n sweep
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Edges,
    Dense,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Edge list (src,dst,weight) or dense matrix file
    pub input: PathBuf,

    #[arg(long, value_enum, default_value = "edges")]
    pub format: InputFormat,

    /// Number of vertices, when larger than the largest id in the edge list
    #[arg(long)]
    pub n: Option<usize>,

    /// Newton step strategy
    #[arg(long, default_value = "exact")]
    pub step_mode: String,

    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,

    /// Residual tolerance; defaults to 1e-10 (n-1)
    #[arg(long)]
    pub tol: Option<f64>,

    /// Interval for alpha_i - alpha_j, as `i,j` (repeatable)
    #[arg(long = "ci", value_parser = parse_pair)]
    pub ci: Vec<(usize, usize)>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Number of vertices for a design
    #[arg(long, conflicts_with = "theta")]
    pub n: Option<usize>,

    /// Ramp magnitude rule: zero, loglog, sqrtlog, log, sqrtn
    #[arg(long, conflicts_with_all = ["l", "theta"])]
    pub l_rule: Option<LRule>,

    /// Explicit ramp magnitude
    #[arg(long, conflicts_with = "theta")]
    pub l: Option<f64>,

    /// JSON parameter file (a sample sidecar or a bare parameter vector)
    #[arg(long)]
    pub theta: Option<PathBuf>,

    /// Where to write the parameter sidecar; defaults to `<output>.theta.json`
    #[arg(long)]
    pub theta_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON experiment config
    pub config: PathBuf,

    /// Worker threads; overrides the config
    #[arg(long)]
    pub parallelism: Option<usize>,

    /// Emit QQ data for one contrast instead of the table, as `kind:i,j`
    #[arg(long, value_parser = parse_qq)]
    pub qq: Option<(ContrastKind, (usize, usize))>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Comma-separated vertex counts
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,

    #[arg(long, conflicts_with = "l")]
    pub l_rule: Option<LRule>,

    #[arg(long)]
    pub l: Option<f64>,

    /// Constant in the contraction factor
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,

    /// Use degrees of a sampled graph instead of the expected degrees
    #[arg(long)]
    pub sampled: bool,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `i,j`, got `{s}`"))?;
    let idx = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad vertex index `{t}`"));
    Ok((idx(a)?, idx(b)?))
}

fn parse_qq(s: &str) -> Result<(ContrastKind, (usize, usize)), String> {
    let (kind, pair) = s.split_once(':').ok_or_else(|| format!("expected `kind:i,j`, got `{s}`"))?;
    Ok((kind.parse().map_err(|e: bidegree::Error| e.to_string())?, parse_pair(pair)?))
}

fn require_family(family: &Option<WeightFamily>) -> Result<WeightFamily> {
    family
        .clone()
        .context("--family is required (binary, exponential, geometric or finite:q)")
}

#[derive(Debug, Clone, Serialize)]
pub struct ContrastReport {
    pub i: usize,
    pub j: usize,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub length: f64,
    pub level: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub family: String,
    pub n: usize,
    pub existence: Existence,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm_inf: f64,
    pub step_mode: String,
    /// Final iterate; the MLE only when `existence` is `Exists`.
    pub theta_hat: ParamVector,
    /// `v̂_{1,1}, ..., v̂_{2n,2n}`; present when the MLE exists.
    pub v_hat: Option<Vec<f64>>,
    pub intervals: Vec<ContrastReport>,
}

impl FitReport {
    pub fn exit_code(&self) -> i32 {
        match self.existence {
            Existence::Exists => EXIT_OK,
            Existence::NonExistent => EXIT_NONEXISTENT,
            Existence::Undetermined => EXIT_UNDETERMINED,
        }
    }
}

pub fn read_graph(path: &Path, format: InputFormat, family: &WeightFamily, n: Option<usize>) -> Result<bidegree::Graph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let graph = match format {
        InputFormat::Edges => io::parse_edge_list(&text, family, n),
        InputFormat::Dense => io::parse_dense(&text, family),
    };
    graph.with_context(|| format!("cannot parse {}", path.display()))
}

pub fn cmd_fit(graph: &bidegree::Graph, family: &WeightFamily, args: &FitArgs, level: f64) -> Result<FitReport> {
    let cfg = FitConfig {
        step_mode: args.step_mode.clone(),
        tol_residual: args.tol,
        max_iter: args.max_iter,
        ..FitConfig::default()
    };
    let g = bi_degrees(graph);
    let result = fit(&g, family, &cfg)?;
    let mut v_hat = None;
    let mut intervals = Vec::new();
    if result.existence == Existence::Exists {
        let cov = plug_in_variances(&result.theta_hat, family)?;
        for &(i, j) in &args.ci {
            let Interval { lo, hi } = contrast_interval(ContrastKind::Xi, i, j, &result.theta_hat, &cov, level)?;
            intervals.push(ContrastReport {
                i,
                j,
                estimate: 0.5 * (lo + hi),
                lo,
                hi,
                length: hi - lo,
                level,
            });
        }
        v_hat = Some(cov.v_hat_diag);
    }
    Ok(FitReport {
        family: family.spec(),
        n: graph.n(),
        existence: result.existence,
        converged: result.converged,
        iterations: result.iterations,
        residual_norm_inf: result.residual_norm_inf,
        step_mode: args.step_mode.clone(),
        theta_hat: result.theta_hat,
        v_hat,
        intervals,
    })
}

/// Parameter file written next to a sampled edge list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaSidecar {
    pub family: WeightFamily,
    pub seed: u64,
    pub theta: ParamVector,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ThetaFile {
    Sidecar(ThetaSidecar),
    Bare(ParamVector),
}

pub fn read_theta(path: &Path) -> Result<ParamVector> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let parsed: ThetaFile = serde_json::from_str(&text).with_context(|| format!("cannot parse parameters in {}", path.display()))?;
    Ok(match parsed {
        ThetaFile::Sidecar(s) => s.theta,
        ThetaFile::Bare(t) => t,
    })
}

pub struct SampleOutput {
    pub edges: String,
    pub sidecar: ThetaSidecar,
}

pub fn design_theta(family: &WeightFamily, n: Option<usize>, rule: Option<LRule>, l: Option<f64>) -> Result<ParamVector> {
    let n = n.context("--n is required unless --theta is given")?;
    let l = match (rule, l) {
        (Some(rule), _) => rule.value(n),
        (None, Some(l)) => l,
        (None, None) => 0.0,
    };
    Ok(design_params(&SimDesign::new(family.clone(), n, l))?)
}

pub fn cmd_sample(family: &WeightFamily, theta: ParamVector, seed: u64) -> Result<SampleOutput> {
    let graph = sample_graph(&theta, family, seed)?;
    Ok(SampleOutput {
        edges: io::write_edge_list(&graph, family),
        sidecar: ThetaSidecar {
            family: family.clone(),
            seed,
            theta,
        },
    })
}

/// Table CSV, or QQ CSV when `qq` is given.
pub fn cmd_experiment(cfg: &ExperimentConfig, qq: Option<(ContrastKind, (usize, usize))>) -> Result<String> {
    Ok(match qq {
        Some((kind, pair)) => qq_to_csv(&qq_export(cfg, kind, pair)?),
        None => rows_to_csv(&run_experiment(cfg)?),
    })
}

pub const DIAGNOSE_HEADER: &str = "n,max_abs_err,bound_shape,fitted_c1,r,rho,contraction_ok";

pub fn cmd_diagnose(family: &WeightFamily, args: &DiagnoseArgs, seed: u64) -> Result<String> {
    let mut out = String::from(DIAGNOSE_HEADER);
    out.push('\n');
    for &n in &args.n {
        if n < 3 {
            bail!("diagnose needs n >= 3, got {n}");
        }
        let theta = design_theta(family, Some(n), args.l_rule, args.l)?;
        let info = fisher_info(&theta, family)?;
        let err = approx_error(&info)?;
        let g = if args.sampled {
            bi_degrees(&sample_graph(&theta, family, seed)?)
        } else {
            expected_degrees(&theta, family)?
        };
        let diag = newton_diagnostics(&theta, &g, family, args.c1)?;
        let _ = writeln!(
            out,
            "{n},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            err.max_abs_err,
            err.bound_shape,
            err.fitted_c1(),
            diag.r,
            diag.rho,
            diag.contraction_ok
        );
    }
    Ok(out)
}

fn emit(output: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => stdout.write_all(text.as_bytes()).context("cannot write to stdout"),
    }
}

fn level_or_default(level: Option<f64>) -> Result<f64> {
    let level = level.unwrap_or(0.95);
    if !(level > 0.0 && level < 1.0) {
        bail!("--level must lie in (0, 1), got {level}");
    }
    Ok(level)
}

/// Runs a parsed command, returning the process exit code.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Fit(args) => {
            let family = require_family(&cli.family)?;
            let level = level_or_default(cli.level)?;
            let graph = read_graph(&args.input, args.format, &family, args.n)?;
            let report = cmd_fit(&graph, &family, args, level)?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            emit(&cli.output, &text, stdout)?;
            Ok(report.exit_code())
        }
        Command::Sample(args) => {
            let family = require_family(&cli.family)?;
            let theta = match &args.theta {
                Some(path) => read_theta(path)?,
                None => design_theta(&family, args.n, args.l_rule, args.l)?,
            };
            let out = cmd_sample(&family, theta, cli.seed.unwrap_or(0))?;
            emit(&cli.output, &out.edges, stdout)?;
            let sidecar_path = args.theta_out.clone().or_else(|| {
                cli.output.as_ref().map(|p| {
                    let mut s = p.clone().into_os_string();
                    s.push(".theta.json");
                    PathBuf::from(s)
                })
            });
            if let Some(path) = sidecar_path {
                let mut text = serde_json::to_string_pretty(&out.sidecar)?;
                text.push('\n');
                std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
            }
            Ok(EXIT_OK)
        }
        Command::Experiment(args) => {
            let text = std::fs::read_to_string(&args.config)
                .with_context(|| format!("cannot read {}", args.config.display()))?;
            let mut cfg: ExperimentConfig =
                serde_json::from_str(&text).with_context(|| format!("cannot parse {}", args.config.display()))?;
            if let Some(family) = &cli.family {
                cfg.family = family.clone();
            }
            if let Some(seed) = cli.seed {
                cfg.base_seed = seed;
            }
            if let Some(level) = cli.level {
                cfg.level = level;
            }
            if let Some(p) = args.parallelism {
                cfg.parallelism = p;
            }
            cfg.validate()?;
            let csv = cmd_experiment(&cfg, args.qq)?;
            emit(&cli.output, &csv, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Diagnose(args) => {
            let family = require_family(&cli.family)?;
            let csv = cmd_diagnose(&family, args, cli.seed.unwrap_or(0))?;
            emit(&cli.output, &csv, stdout)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses arguments and runs, mapping every failure to an exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            if err.use_stderr() {
                let _ = write!(stderr, "{}", err.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", err.render());
            return EXIT_OK;
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err:#}");
            EXIT_USAGE
        }
    }
}
