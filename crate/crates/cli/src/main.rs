//! `cmc`: experiment driver for clipped matrix completion.
//!
//! Every subcommand turns its flags into a JSON object, overlays the optional
//! `--config` file (file values win, with a warning) and runs the resulting
//! pipeline. Exit status: 0 success, 1 configuration error, 2 runtime failure,
//! 3 a requested quality threshold was missed.

mod config;
mod output;
mod pipelines;
mod plotdata;

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clipped_mc::Variant;
use serde_json::{json, Map, Value};

use config::{resolve, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Threshold(String),
}

impl CliError {
    pub fn config(e: impl Display) -> Self {
        CliError::Config(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Threshold(_) => 3,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
            CliError::Threshold(m) => write!(f, "threshold not met: {m}"),
        }
    }
}

impl From<clipped_mc::Error> for CliError {
    fn from(e: clipped_mc::Error) -> Self {
        match e {
            clipped_mc::Error::InvalidConfig(_) | clipped_mc::Error::UnknownVariant(_) => CliError::Config(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "cmc", version, about = "Recover low-rank matrices from clipped observations")]
struct Cli {
    /// Worker threads for grid searches (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the resolved config and plan without running anything.
    #[arg(long, global = true)]
    dry_run: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance (truth, clipped training split, metadata).
    Generate(GenerateArgs),
    /// Fit one solver configuration.
    Solve(SolveArgs),
    /// Coherence, nu_B, rho estimates, p_min terms and error decomposition.
    Diagnose(DiagnoseArgs),
    /// Synthetic recovery across clipping thresholds and seeds.
    Sweep(SweepArgs),
    /// Rating task one: recover ratings above a threshold clipped away.
    Task1(TaskArgs),
    /// Rating task two: find ratings at the top of the scale.
    Task2(TaskArgs),
    /// Long-format (x, y, series) CSVs from a run directory.
    Plotdata(PlotArgs),
    /// Run a config file; the pipeline comes from its `pipeline` key.
    Run(RunArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config; its values override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Raw entries are drawn from {1, ..., levels}.
    #[arg(long)]
    levels: Option<u32>,
    /// Training fraction.
    #[arg(long)]
    p: Option<f64>,
    /// Clipping threshold of the training entries.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Draw raw entries uniformly from [1, levels].
    #[arg(long)]
    continuous: bool,
    #[arg(long)]
    nmf_iters: Option<usize>,
    #[arg(long)]
    max_attempts: Option<usize>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SolverArgs {
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    rank_k: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    step_decay: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverArgs {
    fn to_json(&self) -> Value {
        json!({
            "variant": self.variant,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "rank_k": self.rank_k,
            "max_iter": self.max_iter,
            "eta0": self.eta0,
            "step_decay": self.step_decay,
            "tol": self.tol,
            "seed": self.seed,
        })
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Directory written by `cmc generate`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// `row,col,value` CSV of training entries (instead of --input).
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Ceiling; defaults to the one recorded with --input.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    /// Exit with status 3 if the test rel-RMSE is larger.
    #[arg(long)]
    max_rel_rmse: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct DiagnoseArgs {
    #[command(flatten)]
    common: Common,
    /// Matrix as dense CSV, or `.bin`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    ascent_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Estimate of the matrix; adds the error decomposition terms.
    #[arg(long)]
    estimate: Option<PathBuf>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated clipping thresholds.
    #[arg(long, value_delimiter = ',')]
    c_values: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    variants: Option<Vec<Variant>>,
    /// `preset` (grid search on validation entries) or `default`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    continuous: bool,
    /// Exit with status 3 if a CMC variant's mean rel-RMSE is larger.
    #[arg(long)]
    max_rel_rmse: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct TaskArgs {
    #[command(flatten)]
    common: Common,
    /// `movielens` or `filmtrust`.
    #[arg(long)]
    dataset: Option<String>,
    /// Ratings file (default: under $CMC_DATA_ROOT).
    #[arg(long)]
    path: Option<PathBuf>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    variants: Option<Vec<Variant>>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Exit with status 3 if a CMC variant's mean f1 is smaller.
    #[arg(long)]
    min_f1: Option<f64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Run directory to read.
    #[arg(long)]
    run: PathBuf,
    /// Where to write the plot tables (default: the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the run directory of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: clipped_mc::Error| e.to_string())
}

/// Drops null members so absent flags leave the keys unset.
fn prune_nulls(value: Value) -> Map<String, Value> {
    let Value::Object(map) = value else {
        unreachable!("flags always form an object")
    };
    map.into_iter()
        .filter(|(_, v)| !v.is_null())
        .map(|(k, v)| match v {
            Value::Object(_) => (k, Value::Object(prune_nulls(v))),
            v => (k, v),
        })
        .filter(|(_, v)| !matches!(v, Value::Object(m) if m.is_empty()))
        .collect()
}

fn flag(on: bool) -> Option<bool> {
    on.then_some(true)
}

fn build(command: Command) -> Result<Option<RunConfig>, CliError> {
    let (pipeline, flags, common) = match command {
        Command::Generate(a) => (
            "generate",
            json!({
                "out": a.common.out, "n1": a.n1, "n2": a.n2, "rank": a.rank, "levels": a.levels,
                "p": a.p, "c": a.c, "seed": a.seed, "continuous": flag(a.continuous),
                "nmf_iters": a.nmf_iters, "max_attempts": a.max_attempts,
            }),
            a.common.config,
        ),
        Command::Solve(a) => (
            "single-solve",
            json!({
                "out": a.common.out, "input": a.input, "train": a.train, "n1": a.n1, "n2": a.n2,
                "c": a.c, "floor": a.floor, "max_rel_rmse": a.max_rel_rmse, "solver": a.solver.to_json(),
            }),
            a.common.config,
        ),
        Command::Diagnose(a) => (
            "diagnose",
            json!({
                "out": a.common.out, "matrix": a.matrix, "c": a.c, "floor": a.floor, "samples": a.samples,
                "ascent_steps": a.ascent_steps, "seed": a.seed, "beta": a.beta, "estimate": a.estimate,
                "beta1": a.beta1, "beta2": a.beta2, "k": a.k, "p": a.p, "c0": a.c0,
            }),
            a.common.config,
        ),
        Command::Sweep(a) => (
            "synthetic-sweep",
            json!({
                "out": a.common.out, "n1": a.n1, "n2": a.n2, "rank": a.rank, "levels": a.levels, "p": a.p,
                "c_values": a.c_values, "seeds": a.seeds, "variants": a.variants, "grid": a.grid,
                "max_iter": a.max_iter, "continuous": flag(a.continuous), "max_rel_rmse": a.max_rel_rmse,
            }),
            a.common.config,
        ),
        Command::Task1(a) => ("real-task1", task_json(&a), a.common.config),
        Command::Task2(a) => ("real-task2", task_json(&a), a.common.config),
        Command::Plotdata(a) => {
            plotdata::emit(&a.run, a.out.as_deref().unwrap_or(&a.run))?;
            return Ok(None);
        }
        Command::Run(a) => {
            let mut file = config::read_json_object(&a.config)?;
            if let Some(out) = a.out {
                file.insert("out".into(), json!(out));
            }
            if !file.contains_key("pipeline") {
                return Err(CliError::Config(format!("{}: missing `pipeline` key", a.config.display())));
            }
            return config::parse_run(Value::Object(file)).map(Some);
        }
    };
    resolve(pipeline, prune_nulls(flags), common.as_deref()).map(Some)
}

fn task_json(a: &TaskArgs) -> Value {
    json!({
        "out": a.common.out, "dataset": a.dataset, "path": a.path, "c": a.c, "seeds": a.seeds,
        "variants": a.variants, "grid": a.grid, "max_iter": a.max_iter, "min_f1": a.min_f1,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let dry_run = cli.dry_run;
    let Some(cfg) = build(cli.command)? else {
        return Ok(());
    };
    if dry_run {
        let text = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("{text}");
        for line in pipelines::plan(&cfg) {
            println!("{line}");
        }
        return Ok(());
    }
    pipelines::execute(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cmc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
