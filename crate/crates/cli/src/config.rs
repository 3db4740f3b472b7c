//! Run configurations and the merge of command-line flags with config files.

use std::path::{Path, PathBuf};

use clipped_mc::solvers::{SolverConfig, Variant};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Environment variable naming the directory that holds rating datasets.
pub const DATA_ROOT_ENV: &str = "CMC_DATA_ROOT";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "kebab-case")]
pub enum RunConfig {
    SyntheticSweep(SweepConfig),
    RealTask1(TaskConfig),
    RealTask2(TaskConfig),
    Diagnose(DiagnoseConfig),
    SingleSolve(SolveConfig),
    Generate(GenerateConfig),
}

impl RunConfig {
    pub fn out(&self) -> Option<&Path> {
        match self {
            RunConfig::SyntheticSweep(c) => c.out.as_deref(),
            RunConfig::RealTask1(c) | RunConfig::RealTask2(c) => c.out.as_deref(),
            RunConfig::Diagnose(c) => c.out.as_deref(),
            RunConfig::SingleSolve(c) => c.out.as_deref(),
            RunConfig::Generate(c) => c.out.as_deref(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::SyntheticSweep(_) => "synthetic-sweep",
            RunConfig::RealTask1(_) => "real-task1",
            RunConfig::RealTask2(_) => "real-task2",
            RunConfig::Diagnose(_) => "diagnose",
            RunConfig::SingleSolve(_) => "single-solve",
            RunConfig::Generate(_) => "generate",
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let needs_out = !matches!(self, RunConfig::Diagnose(_) | RunConfig::SingleSolve(_));
        if needs_out && self.out().is_none() {
            return Err(CliError::Config(format!("pipeline `{}` needs an output directory (`out`)", self.name())));
        }
        match self {
            RunConfig::SyntheticSweep(c) => c.validate(),
            RunConfig::RealTask1(c) | RunConfig::RealTask2(c) => c.validate(),
            RunConfig::Diagnose(_) => Ok(()),
            RunConfig::SingleSolve(c) => c.validate(),
            RunConfig::Generate(c) => c.synth_spec().validate().map_err(CliError::config),
        }
    }
}

/// Hyperparameter search used for each variant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Named preset grids (Fro, DTr, Tr presets); selection on validation data.
    #[default]
    Preset,
    /// One solve with the variant's default configuration.
    Default,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_levels() -> u32 {
    15
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::FroCmc, Variant::FroMc, Variant::TrCmc, Variant::TrMc]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    #[serde(default = "default_levels")]
    pub levels: u32,
    pub p: f64,
    /// Clipping thresholds; each seed's ground truth is clipped at every value.
    pub c_values: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub grid: GridMode,
    /// Overrides the iteration budget of every config.
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub continuous: bool,
    /// Exit with status 3 when a CMC variant's mean all-entries rel-RMSE exceeds this.
    #[serde(default)]
    pub max_rel_rmse: Option<f64>,
}

impl SweepConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.c_values.is_empty() || self.seeds.is_empty() || self.variants.is_empty() {
            return Err(CliError::Config("c_values, seeds and variants must be non-empty".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(CliError::Config(format!(
                "p = {} must lie in (0, 1) so that validation and test entries exist",
                self.p
            )));
        }
        if let Some(&c) = self.c_values.iter().find(|c| !c.is_finite()) {
            return Err(CliError::Config(format!("clipping threshold {c} is not finite")));
        }
        clipped_mc::datagen::SynthSpec::new(self.n1, self.n2, self.rank, self.levels, self.p, None, 0)
            .validate()
            .map_err(CliError::config)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Movielens,
    Filmtrust,
}

impl DatasetKind {
    fn default_file(self) -> &'static str {
        match self {
            DatasetKind::Movielens => "ml-100k/u.data",
            DatasetKind::Filmtrust => "filmtrust/ratings.txt",
        }
    }

    /// Threshold of task one (clip below the top rating) and task two (the top rating).
    pub fn default_c(self, task_two: bool) -> f64 {
        match (self, task_two) {
            (DatasetKind::Movielens, false) => 4.0,
            (DatasetKind::Movielens, true) => 5.0,
            (DatasetKind::Filmtrust, false) => 7.0,
            (DatasetKind::Filmtrust, true) => 8.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub dataset: DatasetKind,
    /// Ratings file; defaults to a file under `$CMC_DATA_ROOT`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub grid: GridMode,
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Exit with status 3 when a CMC variant's mean test f1 falls below this.
    #[serde(default)]
    pub min_f1: Option<f64>,
}

impl TaskConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() || self.variants.is_empty() {
            return Err(CliError::Config("seeds and variants must be non-empty".into()));
        }
        self.ratings_path().map(|_| ())
    }

    pub fn ratings_path(&self) -> Result<PathBuf, CliError> {
        if let Some(p) = &self.path {
            return Ok(p.clone());
        }
        match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) => Ok(PathBuf::from(root).join(self.dataset.default_file())),
            None => Err(CliError::Config(format!(
                "no dataset path: set `path` or {DATA_ROOT_ENV} (expects {})",
                self.dataset.default_file()
            ))),
        }
    }
}

fn default_samples() -> usize {
    200
}

fn default_ascent() -> usize {
    20
}

fn default_beta() -> f64 {
    clipped_mc::diagnostics::DEFAULT_BETA
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Dense CSV matrix to diagnose.
    pub matrix: PathBuf,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub floor: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_ascent")]
    pub ascent_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Estimate to compare against `matrix` with the error decomposition.
    #[serde(default)]
    pub estimate: Option<PathBuf>,
    #[serde(default)]
    pub beta1: Option<f64>,
    #[serde(default)]
    pub beta2: Option<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub c0: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Directory written by `cmc generate`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Training entries (`row,col,value` CSV) when no input directory is given.
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub n1: Option<usize>,
    #[serde(default)]
    pub n2: Option<usize>,
    /// Ceiling; defaults to the one recorded in the input directory.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub floor: Option<f64>,
    pub solver: SolverConfig,
    /// Exit with status 3 when the test rel-RMSE exceeds this.
    #[serde(default)]
    pub max_rel_rmse: Option<f64>,
}

impl SolveConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.input.is_none() && (self.train.is_none() || self.n1.is_none() || self.n2.is_none()) {
            return Err(CliError::Config("give `input`, or `train` together with `n1` and `n2`".into()));
        }
        self.solver.validate().map_err(CliError::config)
    }
}

fn default_nmf_iters() -> usize {
    500
}

fn default_attempts() -> usize {
    20
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    #[serde(default = "default_levels")]
    pub levels: u32,
    pub p: f64,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub continuous: bool,
    #[serde(default = "default_nmf_iters")]
    pub nmf_iters: usize,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

impl GenerateConfig {
    pub fn synth_spec(&self) -> clipped_mc::datagen::SynthSpec {
        let mut spec =
            clipped_mc::datagen::SynthSpec::new(self.n1, self.n2, self.rank, self.levels, self.p, self.c, self.seed);
        spec.continuous = self.continuous;
        spec.nmf_iters = self.nmf_iters;
        spec.max_attempts = self.max_attempts;
        spec
    }
}

/// Overlays `file` on `flags`. Keys present in both keep the file's value
/// and produce a warning when the values differ.
pub fn merge(flags: Map<String, Value>, file: Map<String, Value>) -> Map<String, Value> {
    merge_at("", flags, file)
}

fn merge_at(prefix: &str, mut base: Map<String, Value>, file: Map<String, Value>) -> Map<String, Value> {
    for (key, value) in file {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.remove(&key), value) {
            (Some(Value::Object(a)), Value::Object(b)) => {
                base.insert(key, Value::Object(merge_at(&path, a, b)));
            }
            (Some(flag), value) => {
                if flag != value {
                    log::warn!("flag value {flag} for `{path}` overridden by config file value {value}");
                }
                base.insert(key, value);
            }
            (None, value) => {
                base.insert(key, value);
            }
        }
    }
    base
}

pub fn read_json_object(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config(format!("{}: top level must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Config(format!("{}: {e}", path.display()))),
    }
}

/// Builds a run configuration for `pipeline` from flags and an optional file.
pub fn resolve(
    pipeline: &str,
    flags: Map<String, Value>,
    file: Option<&Path>,
) -> Result<RunConfig, CliError> {
    let mut merged = match file {
        Some(path) => merge(flags, read_json_object(path)?),
        None => flags,
    };
    match merged.get("pipeline") {
        Some(Value::String(p)) if p != pipeline => {
            return Err(CliError::Config(format!("config is for pipeline `{p}`, not `{pipeline}`")));
        }
        _ => {}
    }
    merged.insert("pipeline".into(), Value::String(pipeline.into()));
    parse_run(Value::Object(merged))
}

pub fn parse_run(value: Value) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    fn object(v: Value) -> Map<String, Value> {
        match v {
            Value::Object(m) => m,
            _ => unreachable!(),
        }
    }

    #[test]
    fn file_wins_and_nested_keys_merge() {
        let flags = object(json!({"out": "a", "solver": {"variant": "Fro-CMC", "lambda1": 0.5}}));
        let file = object(json!({"out": "b", "solver": {"rank_k": 4}}));
        let merged = merge(flags, file);
        assert_eq!(merged["out"], "b");
        assert_eq!(merged["solver"]["variant"], "Fro-CMC");
        assert_eq!(merged["solver"]["rank_k"], 4);
    }

    #[test]
    fn sweep_defaults_are_filled() {
        let cfg = parse_run(json!({
            "pipeline": "synthetic-sweep", "out": "r", "n1": 20, "n2": 30, "rank": 2, "p": 0.8, "c_values": [10.0]
        }))
        .unwrap();
        let RunConfig::SyntheticSweep(s) = cfg else { panic!() };
        assert_eq!(s.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.levels, 15);
        assert_eq!(s.grid, GridMode::Preset);
    }

    #[test]
    fn unknown_fields_and_pipelines_are_rejected() {
        assert!(parse_run(json!({"pipeline": "synthetic-sweep", "n1": 2, "n2": 2, "rank": 1, "p": 0.5, "c_values": [1.0], "bogus": 1})).is_err());
        assert!(parse_run(json!({"pipeline": "nope"})).is_err());
        assert!(parse_run(json!({"pipeline": "synthetic-sweep", "n1": 2, "n2": 2, "rank": 1, "p": 1.0, "c_values": [1.0]})).is_err());
    }

    #[test]
    fn mismatched_pipeline_in_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"pipeline": "diagnose", "matrix": "m.csv"}"#).unwrap();
        assert!(resolve("single-solve", Map::new(), Some(&path)).is_err());
        assert!(resolve("diagnose", Map::new(), Some(&path)).is_ok());
    }
}
