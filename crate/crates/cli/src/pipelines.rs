//! Execution of each pipeline. Every pipeline writes into its run directory
//! (created if needed) and echoes the resolved config as `config.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clipped_mc::datagen::{generate_synthetic, generate_truth, instance_from_truth, split_seed, SynthSpec};
use clipped_mc::datasets::{load_filmtrust, load_movielens};
use clipped_mc::diagnostics::{diagnose, theorem2_bounds, DiagnoseOptions};
use clipped_mc::eval::{
    baseline_all_positive, f1_task, grid_search, mean_and_se, prepare_task, rel_rmse, task_labels, Selection, Task,
};
use clipped_mc::linalg::{norm, NormKind};
use clipped_mc::solvers::presets::{dtr_grid, fro_real_grid, fro_synthetic_grid, tr_real_grid};
use clipped_mc::solvers::{solve, SolveResult, SolverConfig, Variant};
use clipped_mc::{ClipSpec, IndexSet, ObservedEntries};
use serde::{Deserialize, Serialize};

use crate::config::{
    DatasetKind, DiagnoseConfig, GenerateConfig, GridMode, RunConfig, SolveConfig, SweepConfig, TaskConfig,
};
use crate::output::{
    create_dir, read_entries, read_matrix, save_matrix_bin, write_entries, write_json, write_matrix_csv, write_table,
    Sink,
};
use crate::CliError;

/// Sidecar written next to a generated instance.
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub n1: usize,
    pub n2: usize,
    pub c: Option<f64>,
    pub clipping_rate: f64,
    pub attempts: usize,
    pub degenerate: bool,
    pub spec: SynthSpec,
}

/// Lines describing what `cfg` would do, for `--dry-run`.
pub fn plan(cfg: &RunConfig) -> Vec<String> {
    let out = cfg
        .out()
        .map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
    let mut lines = vec![format!("pipeline {} -> {out}", cfg.name())];
    match cfg {
        RunConfig::Generate(g) => lines.push(format!(
            "generate {}x{} rank {} L={} p={} c={:?} seed {}",
            g.n1, g.n2, g.rank, g.levels, g.p, g.c, g.seed
        )),
        RunConfig::SingleSolve(s) => lines.push(format!(
            "solve {} on {}",
            s.solver.variant,
            s.input.as_ref().or(s.train.as_ref()).map_or(String::new(), |p| p.display().to_string())
        )),
        RunConfig::Diagnose(d) => lines.push(format!("diagnose {}", d.matrix.display())),
        RunConfig::SyntheticSweep(s) => {
            for v in &s.variants {
                let n = synthetic_grid(*v, s.grid, 0, s.max_iter).len();
                lines.push(format!(
                    "{v}: {n} config(s) x {} threshold(s) x {} seed(s)",
                    s.c_values.len(),
                    s.seeds.len()
                ));
            }
        }
        RunConfig::RealTask1(t) | RunConfig::RealTask2(t) => {
            let path = t.ratings_path().map_or_else(|e| e.to_string(), |p| p.display().to_string());
            lines.push(format!("ratings {path}"));
            for v in &t.variants {
                let n = real_grid(*v, t.grid, 0, t.max_iter).len();
                lines.push(format!("{v}: {n} config(s) x {} seed(s)", t.seeds.len()));
            }
        }
    }
    lines
}

pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    if let Some(out) = cfg.out() {
        create_dir(out)?;
        write_json(&out.join("config.json"), cfg)?;
    }
    match cfg {
        RunConfig::Generate(g) => generate(g),
        RunConfig::SingleSolve(s) => single_solve(s),
        RunConfig::Diagnose(d) => run_diagnose(d),
        RunConfig::SyntheticSweep(s) => sweep(s),
        RunConfig::RealTask1(t) => real_task(t, Task::One),
        RunConfig::RealTask2(t) => real_task(t, Task::Two),
    }
}

fn require_out(out: &Option<PathBuf>) -> Result<&Path, CliError> {
    out.as_deref()
        .ok_or_else(|| CliError::Config("missing output directory (`out`)".into()))
}

fn generate(g: &GenerateConfig) -> Result<(), CliError> {
    let out = require_out(&g.out)?;
    let spec = g.synth_spec();
    let inst = generate_synthetic(&spec)?;
    save_matrix_bin(&out.join("truth.bin"), &inst.truth)?;
    write_matrix_csv(&out.join("truth.csv"), &inst.truth)?;
    write_entries(&out.join("train.csv"), &inst.train)?;
    write_entries(&out.join("val.csv"), &inst.val)?;
    write_entries(&out.join("test.csv"), &inst.test)?;
    let meta = InstanceMeta {
        n1: g.n1,
        n2: g.n2,
        c: g.c,
        clipping_rate: inst.clipping_rate,
        attempts: inst.attempts,
        degenerate: inst.degenerate,
        spec,
    };
    write_json(&out.join("meta.json"), &meta)?;
    log::info!(
        "generated {}x{} instance, clipping rate {:.4}, {} attempt(s)",
        g.n1,
        g.n2,
        inst.clipping_rate,
        inst.attempts
    );
    Ok(())
}

fn read_meta(dir: &Path) -> Result<InstanceMeta, CliError> {
    let path = dir.join("meta.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn spec_of(floor: Option<f64>, c: Option<f64>) -> Result<Option<ClipSpec>, CliError> {
    if floor.is_none() && c.is_none() {
        return Ok(None);
    }
    Ok(Some(ClipSpec::new(floor, c)?))
}

/// Entries of `obs` whose value lies within the thresholds of `spec`.
fn non_clipped(obs: &ObservedEntries, spec: &ClipSpec) -> ObservedEntries {
    obs.filter(|e| spec.clip_value(e.row, e.col, e.value) == e.value)
}

fn write_solve_outputs(out: &Path, res: &SolveResult) -> Result<(), CliError> {
    write_matrix_csv(&out.join("estimate.csv"), &res.estimate)?;
    let path = out.join("trace.csv");
    let mut buf = Vec::new();
    res.write_trace_csv(&mut buf)?;
    std::fs::write(&path, buf).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn single_solve(s: &SolveConfig) -> Result<(), CliError> {
    let meta = s.input.as_deref().map(read_meta).transpose()?;
    let (n1, n2) = match (&meta, s.n1, s.n2) {
        (_, Some(a), Some(b)) => (a, b),
        (Some(m), _, _) => (m.n1, m.n2),
        _ => return Err(CliError::Config("matrix shape unknown: set n1 and n2".into())),
    };
    let c = s.c.or(meta.as_ref().and_then(|m| m.c));
    let spec = spec_of(s.floor, c)?;
    let train_path = match (&s.train, &s.input) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => dir.join("train.csv"),
        (None, None) => unreachable!("validated"),
    };
    let mut train = read_entries(&train_path, n1, n2)?;
    if let Some(spec) = &spec {
        train = train.with_spec(spec.clone())?;
    }
    let res = solve(&train, &s.solver)?;
    let mut metrics: Vec<(&str, f64)> = vec![
        ("iterations", res.iterations_used as f64),
        ("converged", res.converged as u8 as f64),
        ("objective", res.objective_trace.get(res.best_iterate_index).copied().unwrap_or(f64::NAN)),
        ("trace_norm", norm(&res.estimate, NormKind::Trace)?),
    ];
    let mut gate_metric = None;
    if let Some(dir) = &s.input {
        let truth_path = dir.join("truth.bin");
        if truth_path.exists() {
            let truth = read_matrix(&truth_path)?;
            let all = ObservedEntries::from_matrix(&truth, &IndexSet::full(n1, n2))?;
            metrics.push(("rel_rmse_all", rel_rmse(&res.estimate, &all, None)?));
        }
        let val_path = dir.join("val.csv");
        if let (true, Some(spec)) = (val_path.exists(), &spec) {
            let val = read_entries(&val_path, n1, n2)?;
            if !val.is_empty() {
                metrics.push(("rel_rmse_val_clipped", rel_rmse(&res.estimate, &val, Some(spec))?));
            }
        }
        let test_path = dir.join("test.csv");
        if test_path.exists() {
            let test = read_entries(&test_path, n1, n2)?;
            if !test.is_empty() {
                let r = rel_rmse(&res.estimate, &test, None)?;
                gate_metric = Some(r);
                metrics.push(("rel_rmse_test", r));
                if let Some(spec) = &spec {
                    let kept = non_clipped(&test, spec);
                    if !kept.is_empty() {
                        metrics.push(("rel_rmse_nonclipped_test", rel_rmse(&res.estimate, &kept, None)?));
                    }
                }
            }
        }
    }
    match &s.out {
        Some(out) => {
            write_solve_outputs(out, &res)?;
            write_table(
                &out.join("metrics.csv"),
                "metric,value",
                metrics.iter().map(|(k, v)| format!("{k},{v}")),
            )?;
        }
        None => {
            for (k, v) in &metrics {
                println!("{k}={v}");
            }
        }
    }
    if let Some(limit) = s.max_rel_rmse {
        let value = gate_metric
            .ok_or_else(|| CliError::Runtime("max_rel_rmse needs test entries in the input directory".into()))?;
        if !(value <= limit) {
            return Err(CliError::Threshold(format!("test rel-RMSE {value} exceeds {limit}")));
        }
    }
    Ok(())
}

fn run_diagnose(d: &DiagnoseConfig) -> Result<(), CliError> {
    let m = read_matrix(&d.matrix)?;
    let spec = spec_of(d.floor, d.c)?
        .ok_or_else(|| CliError::Config("diagnose needs a ceiling `c` or a `floor`".into()))?;
    let opts = DiagnoseOptions {
        samples: d.samples,
        ascent_steps: d.ascent_steps,
        seed: d.seed,
        beta: d.beta,
    };
    let diag = diagnose(&m, &spec, &opts)?;
    let mut report: Vec<(String, String)> = vec![
        ("n1".into(), diag.n1.to_string()),
        ("n2".into(), diag.n2.to_string()),
        ("rank".into(), diag.rank.to_string()),
        ("mu0".into(), diag.mu0.to_string()),
        ("mu1".into(), diag.mu1.to_string()),
        ("mu".into(), diag.mu.to_string()),
        ("nu_b".into(), diag.nu_b.map_or("unavailable".into(), |v| v.to_string())),
        ("rho_fro".into(), diag.rho_fro.to_string()),
        ("rho_inf".into(), diag.rho_inf.to_string()),
        ("rho_op".into(), diag.rho_op.to_string()),
        ("rho_lower_bound".into(), diag.rho_lower_bound.to_string()),
    ];
    let pmin_rows: Vec<String> = match &diag.pmin {
        Ok(terms) => terms.named().iter().map(|(k, v)| format!("{k},{v}")).collect(),
        Err(msg) => {
            report.push(("pmin_error".into(), msg.clone()));
            Vec::new()
        }
    };
    let bounds = match &d.estimate {
        Some(path) => {
            let m_hat = read_matrix(path)?;
            let k = d.k.unwrap_or(diag.rank).max(1);
            let scale = ((k * diag.n1 * diag.n2) as f64).sqrt();
            // Smallest betas that put the estimate inside the hypothesis space.
            let beta1 = d.beta1.unwrap_or_else(|| norm(&m_hat, NormKind::Trace).map_or(0.0, |t| t * t / scale));
            let clipped = clipped_mc::linalg::clip(&m_hat, &spec);
            let beta2 = d.beta2.unwrap_or_else(|| norm(&clipped, NormKind::Trace).map_or(0.0, |t| t * t / scale));
            let b = theorem2_bounds(&m, &m_hat, &spec, beta1, beta2, k, d.p.unwrap_or(1.0), d.c0.unwrap_or(1.0))?;
            for (key, v) in [
                ("b1", Some(b.b1)),
                ("b2", Some(b.b2)),
                ("b3", Some(b.b3)),
                ("lhs", Some(b.lhs)),
                ("b12_cap", Some(b.b12_cap)),
                ("mu_plugin", b.mu_plugin),
                ("b3_cap_plugin", b.b3_cap),
            ] {
                report.push((key.into(), v.map_or("unavailable".into(), |v| v.to_string())));
            }
            report.push(("beta1".into(), beta1.to_string()));
            report.push(("beta2".into(), beta2.to_string()));
            Some(b)
        }
        None => None,
    };
    match &d.out {
        Some(out) => {
            let report_path = out.join("report.txt");
            let mut sink = Sink::create(&report_path)?;
            for (k, v) in &report {
                sink.line(format_args!("{k}={v}"))?;
            }
            sink.finish()?;
            write_table(&out.join("pmin.csv"), "term,value", pmin_rows)?;
            #[derive(Serialize)]
            struct Full<'a> {
                diagnostics: &'a clipped_mc::diagnostics::Diagnostics,
                bounds: Option<clipped_mc::diagnostics::Theorem2Bounds>,
            }
            write_json(&out.join("diagnostics.json"), &Full { diagnostics: &diag, bounds })?;
        }
        None => {
            for (k, v) in &report {
                println!("{k}={v}");
            }
            if !pmin_rows.is_empty() {
                println!("term,value");
                for row in pmin_rows {
                    println!("{row}");
                }
            }
        }
    }
    Ok(())
}

fn with_budget(mut grid: Vec<SolverConfig>, seed: u64, max_iter: Option<usize>) -> Vec<SolverConfig> {
    for cfg in &mut grid {
        cfg.seed = seed;
        if let Some(t) = max_iter {
            cfg.max_iter = t;
        }
    }
    grid
}

/// Candidate configs of `variant` on synthetic data.
pub fn synthetic_grid(variant: Variant, mode: GridMode, seed: u64, max_iter: Option<usize>) -> Vec<SolverConfig> {
    let grid = match (mode, variant) {
        (GridMode::Preset, v) if v.is_fro() => fro_synthetic_grid(v),
        (GridMode::Preset, Variant::DtrCmc) => dtr_grid(),
        (_, v) => vec![SolverConfig::new(v)],
    };
    with_budget(grid, seed, max_iter)
}

/// Candidate configs of `variant` on rating data.
pub fn real_grid(variant: Variant, mode: GridMode, seed: u64, max_iter: Option<usize>) -> Vec<SolverConfig> {
    let grid = match (mode, variant) {
        (GridMode::Preset, v) if v.is_fro() => fro_real_grid(v),
        (GridMode::Preset, v) if v.is_tr() => tr_real_grid(v),
        (GridMode::Preset, Variant::DtrCmc) => dtr_grid(),
        (_, v) => vec![SolverConfig::new(v)],
    };
    with_budget(grid, seed, max_iter)
}

fn is_cmc(v: Variant) -> bool {
    matches!(v, Variant::DtrCmc | Variant::TrCmc | Variant::FroCmc)
}

fn sweep(s: &SweepConfig) -> Result<(), CliError> {
    let out = require_out(&s.out)?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut gate: BTreeMap<&'static str, (Variant, Vec<f64>)> = BTreeMap::new();
    for &seed in &s.seeds {
        let mut spec = SynthSpec::new(s.n1, s.n2, s.rank, s.levels, s.p, None, seed);
        spec.continuous = s.continuous;
        let (truth, _) = generate_truth(&spec)?;
        let all = ObservedEntries::from_matrix(&truth, &IndexSet::full(s.n1, s.n2))?;
        for &c in &s.c_values {
            let inst = instance_from_truth(truth.clone(), s.p, Some(c), split_seed(seed))?;
            let clip = ClipSpec::ceiling(c)?;
            let kept = non_clipped(&inst.test, &clip);
            for &variant in &s.variants {
                let grid = synthetic_grid(variant, s.grid, seed, s.max_iter);
                let best = if grid.len() == 1 {
                    solve(&inst.train, &grid[0])?
                } else {
                    grid_search(&inst.train, &grid, &Selection::ValRelRmseClipped(clip.clone()), &inst.val)?.best
                };
                let r_all = rel_rmse(&best.estimate, &all, None)?;
                let r_kept = if kept.is_empty() {
                    f64::NAN
                } else {
                    rel_rmse(&best.estimate, &kept, None)?
                };
                log::info!("seed {seed} c {c} {variant}: all {r_all:.4e} nonclipped {r_kept:.4e}");
                rows.push(format!("{seed},{c},{},{variant},{r_all},{r_kept}", inst.clipping_rate));
                for (k, obj) in best.objective_trace.iter().enumerate() {
                    traces.push(format!("{seed},{c},{variant},{k},{obj}"));
                }
                gate.entry(variant.name()).or_insert((variant, Vec::new())).1.push(r_all);
            }
        }
    }
    write_table(
        &out.join("sweep.csv"),
        "seed,c,clipping_rate,variant,rel_rmse_all,rel_rmse_nonclipped_test",
        rows,
    )?;
    write_table(&out.join("traces.csv"), "seed,c,variant,iteration,objective", traces)?;
    if let Some(limit) = s.max_rel_rmse {
        for (variant, values) in gate.values().filter(|(v, _)| is_cmc(*v)) {
            let (mean, _) = mean_and_se(values);
            if !(mean <= limit) {
                return Err(CliError::Threshold(format!(
                    "{variant}: mean all-entries rel-RMSE {mean} exceeds {limit}"
                )));
            }
        }
    }
    Ok(())
}

/// Rating counts per integer level `1..=top`, plus any off-grid values.
fn histogram(ratings: &ObservedEntries, top: u32) -> Vec<(f64, usize)> {
    let mut counts: BTreeMap<u64, usize> = (1..=top).map(|l| ((l as f64).to_bits(), 0)).collect();
    for v in ratings.values() {
        *counts.entry(v.to_bits()).or_default() += 1;
    }
    let mut out: Vec<(f64, usize)> = counts.into_iter().map(|(b, n)| (f64::from_bits(b), n)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn real_task(t: &TaskConfig, task: Task) -> Result<(), CliError> {
    let out = require_out(&t.out)?;
    let path = t.ratings_path()?;
    let (ratings, top) = match t.dataset {
        DatasetKind::Movielens => (load_movielens(&path)?, 5),
        DatasetKind::Filmtrust => (load_filmtrust(&path, true)?, 8),
    };
    let c = t.c.unwrap_or_else(|| t.dataset.default_c(task == Task::Two));
    write_table(
        &out.join("histogram.csv"),
        "rating,count",
        histogram(&ratings, top).into_iter().map(|(v, n)| format!("{v},{n}")),
    )?;
    let mut runs = Vec::new();
    let mut grid_rows = Vec::new();
    let mut traces = Vec::new();
    let mut scores: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for &seed in &t.seeds {
        let data = prepare_task(&ratings, task, c, seed)?;
        let labels = task_labels(&data.test, task, c);
        let base = baseline_all_positive(&labels)?;
        runs.push(format!("{seed},baseline,{},{},{},", base.f1, base.precision, base.recall));
        record(&mut scores, &mut order, "baseline", base.f1);
        let selection = Selection::ValF1 { task, c };
        for &variant in &t.variants {
            let grid = real_grid(variant, t.grid, seed, t.max_iter);
            let outcome = grid_search(&data.train, &grid, &selection, &data.val)?;
            let score = f1_task(&outcome.best.estimate, &data.test, task, c)?;
            log::info!("seed {seed} {variant}: test f1 {:.4}", score.f1);
            runs.push(format!(
                "{seed},{variant},{},{},{},{}",
                score.f1, score.precision, score.recall, outcome.best_index
            ));
            for row in &outcome.table {
                grid_rows.push(format!(
                    "{seed},{variant},{},{},{},{},{},{},{},{}",
                    row.index,
                    row.config.lambda1,
                    row.config.rank_k,
                    row.config.max_iter,
                    row.metric.map_or(String::new(), |m| m.to_string()),
                    row.iterations,
                    row.converged,
                    row.error.as_deref().unwrap_or("").replace(',', ";")
                ));
            }
            for (k, obj) in outcome.best.objective_trace.iter().enumerate() {
                traces.push(format!("{seed},{c},{variant},{k},{obj}"));
            }
            record(&mut scores, &mut order, variant.name(), score.f1);
        }
    }
    write_table(&out.join("runs.csv"), "seed,variant,f1,precision,recall,best_index", runs)?;
    write_table(
        &out.join("grid.csv"),
        "seed,variant,config_id,lambda1,rank_k,max_iter,val_f1,iterations,converged,error",
        grid_rows,
    )?;
    write_table(&out.join("traces.csv"), "seed,c,variant,iteration,objective", traces)?;
    let summary: Vec<(String, f64, f64, usize)> = order
        .iter()
        .map(|name| {
            let v = &scores[name];
            let (m, se) = mean_and_se(v);
            (name.clone(), m, se, v.len())
        })
        .collect();
    write_table(
        &out.join("summary.csv"),
        "variant,f1_mean,f1_se,runs",
        summary.iter().map(|(n, m, se, k)| format!("{n},{m},{se},{k}")),
    )?;
    if let Some(limit) = t.min_f1 {
        for (name, mean, _, _) in &summary {
            let cmc = name.parse::<Variant>().is_ok_and(is_cmc);
            if cmc && !(*mean >= limit) {
                return Err(CliError::Threshold(format!("{name}: mean test f1 {mean} below {limit}")));
            }
        }
    }
    Ok(())
}

fn record(scores: &mut BTreeMap<String, Vec<f64>>, order: &mut Vec<String>, name: &str, value: f64) {
    if !scores.contains_key(name) {
        order.push(name.to_string());
    }
    scores.entry(name.to_string()).or_default().push(value);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_has_every_level() {
        let obs = ObservedEntries::new(2, 2, [(0, 0, 8.0), (0, 1, 8.0), (1, 1, 3.0)], None).unwrap();
        let h = histogram(&obs, 8);
        assert_eq!(h.len(), 8);
        assert_eq!(h.iter().map(|x| x.1).sum::<usize>(), 3);
        assert_eq!(h[7], (8.0, 2));
    }

    #[test]
    fn preset_grids_respect_overrides() {
        let g = synthetic_grid(Variant::FroCmc, GridMode::Preset, 7, Some(5));
        assert_eq!(g.len(), 32);
        assert!(g.iter().all(|c| c.seed == 7 && c.max_iter == 5));
        assert_eq!(synthetic_grid(Variant::TrCmc, GridMode::Preset, 0, None).len(), 1);
        assert_eq!(real_grid(Variant::TrMc, GridMode::Preset, 0, None).len(), 2);
        assert_eq!(real_grid(Variant::FroMc, GridMode::Default, 0, None).len(), 1);
    }

    #[test]
    fn non_clipped_keeps_values_at_or_below_c() {
        let obs = ObservedEntries::new(1, 3, [(0, 0, 1.0), (0, 1, 5.0), (0, 2, 6.0)], None).unwrap();
        let kept = non_clipped(&obs, &ClipSpec::ceiling(5.0).unwrap());
        assert_eq!(kept.len(), 2);
    }
}
