use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::Rng;

fn cmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmc"))
        .args(args)
        .env_remove("CMC_DATA_ROOT")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

fn generate(dir: &Path) {
    let out = cmc(&[
        "generate", "--n1", "20", "--n2", "25", "--rank", "2", "--p", "0.8", "--c", "9", "--seed", "1", "--out", p(dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

/// Writes a MovieLens-style file: a rank-one preference pattern rounded to 1..=5.
fn fake_movielens(path: &Path, users: usize, items: usize) {
    let mut rng = clipped_mc::rng::seeded(11);
    let a: Vec<f64> = (0..users).map(|_| rng.random_range(0.5..1.6)).collect();
    let b: Vec<f64> = (0..items).map(|_| rng.random_range(1.0..3.5)).collect();
    let mut text = String::new();
    for i in 0..users {
        for j in 0..items {
            if rng.random_bool(0.6) {
                let r = (a[i] * b[j]).round().clamp(1.0, 5.0) as u8;
                text.push_str(&format!("{}\t{}\t{r}\t0\n", i + 1, j + 1));
            }
        }
    }
    fs::write(path, text).unwrap();
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    assert_eq!(code(&cmc(&["generate", "--bogus"])), 1);
    assert_eq!(code(&cmc(&["nonsense"])), 1);
    let dir = tempfile::tempdir().unwrap();
    // missing required fields
    assert_eq!(code(&cmc(&["generate", "--out", p(dir.path())])), 1);
    // p = 1 leaves no validation or test entries for a sweep
    let out = cmc(&["sweep", "--n1", "5", "--n2", "5", "--rank", "1", "--p", "1", "--c-values", "3", "--out", p(dir.path())]);
    assert_eq!(code(&out), 1);
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"pipeline": "no-such-pipeline"}"#).unwrap();
    assert_eq!(code(&cmc(&["run", "--config", p(&cfg)])), 1);
    fs::write(&cfg, r#"{"pipeline": "generate", "n1": 4, "n2": 4, "rank": 1, "p": 0.5, "unknown_key": 3}"#).unwrap();
    assert_eq!(code(&cmc(&["run", "--config", p(&cfg), "--out", p(dir.path())])), 1);
    assert_eq!(code(&cmc(&["--help"])), 0);
    assert_eq!(code(&cmc(&["task2", "--dataset", "movielens", "--out", p(dir.path())])), 1);
}

#[test]
fn runtime_and_threshold_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent");
    assert_eq!(code(&cmc(&["solve", "--input", p(&missing), "--variant", "Fro-MC"])), 2);
    assert_eq!(code(&cmc(&["plotdata", "--run", p(dir.path())])), 2);
    generate(dir.path());
    let pass = cmc(&["solve", "--input", p(dir.path()), "--variant", "Fro-CMC", "--max-rel-rmse", "0.5"]);
    assert_eq!(code(&pass), 0, "{}", String::from_utf8_lossy(&pass.stderr));
    let fail = cmc(&["solve", "--input", p(dir.path()), "--variant", "Fro-CMC", "--max-rel-rmse", "1e-12"]);
    assert_eq!(code(&fail), 3);
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = cmc(&[
        "--dry-run", "sweep", "--n1", "10", "--n2", "12", "--rank", "2", "--p", "0.8", "--c-values", "5,7", "--out", p(&run),
    ]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("\"pipeline\": \"synthetic-sweep\""), "{stdout}");
    assert!(stdout.contains("Fro-CMC: 32 config(s) x 2 threshold(s) x 5 seed(s)"), "{stdout}");
    assert!(!run.exists());
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    fs::write(&cfg, r#"{"n2": 14, "seed": 9}"#).unwrap();
    let run = dir.path().join("g");
    let out = cmc(&[
        "generate", "--config", p(&cfg), "--n1", "10", "--n2", "12", "--rank", "2", "--p", "0.8", "--seed", "1", "--out", p(&run),
    ]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("overridden by config file"));
    let echoed: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["n2"], 14);
    assert_eq!(echoed["seed"], 9);
    assert_eq!(echoed["n1"], 10);
    assert!(lines(&run.join("truth.csv")).iter().all(|l| l.split(',').count() == 14));
}

#[test]
fn echoed_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let first = dir.path().join("a");
    let out = cmc(&["solve", "--input", p(dir.path()), "--variant", "Tr-CMC", "--max-iter", "30", "--out", p(&first)]);
    assert_eq!(code(&out), 0);
    let second = dir.path().join("b");
    let out = cmc(&["run", "--config", p(&first.join("config.json")), "--out", p(&second)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["estimate.csv", "trace.csv", "metrics.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_outputs_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("sweep");
    let out = cmc(&[
        "sweep", "--n1", "20", "--n2", "25", "--rank", "2", "--p", "0.8", "--c-values", "9", "--seeds", "0,1",
        "--variants", "Fro-CMC,Fro-MC", "--grid", "default", "--max-iter", "30", "--out", p(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = lines(&run.join("sweep.csv"));
    assert_eq!(sweep[0], "seed,c,clipping_rate,variant,rel_rmse_all,rel_rmse_nonclipped_test");
    assert_eq!(sweep.len(), 1 + 2 * 2);

    let out = cmc(&["plotdata", "--run", p(&run)]);
    assert_eq!(code(&out), 0);
    let all = lines(&run.join("plot_rel_rmse_all.csv"));
    // one threshold: a single point per series
    assert_eq!(all.len(), 3);
    assert!(all[1].ends_with(",Fro-CMC") && all[2].ends_with(",Fro-MC"));
    let first: Vec<Vec<u8>> = ["plot_rel_rmse_all.csv", "plot_rel_rmse_nonclipped.csv", "plot_convergence.csv"]
        .iter()
        .map(|f| fs::read(run.join(f)).unwrap())
        .collect();
    assert_eq!(code(&cmc(&["plotdata", "--run", p(&run)])), 0);
    for (f, before) in ["plot_rel_rmse_all.csv", "plot_rel_rmse_nonclipped.csv", "plot_convergence.csv"]
        .iter()
        .zip(first)
    {
        assert_eq!(fs::read(run.join(f)).unwrap(), before, "{f}");
    }
}

#[test]
fn sweep_threshold_gate() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmc(&[
        "sweep", "--n1", "15", "--n2", "20", "--rank", "2", "--p", "0.8", "--c-values", "9", "--seeds", "0",
        "--variants", "Fro-CMC", "--grid", "default", "--max-iter", "10", "--max-rel-rmse", "1e-12", "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 3);
    assert!(dir.path().join("sweep.csv").exists());
}

#[test]
fn diagnose_reports_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    // rank one, entries 1..12
    let rows: Vec<String> = (1..=3)
        .map(|i| (1..=4).map(|j| (i * j).to_string()).collect::<Vec<_>>().join(","))
        .collect();
    fs::write(&m, rows.join("\n")).unwrap();
    let run = dir.path().join("d");
    let out = cmc(&["diagnose", "--matrix", p(&m), "--c", "100", "--estimate", p(&m), "--samples", "5", "--out", p(&run)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = lines(&run.join("report.txt"));
    assert!(report.contains(&"rank=1".to_string()));
    let value = |key: &str| -> f64 {
        let line = report.iter().find(|l| l.starts_with(&format!("{key}="))).unwrap();
        line[key.len() + 1..].parse().unwrap()
    };
    assert!(value("nu_b").abs() <= 1e-12, "{report:?}");
    assert!(report.contains(&"b1=0".to_string()) && report.contains(&"lhs=0".to_string()));
    assert_eq!(lines(&run.join("pmin.csv"))[0], "term,value");

    let printed = cmc(&["diagnose", "--matrix", p(&m), "--c", "100", "--samples", "5"]);
    assert!(String::from_utf8(printed.stdout).unwrap().contains("mu0="));
    assert_eq!(code(&cmc(&["diagnose", "--matrix", p(&m)])), 1);
}

#[test]
fn task_two_on_rating_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("u.data");
    fake_movielens(&data, 40, 50);
    let run = dir.path().join("t2");
    let out = cmc(&[
        "task2", "--dataset", "movielens", "--path", p(&data), "--seeds", "0,1", "--variants", "Fro-CMC,Fro-MC",
        "--grid", "default", "--max-iter", "20", "--out", p(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = lines(&run.join("summary.csv"));
    assert_eq!(summary[0], "variant,f1_mean,f1_se,runs");
    let names: Vec<&str> = summary[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["baseline", "Fro-CMC", "Fro-MC"]);
    assert_eq!(lines(&run.join("runs.csv")).len(), 1 + 2 * 3);

    let hist = lines(&run.join("histogram.csv"));
    assert_eq!(hist.len(), 1 + 5);
    let total: usize = hist[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    let entries = fs::read_to_string(&data).unwrap().lines().count();
    assert_eq!(total, entries);

    assert_eq!(code(&cmc(&["plotdata", "--run", p(&run)])), 0);
    assert_eq!(lines(&run.join("plot_histogram.csv")).len(), 6);
}

#[test]
fn filmtrust_histogram_has_eight_bins() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ratings.txt");
    let mut rng = clipped_mc::rng::seeded(5);
    let mut text = String::new();
    let mut count = 0;
    for i in 1..=30 {
        for j in 1..=30 {
            if rng.random_bool(0.5) {
                let r = rng.random_range(1..=8) as f64 / 2.0;
                text.push_str(&format!("{i} {j} {r}\n"));
                count += 1;
            }
        }
    }
    fs::write(&data, text).unwrap();
    let run = dir.path().join("t1");
    let out = cmc(&[
        "task1", "--dataset", "filmtrust", "--path", p(&data), "--seeds", "0", "--variants", "Fro-MC", "--grid",
        "default", "--max-iter", "5", "--out", p(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let hist = lines(&run.join("histogram.csv"));
    assert_eq!(hist.len(), 1 + 8);
    let total: usize = hist[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, count);
}
