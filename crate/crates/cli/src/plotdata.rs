//! Plot-ready long-format tables (`x,y,series`) derived from run artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use crate::output::{column, create_dir, read_table, write_table};
use crate::CliError;

/// Mean of `y` per `(series, key)`, with the mean `x` of each group as its
/// abscissa. Groups keep the order of first appearance.
struct Grouped {
    order: Vec<(String, String)>,
    sums: BTreeMap<(String, String), (f64, f64, usize)>,
}

impl Grouped {
    fn new() -> Self {
        Self { order: Vec::new(), sums: BTreeMap::new() }
    }

    fn add(&mut self, series: &str, key: &str, x: f64, y: f64) {
        let k = (series.to_string(), key.to_string());
        let slot = self.sums.entry(k.clone()).or_insert_with(|| {
            self.order.push(k);
            (0.0, 0.0, 0)
        });
        slot.0 += x;
        slot.1 += y;
        slot.2 += 1;
    }

    fn rows(&self) -> Vec<String> {
        let mut order = self.order.clone();
        order.sort_by(|a, b| a.0.cmp(&b.0));
        order
            .iter()
            .map(|k| {
                let (x, y, n) = self.sums[k];
                format!("{},{},{}", x / n as f64, y / n as f64, k.0)
            })
            .collect()
    }
}

fn number(path: &Path, cell: &str) -> Result<f64, CliError> {
    cell.parse()
        .map_err(|_| CliError::Runtime(format!("{}: `{cell}` is not a number", path.display())))
}

fn from_sweep(path: &Path, out: &Path) -> Result<(), CliError> {
    let (header, rows) = read_table(path)?;
    let (c, rate, variant) = (
        column(path, &header, "c")?,
        column(path, &header, "clipping_rate")?,
        column(path, &header, "variant")?,
    );
    for (metric, file) in [
        ("rel_rmse_all", "plot_rel_rmse_all.csv"),
        ("rel_rmse_nonclipped_test", "plot_rel_rmse_nonclipped.csv"),
    ] {
        let idx = column(path, &header, metric)?;
        let mut g = Grouped::new();
        for row in &rows {
            let y = number(path, &row[idx])?;
            if y.is_finite() {
                g.add(&row[variant], &row[c], number(path, &row[rate])?, y);
            }
        }
        write_table(&out.join(file), "x,y,series", g.rows())?;
    }
    Ok(())
}

fn from_traces(path: &Path, out: &Path) -> Result<(), CliError> {
    let (header, rows) = read_table(path)?;
    let it = column(path, &header, "iteration")?;
    let obj = column(path, &header, "objective")?;
    let labels: Vec<usize> = ["variant", "seed", "c"]
        .iter()
        .filter_map(|name| header.iter().position(|h| h == name))
        .collect();
    let lines = rows.iter().map(|row| {
        let series: Vec<&str> = labels.iter().map(|&i| row[i].as_str()).collect();
        let series = if series.is_empty() { "run".to_string() } else { series.join("/") };
        format!("{},{},{series}", row[it], row[obj])
    });
    write_table(&out.join("plot_convergence.csv"), "x,y,series", lines.collect::<Vec<_>>())
}

fn from_histogram(path: &Path, out: &Path) -> Result<(), CliError> {
    let (header, rows) = read_table(path)?;
    let (r, n) = (column(path, &header, "rating")?, column(path, &header, "count")?);
    write_table(
        &out.join("plot_histogram.csv"),
        "x,y,series",
        rows.iter().map(|row| format!("{},{},ratings", row[r], row[n])),
    )
}

/// Writes every plot table whose source artifact exists in `run`.
pub fn emit(run: &Path, out: &Path) -> Result<(), CliError> {
    let sweep = run.join("sweep.csv");
    let traces = ["traces.csv", "trace.csv"].map(|f| run.join(f)).into_iter().find(|p| p.exists());
    let hist = run.join("histogram.csv");
    if !sweep.exists() && traces.is_none() && !hist.exists() {
        return Err(CliError::Runtime(format!(
            "{}: no run artifacts (sweep.csv, traces.csv, trace.csv, histogram.csv)",
            run.display()
        )));
    }
    create_dir(out)?;
    if sweep.exists() {
        from_sweep(&sweep, out)?;
    }
    if let Some(t) = traces {
        from_traces(&t, out)?;
    }
    if hist.exists() {
        from_histogram(&hist, out)?;
    }
    Ok(())
}
