//! Error metrics, the two binary prediction tasks on rating data, and
//! grid-search model selection.

use rayon::prelude::*;
use serde::Serialize;

use crate::datasets::prune_empty;
use crate::linalg::{at_threshold, ClipSpec, CompensatedSum, DenseMatrix};
use crate::observations::{split_observed, ObservedEntries};
use crate::solvers::{solve, SolveResult, SolverConfig};
use crate::{Error, Result};

/// `‖ê − t‖ / ‖t‖` over the entries of `truth`. With `clip` both sides are
/// clipped first.
pub fn rel_rmse(estimate: &DenseMatrix, truth: &ObservedEntries, clip: Option<&ClipSpec>) -> Result<f64> {
    estimate.ensure_shape(truth.shape())?;
    if truth.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let (mut num, mut den) = (CompensatedSum::default(), CompensatedSum::default());
    for e in truth.entries() {
        let (mut x, mut t) = (estimate.get(e.row, e.col), e.value);
        if let Some(s) = clip {
            x = s.clip_value(e.row, e.col, x);
            t = s.clip_value(e.row, e.col, t);
        }
        num.add((x - t) * (x - t));
        den.add(t * t);
    }
    if den.value() == 0.0 {
        return Err(Error::ZeroDenominator("rel_rmse"));
    }
    Ok((num.value() / den.value()).sqrt())
}

/// Fraction of `values` strictly above `c`.
pub fn clipping_rate(values: impl IntoIterator<Item = f64>, c: f64) -> f64 {
    let (mut above, mut n) = (0usize, 0usize);
    for v in values {
        n += 1;
        above += (v > c) as usize;
    }
    if n == 0 {
        0.0
    } else {
        above as f64 / n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Was the rating above `C` before clipping? Positive when `ê > C + 0.5`.
    One,
    /// Is the rating the maximum `C`? Positive when `ê > C − 0.5`.
    Two,
}

impl Task {
    pub fn label(self, truth: f64, c: f64) -> bool {
        match self {
            Task::One => truth > c,
            Task::Two => at_threshold(truth, c),
        }
    }

    pub fn predict(self, estimate: f64, c: f64) -> bool {
        match self {
            Task::One => estimate > c + 0.5,
            Task::Two => estimate > c - 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct F1Score {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

impl F1Score {
    /// Precision and recall are 0 when their denominators vanish, and so is
    /// `f1` when `P + R = 0`.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { f1, precision, recall }
    }

    fn from_pairs(pairs: impl Iterator<Item = (bool, bool)>) -> Self {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (label, pred) in pairs {
            match (label, pred) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        Self::from_counts(tp, fp, fn_)
    }
}

pub fn task_labels(truth: &ObservedEntries, task: Task, c: f64) -> Vec<bool> {
    truth.values().map(|v| task.label(v, c)).collect()
}

pub fn f1_task(estimate: &DenseMatrix, truth: &ObservedEntries, task: Task, c: f64) -> Result<F1Score> {
    estimate.ensure_shape(truth.shape())?;
    if truth.is_empty() {
        return Err(Error::EmptyObservations);
    }
    Ok(F1Score::from_pairs(
        truth
            .entries()
            .iter()
            .map(|e| (task.label(e.value, c), task.predict(estimate.get(e.row, e.col), c))),
    ))
}

/// Predicting every entry positive: recall 1 (when any label is positive)
/// and precision equal to the positive ratio.
pub fn baseline_all_positive(labels: &[bool]) -> Result<F1Score> {
    if labels.is_empty() {
        return Err(Error::EmptyObservations);
    }
    Ok(F1Score::from_pairs(labels.iter().map(|&l| (l, true))))
}

/// Mean and standard error `s/√n` with the `n − 1` sample deviation; the
/// error is 0 for a single value.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Model-selection criterion on the validation entries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Selection {
    /// Minimize rel-RMSE with both sides clipped by the given thresholds.
    ValRelRmseClipped(ClipSpec),
    /// Maximize the f1 score of a task at threshold `c`.
    ValF1 { task: Task, c: f64 },
}

impl Selection {
    fn score(&self, estimate: &DenseMatrix, val: &ObservedEntries) -> Result<f64> {
        match self {
            Selection::ValRelRmseClipped(spec) => rel_rmse(estimate, val, Some(spec)),
            Selection::ValF1 { task, c } => f1_task(estimate, val, *task, *c).map(|s| s.f1),
        }
    }

    fn minimize(&self) -> bool {
        matches!(self, Selection::ValRelRmseClipped(_))
    }

    pub fn metric_name(&self) -> &'static str {
        match self {
            Selection::ValRelRmseClipped(_) => "val_rel_rmse_clipped",
            Selection::ValF1 { .. } => "val_f1",
        }
    }
}

/// One grid entry and how it fared.
#[derive(Clone, Debug, Serialize)]
pub struct GridRow {
    pub index: usize,
    pub config: SolverConfig,
    /// `None` when the solve or the metric failed.
    pub metric: Option<f64>,
    pub error: Option<String>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub best_index: usize,
    pub best: SolveResult,
    /// One row per config, in grid order.
    pub table: Vec<GridRow>,
}

type Partial = (Vec<GridRow>, Option<(usize, f64, SolveResult)>);

/// Fits every config (concurrently on the current rayon pool) and keeps the
/// best by `selection`; ties go to the earlier config.
pub fn grid_search(
    obs: &ObservedEntries,
    grid: &[SolverConfig],
    selection: &Selection,
    val: &ObservedEntries,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let minimize = selection.minimize();
    let better = move |a: &(usize, f64, SolveResult), b: &(usize, f64, SolveResult)| {
        let ord = if minimize { a.1 < b.1 } else { a.1 > b.1 };
        ord || (a.1 == b.1 && a.0 < b.0)
    };
    let merge = move |mut left: Partial, right: Partial| -> Partial {
        left.0.extend(right.0);
        let best = match (left.1, right.1) {
            (Some(a), Some(b)) => Some(if better(&b, &a) { b } else { a }),
            (a, b) => a.or(b),
        };
        (left.0, best)
    };
    let (mut table, best) = grid
        .par_iter()
        .enumerate()
        .map(|(index, cfg)| -> Partial {
            let fitted = solve(obs, cfg).and_then(|res| {
                let m = selection.score(&res.estimate, val)?;
                Ok((m, res))
            });
            match fitted {
                Ok((metric, res)) if !metric.is_nan() => {
                    let row = GridRow {
                        index,
                        config: cfg.clone(),
                        metric: Some(metric),
                        error: None,
                        iterations: res.iterations_used,
                        converged: res.converged,
                    };
                    (vec![row], Some((index, metric, res)))
                }
                other => {
                    let error = match other {
                        Err(e) => e.to_string(),
                        Ok(_) => "metric is NaN".to_string(),
                    };
                    log::warn!("grid config {index} failed: {error}");
                    let row = GridRow {
                        index,
                        config: cfg.clone(),
                        metric: None,
                        error: Some(error),
                        iterations: 0,
                        converged: false,
                    };
                    (vec![row], None)
                }
            }
        })
        .reduce(|| (Vec::new(), None), merge);
    table.sort_by_key(|r| r.index);
    let (best_index, _, best) = best.ok_or(Error::GridFailed(grid.len()))?;
    Ok(GridOutcome {
        best_index,
        best,
        table,
    })
}

/// Train, validation and test entries of a rating task.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub task: Task,
    pub c: f64,
    /// Carries the ceiling `c`; for task one the values are clipped at it.
    pub train: ObservedEntries,
    pub val: ObservedEntries,
    pub test: ObservedEntries,
    pub kept_rows: Vec<usize>,
    pub kept_cols: Vec<usize>,
}

/// Splits ratings `(0.8, 0.1, 0.1)`, removes users and items without
/// training ratings and attaches the ceiling `c` to the training part.
///
/// Task one clips the training ratings at `c`. Task two expects `c` to be
/// the maximum rating, so training ratings stay as they are and those equal
/// to `c` count as clipped.
pub fn prepare_task(ratings: &ObservedEntries, task: Task, c: f64, seed: u64) -> Result<TaskData> {
    let split = split_observed(&ratings.clone().without_spec(), (0.8, 0.1, 0.1), seed)?;
    let pruned = prune_empty(&split.train, &split.val, &split.test)?;
    let spec = ClipSpec::ceiling(c)?;
    let train = match task {
        Task::One => pruned.train.clipped_by(spec)?,
        Task::Two => pruned.train.with_spec(spec)?,
    };
    Ok(TaskData {
        task,
        c,
        train,
        val: pruned.val,
        test: pruned.test,
        kept_rows: pruned.kept_rows,
        kept_cols: pruned.kept_cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entries(values: &[(usize, usize, f64)]) -> ObservedEntries {
        ObservedEntries::new(3, 3, values.iter().copied(), None).unwrap()
    }

    #[test]
    fn rel_rmse_basics() {
        let truth_m = DenseMatrix::from_fn(3, 3, |i, j| 1.0 + (i * 3 + j) as f64);
        let truth = entries(&[(0, 0, 1.0), (1, 2, 6.0), (2, 1, 8.0)]);
        assert_eq!(rel_rmse(&truth_m, &truth, None).unwrap(), 0.0);
        assert!((rel_rmse(&truth_m.scale(2.0), &truth, None).unwrap() - 1.0).abs() < 1e-15);
        let spec = ClipSpec::ceiling(0.5).unwrap();
        assert_eq!(rel_rmse(&truth_m.scale(3.0), &truth, Some(&spec)).unwrap(), 0.0);
        let zeros = entries(&[(0, 0, 0.0)]);
        assert!(matches!(rel_rmse(&truth_m, &zeros, None), Err(Error::ZeroDenominator(_))));
        assert!(rel_rmse(&truth_m, &entries(&[]), None).is_err());
    }

    #[test]
    fn f1_conventions() {
        let est = DenseMatrix::filled(3, 3, 10.0);
        let truth = entries(&[(0, 0, 9.0), (1, 1, 9.0)]);
        let s = f1_task(&est, &truth, Task::One, 5.0).unwrap();
        assert_eq!((s.f1, s.precision, s.recall), (1.0, 1.0, 1.0));
        let low = DenseMatrix::zeros(3, 3);
        let none = f1_task(&low, &entries(&[(0, 0, 1.0)]), Task::One, 5.0).unwrap();
        assert_eq!(none.f1, 0.0);
    }

    #[test]
    fn task_thresholds_are_strict() {
        assert!(!Task::One.predict(5.5, 5.0));
        assert!(Task::One.predict(5.5 + 1e-12, 5.0));
        assert!(!Task::Two.predict(4.5, 5.0));
        assert!(Task::Two.predict(4.51, 5.0));
        assert!(Task::Two.label(5.0, 5.0));
        assert!(!Task::Two.label(4.0, 5.0));
        assert!(!Task::One.label(5.0, 5.0));
    }

    #[test]
    fn baseline_matches_closed_form() {
        // q = 7/20 gives precision q, recall 1, f1 = 2q/(1+q).
        let labels: Vec<bool> = (0..20).map(|i| i < 7).collect();
        let s = baseline_all_positive(&labels).unwrap();
        let q = 0.35;
        assert!((s.precision - q).abs() < 1e-15);
        assert_eq!(s.recall, 1.0);
        assert!((s.f1 - 2.0 * q / (1.0 + q)).abs() < 1e-15);
        assert_eq!(baseline_all_positive(&[true, true]).unwrap().f1, 1.0);
        assert_eq!(baseline_all_positive(&[false]).unwrap().f1, 0.0);
        assert!(baseline_all_positive(&[]).is_err());
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn clipping_rate_counts_strictly_above() {
        assert_eq!(clipping_rate([1.0, 5.0, 6.0, 7.0], 5.0), 0.5);
        assert_eq!(clipping_rate([], 5.0), 0.0);
    }

    proptest! {
        #[test]
        fn rel_rmse_scale_equivariant(
            vals in proptest::collection::vec(0.1f64..10.0, 9),
            noise in proptest::collection::vec(-1.0f64..1.0, 9),
            alpha in 0.01f64..100.0,
        ) {
            let truth_m = DenseMatrix::from_row_major(3, 3, vals.clone()).unwrap();
            let est = DenseMatrix::from_fn(3, 3, |i, j| vals[i * 3 + j] + noise[i * 3 + j]);
            let truth = ObservedEntries::from_matrix(&truth_m, &crate::IndexSet::full(3, 3)).unwrap();
            let scaled_truth = ObservedEntries::from_matrix(&truth_m.scale(alpha), &crate::IndexSet::full(3, 3)).unwrap();
            let a = rel_rmse(&est, &truth, None).unwrap();
            let b = rel_rmse(&est.scale(alpha), &scaled_truth, None).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn f1_is_harmonic_mean(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            let s = F1Score::from_counts(tp, fp, fn_);
            prop_assert!((0.0..=1.0).contains(&s.f1));
            if s.precision > 0.0 && s.recall > 0.0 {
                let h = 2.0 / (1.0 / s.precision + 1.0 / s.recall);
                prop_assert!((s.f1 - h).abs() < 1e-12);
            }
        }
    }
}
