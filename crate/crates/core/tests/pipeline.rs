use std::collections::HashSet;

use clipped_mc::datagen::{generate_synthetic, SynthSpec};
use clipped_mc::datasets::parse_movielens;
use clipped_mc::eval::{clipping_rate, grid_search, prepare_task, rel_rmse, Selection, Task};
use clipped_mc::linalg::at_threshold;
use clipped_mc::solvers::presets::fro_synthetic_grid;
use clipped_mc::solvers::{SolverConfig, Variant};
use clipped_mc::{rng, ClipSpec};
use rand::Rng;

#[test]
fn synthetic_split_covers_truth_and_clips_only_training() {
    let spec = SynthSpec::new(30, 36, 3, 15, 0.8, Some(9.0), 4);
    let inst = generate_synthetic(&spec).unwrap();
    let mut seen = HashSet::new();
    for part in [&inst.train, &inst.val, &inst.test] {
        for e in part.entries() {
            assert!(seen.insert((e.row, e.col)), "entry in two parts");
        }
    }
    assert_eq!(seen.len(), 30 * 36);
    for e in inst.train.entries() {
        assert_eq!(e.value, inst.truth.get(e.row, e.col).min(9.0));
    }
    for e in inst.val.entries().iter().chain(inst.test.entries()) {
        assert_eq!(e.value, inst.truth.get(e.row, e.col));
    }
    let rate = clipping_rate(inst.truth.iter().map(|(_, _, v)| v), 9.0);
    assert_eq!(inst.clipping_rate, rate);
    let expected_train = (0.8 * (30 * 36) as f64).round() as usize;
    assert!(inst.train.len().abs_diff(expected_train) <= 1);
}

fn ratings_file(users: usize, items: usize, seed: u64) -> String {
    let mut r = rng::seeded(seed);
    let mut text = String::new();
    for i in 1..=users {
        for j in 1..=items {
            if r.random_bool(0.3) {
                text.push_str(&format!("{i}\t{j}\t{}\t0\n", r.random_range(1..=5)));
            }
        }
    }
    text
}

#[test]
fn rating_tasks_prepare_consistent_parts() {
    let ratings = parse_movielens(ratings_file(60, 80, 1).as_bytes(), "u.data".as_ref()).unwrap();
    let two = prepare_task(&ratings, Task::Two, 5.0, 3).unwrap();
    let one = prepare_task(&ratings, Task::One, 4.0, 3).unwrap();
    assert_eq!(two.kept_rows, one.kept_rows);
    // task two keeps training values, task one clips them at 4
    assert!(two.train.values().any(|v| v == 5.0));
    assert!(one.train.values().all(|v| v <= 4.0));
    assert_eq!(one.train.len(), two.train.len());
    // the ceiling is attached; entries at it count as clipped
    assert!(two.train.entries().iter().filter(|e| at_threshold(e.value, 5.0)).count() > 0);
    assert_eq!(two.train.spec().unwrap().scalar_ceiling(), Some(5.0));
    // every kept row has a training rating
    let mut rows = vec![false; two.train.rows()];
    for e in two.train.entries() {
        rows[e.row] = true;
    }
    assert!(rows.into_iter().all(|r| r));
    let total = two.train.len() + two.val.len() + two.test.len();
    assert!(total <= ratings.len());
}

#[test]
fn grid_search_selects_minimum_and_reports_every_config() {
    let spec = SynthSpec::new(25, 30, 2, 15, 0.8, Some(10.0), 2);
    let inst = generate_synthetic(&spec).unwrap();
    let mut grid = fro_synthetic_grid(Variant::FroCmc);
    grid.truncate(6);
    for cfg in &mut grid {
        cfg.max_iter = 15;
    }
    let sel = Selection::ValRelRmseClipped(ClipSpec::ceiling(10.0).unwrap());
    let outcome = grid_search(&inst.train, &grid, &sel, &inst.val).unwrap();
    assert_eq!(outcome.table.len(), 6);
    let metrics: Vec<f64> = outcome.table.iter().map(|r| r.metric.unwrap()).collect();
    let min = metrics.iter().copied().fold(f64::INFINITY, f64::min);
    let first_min = metrics.iter().position(|&m| m == min).unwrap();
    assert_eq!(outcome.best_index, first_min);
    let recomputed = rel_rmse(&outcome.best.estimate, &inst.val, Some(&ClipSpec::ceiling(10.0).unwrap())).unwrap();
    assert_eq!(recomputed, min);

    // duplicated configs tie; the earlier one wins
    let dup = vec![grid[first_min].clone(), grid[first_min].clone()];
    assert_eq!(grid_search(&inst.train, &dup, &sel, &inst.val).unwrap().best_index, 0);
}

#[test]
fn grid_search_records_failures_and_errors_when_all_fail() {
    let spec = SynthSpec::new(10, 12, 2, 15, 0.8, Some(10.0), 1);
    let inst = generate_synthetic(&spec).unwrap();
    let unclipped = inst.train.clone().without_spec();
    let sel = Selection::ValF1 { task: Task::Two, c: 10.0 };
    let grid = vec![SolverConfig::new(Variant::FroCmc), SolverConfig::new(Variant::FroMc)];
    let outcome = grid_search(&unclipped, &grid, &sel, &inst.val).unwrap();
    assert_eq!(outcome.best_index, 1);
    assert!(outcome.table[0].error.is_some() && outcome.table[0].metric.is_none());
    let only_bad = vec![SolverConfig::new(Variant::TrCmc)];
    assert!(matches!(
        grid_search(&unclipped, &only_bad, &sel, &inst.val),
        Err(clipped_mc::Error::GridFailed(1))
    ));
}
