//! Subgradient descent on `f^CMC(X) + λ1‖X‖_tr + λ2‖Clip(X)‖_tr`.

use super::{aborted, SolveResult, SolverConfig};
use crate::linalg::{clip, shrink, skinny_svd, ClipSpec, DenseMatrix, DEFAULT_RANK_TOL};
use crate::losses::f_cmc;
use crate::observations::ObservedEntries;
use crate::{Error, Result};

/// `W(X)`: 1 where `Clip` is the identity around `X_ij`, 0 where it saturates.
pub(crate) fn pass_mask(x: &DenseMatrix, spec: &ClipSpec) -> DenseMatrix {
    x.map_indexed(|i, j, v| {
        let below = spec.ceiling_at(i, j).is_none_or(|c| v < c);
        let above = spec.floor_at(i, j).is_none_or(|f| v > f);
        if below && above {
            1.0
        } else {
            0.0
        }
    })
}

fn initial_point(obs: &ObservedEntries, spec: &ClipSpec) -> Result<DenseMatrix> {
    if !spec.has_ceiling() {
        return Err(Error::MissingThreshold);
    }
    let (rows, cols) = obs.shape();
    Ok(DenseMatrix::from_fn(rows, cols, |i, j| {
        spec.ceiling_at(i, j).expect("ceiling checked above") + 1.0
    }))
}

/// Runs `cfg.max_iter` subgradient steps from `X⁰ = (C+1)·E` and returns the
/// iterate with the smallest objective (earliest on ties).
///
/// Each step moves along `∇f^CMC(X) + λ2·W(X)⊙(U₁V₁ᵀ)`, where `U₁V₁ᵀ` comes
/// from the SVD of `Clip(X)`, with step `η_t = η₀·decay^{t−1}`, then
/// soft-thresholds the singular values by `η_t·λ1`, zeroing those at or below
/// `cfg.sv_floor`.
pub fn solve_dtr_cmc(obs: &ObservedEntries, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let spec = obs.require_spec()?.clone();
    spec.check_shape(obs.shape())?;
    let (lambda1, lambda2) = (cfg.lambda1, cfg.lambda2);

    let mut x = initial_point(obs, &spec)?;
    let mut x_trace = skinny_svd(&x, DEFAULT_RANK_TOL)?.trace_norm();
    let mut trace = Vec::with_capacity(cfg.max_iter + 1);
    let mut best = x.clone();
    let mut best_index = 0;
    let mut best_value = f64::INFINITY;

    let partial = |trace: &Vec<f64>, best: &DenseMatrix, best_index: usize, t: usize| SolveResult {
        estimate: best.clone(),
        objective_trace: trace.clone(),
        residual_trace: Vec::new(),
        iterations_used: t,
        converged: false,
        best_iterate_index: best_index,
    };

    for t in 0..=cfg.max_iter {
        // the SVD of Clip(X^t) serves both the objective of X^t and the next step
        let clipped = clip(&x, &spec);
        let svd = match skinny_svd(&clipped, DEFAULT_RANK_TOL) {
            Ok(s) => s,
            Err(e) => return Err(aborted(partial(&trace, &best, best_index, t), e)),
        };
        let loss = f_cmc(&x, obs, t < cfg.max_iter)?;
        let value = loss.value + lambda1 * x_trace + lambda2 * svd.trace_norm();
        if !value.is_finite() {
            let e = Error::InvalidArgument(format!("objective diverged at iteration {t}"));
            return Err(aborted(partial(&trace, &best, best_index, t), e));
        }
        trace.push(value);
        if value < best_value {
            best_value = value;
            best_index = t;
            best = x.clone();
        }
        if t == cfg.max_iter {
            break;
        }

        let eta = cfg.eta0 * cfg.step_decay.powi(t as i32);
        let h = loss.gradient.expect("gradient requested");
        let mut step = h;
        if lambda2 > 0.0 && svd.rank() > 0 {
            let g = pass_mask(&x, &spec).hadamard(&svd.uv_t());
            step = &step + &g.scale(lambda2);
        }
        let moved = &x - &step.scale(eta);
        match shrink(&moved, eta * lambda1, cfg.sv_floor) {
            Ok(s) => {
                x_trace = s.trace_norm();
                x = s.matrix;
            }
            Err(e) => return Err(aborted(partial(&trace, &best, best_index, t + 1), e)),
        }
    }

    Ok(SolveResult {
        estimate: best,
        objective_trace: trace,
        residual_trace: Vec::new(),
        iterations_used: cfg.max_iter,
        converged: true,
        best_iterate_index: best_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Variant;

    #[test]
    fn mask_definition() {
        let spec = ClipSpec::ceiling(5.0).unwrap();
        let x = DenseMatrix::from_rows(&[vec![4.0, 6.0, 5.0]]).unwrap();
        assert_eq!(pass_mask(&x, &spec).to_row_major(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_iterations_returns_initial_point() {
        let obs = ObservedEntries::new(2, 2, [(0, 0, 1.0)], Some(ClipSpec::ceiling(3.0).unwrap())).unwrap();
        let mut cfg = SolverConfig::new(Variant::DtrCmc);
        cfg.max_iter = 0;
        let res = solve_dtr_cmc(&obs, &cfg).unwrap();
        assert_eq!(res.estimate, DenseMatrix::filled(2, 2, 4.0));
        assert_eq!(res.objective_trace.len(), 1);
    }

    #[test]
    fn unregularized_interpolation() {
        let m = DenseMatrix::from_fn(4, 5, |i, j| 1.0 + ((i * 5 + j) % 3) as f64);
        let obs = ObservedEntries::from_matrix(&m, &crate::IndexSet::full(4, 5))
            .unwrap()
            .with_spec(ClipSpec::ceiling(100.0).unwrap())
            .unwrap();
        let mut cfg = SolverConfig::new(Variant::DtrCmc);
        cfg.lambda1 = 0.0;
        cfg.lambda2 = 0.0;
        cfg.max_iter = 300;
        cfg.step_decay = 1.0;
        let res = solve_dtr_cmc(&obs, &cfg).unwrap();
        assert!((&res.estimate - &m).max_abs() < 1e-8);
        assert!(*res.objective_trace.last().unwrap() < 1e-15);
    }

    #[test]
    fn requires_ceiling() {
        let obs = ObservedEntries::new(1, 1, [(0, 0, 1.0)], Some(ClipSpec::floor(0.0).unwrap())).unwrap();
        let cfg = SolverConfig::new(Variant::DtrCmc);
        assert!(matches!(solve_dtr_cmc(&obs, &cfg), Err(Error::MissingThreshold)));
    }
}
