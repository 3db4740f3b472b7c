//! Accelerated proximal gradient on `f(X) + λ‖X‖_tr` with `f` either the
//! squared loss or the squared-hinge clipped loss.

use super::{aborted, SolveResult, SolverConfig};
use crate::linalg::{norm, shrink, DenseMatrix, NormKind};
use crate::losses::{f_cmc, f_mc, LossValue};
use crate::observations::ObservedEntries;
use crate::{Error, Result};

/// Lipschitz constant of both losses' gradients (`‖P_Ω‖_op² = 1`).
const LIPSCHITZ: f64 = 1.0;

struct Loss<'a> {
    obs: &'a ObservedEntries,
    hinge: bool,
}

impl Loss<'_> {
    fn eval(&self, x: &DenseMatrix, with_grad: bool) -> Result<LossValue> {
        if self.hinge {
            f_cmc(x, self.obs, with_grad)
        } else {
            f_mc(x, self.obs, with_grad)
        }
    }
}

/// FISTA from `X⁰ = O` with step `1/L`.
///
/// With continuation, the weight at iteration `t` is
/// `max(factor^{t−1}, ratio)·‖P_Ω(M^c)‖_op`; without it the target weight
/// `ratio·‖P_Ω(M^c)‖_op` is used throughout. `apg_eta` enables a backtracking
/// search starting from `eta·L_prev`; `monotone_restart` discards iterates that
/// raise the objective and resets the momentum. Stops early once the weight
/// has reached its target and the relative change of the iterate drops below
/// `tol`.
pub fn solve_tr(obs: &ObservedEntries, cfg: &SolverConfig, use_hinge: bool) -> Result<SolveResult> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if use_hinge {
        obs.require_spec()?;
    }
    let loss = Loss { obs, hinge: use_hinge };
    let (rows, cols) = obs.shape();
    let scale = norm(&obs.to_dense(), NormKind::Operator)?;
    let target = cfg.lambda_target_ratio * scale;
    let lambda_at = |t: usize| {
        if cfg.continuation {
            (cfg.continuation_factor.powi(t as i32 - 1).max(cfg.lambda_target_ratio)) * scale
        } else {
            target
        }
    };

    let mut x = DenseMatrix::zeros(rows, cols);
    let mut x_trace_norm = 0.0;
    let mut y = x.clone();
    let mut momentum: f64 = 1.0;
    let mut lipschitz = LIPSCHITZ;
    let mut trace = Vec::with_capacity(cfg.max_iter);
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.max_iter {
        iterations = t;
        let lambda = lambda_at(t);
        let at_y = loss.eval(&y, true)?;
        let grad = at_y.gradient.as_ref().expect("gradient requested");

        let mut trial_l = match cfg.apg_eta {
            Some(eta) => (eta * lipschitz).min(LIPSCHITZ),
            None => LIPSCHITZ,
        };
        let (candidate, candidate_norm, candidate_loss) = loop {
            let step = &y - &grad.scale(1.0 / trial_l);
            let s = match shrink(&step, lambda / trial_l, 0.0) {
                Ok(s) => s,
                Err(e) => {
                    let partial = SolveResult {
                        estimate: x.clone(),
                        objective_trace: trace.clone(),
                        residual_trace: Vec::new(),
                        iterations_used: t - 1,
                        converged: false,
                        best_iterate_index: trace.len().saturating_sub(1),
                    };
                    return Err(aborted(partial, e));
                }
            };
            let value = loss.eval(&s.matrix, false)?.value;
            let accept = match cfg.apg_eta {
                None => true,
                Some(eta) => {
                    let d = &s.matrix - &y;
                    let model = at_y.value + grad.dot(&d) + 0.5 * trial_l * d.dot(&d);
                    // the quadratic model is an upper bound once L reaches L_f
                    if value <= model * (1.0 + 1e-12) + 1e-300 || trial_l >= LIPSCHITZ {
                        true
                    } else {
                        trial_l = (trial_l / eta).min(LIPSCHITZ);
                        false
                    }
                }
            };
            if accept {
                let norm = s.trace_norm();
                break (s.matrix, norm, value);
            }
        };
        lipschitz = trial_l;

        let candidate_obj = candidate_loss + lambda * candidate_norm;
        if cfg.monotone_restart && t > 1 {
            let previous_obj = loss.eval(&x, false)?.value + lambda * x_trace_norm;
            if candidate_obj > previous_obj {
                trace.push(previous_obj);
                momentum = 1.0;
                y = x.clone();
                continue;
            }
        }

        let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        let delta = &candidate - &x;
        let change = delta.frobenius() / candidate.frobenius().max(1.0);
        y = &candidate + &delta.scale((momentum - 1.0) / next_momentum);
        momentum = next_momentum;
        x = candidate;
        x_trace_norm = candidate_norm;
        trace.push(candidate_obj);

        if !candidate_obj.is_finite() {
            return Err(Error::InvalidArgument(format!("objective diverged at iteration {t}")));
        }
        if cfg.tol > 0.0 && lambda <= target * (1.0 + 1e-12) && change < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        estimate: x,
        best_iterate_index: trace.len().saturating_sub(1),
        objective_trace: trace,
        residual_trace: Vec::new(),
        iterations_used: iterations,
        converged: converged || cfg.tol == 0.0,
    })
}
