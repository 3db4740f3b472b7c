//! Clipped matrix completion solvers and their unclipped baselines.

mod config;
mod dtr;
mod exact;
mod fro;
pub mod presets;
mod tr;

use std::io::Write;

pub use config::{FroInit, FroUpdate, SolverConfig, Variant};
pub use dtr::solve_dtr_cmc;
pub use exact::{solve_exact_tracenorm, EXACT_SIZE_LIMIT};
pub use fro::{fro_objective, solve_fro, update_p, update_q};
pub use tr::solve_tr;

use crate::linalg::DenseMatrix;
use crate::observations::{drop_clipped, ObservedEntries};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub estimate: DenseMatrix,
    /// Objective value per recorded iterate (index 0 is the initial point where
    /// the solver has one).
    pub objective_trace: Vec<f64>,
    /// `(primal, dual)` residuals per iteration; empty for solvers without them.
    pub residual_trace: Vec<(f64, f64)>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Position in `objective_trace` of the returned iterate.
    pub best_iterate_index: usize,
}

impl SolveResult {
    /// Writes `iteration,objective,primal,dual` rows (residuals empty when absent).
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iteration,objective,primal,dual")?;
        for (k, obj) in self.objective_trace.iter().enumerate() {
            match self.residual_trace.get(k) {
                Some((p, d)) => writeln!(w, "{k},{obj:e},{p:e},{d:e}")?,
                None => writeln!(w, "{k},{obj:e},,")?,
            }
        }
        Ok(())
    }
}

/// Runs the solver selected by `cfg.variant`.
///
/// The `*-MCi` variants drop the clipped entries and then run the matching
/// unclipped solver.
pub fn solve(obs: &ObservedEntries, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    match cfg.variant {
        Variant::DtrCmc => solve_dtr_cmc(obs, cfg),
        Variant::TrCmc => solve_tr(obs, cfg, true),
        Variant::TrMc => solve_tr(obs, cfg, false),
        Variant::FroCmc => solve_fro(obs, cfg, true),
        Variant::FroMc => solve_fro(obs, cfg, false),
        Variant::TrMci => solve_tr(&drop_clipped(obs)?, cfg, false),
        Variant::FroMci => solve_fro(&drop_clipped(obs)?, cfg, false),
        Variant::ExactTraceNorm => solve_exact_tracenorm(obs, cfg),
    }
}

/// Wraps a failure that happened after some iterations completed.
pub(crate) fn aborted(partial: SolveResult, source: Error) -> Error {
    Error::Aborted {
        partial: Box::new(partial),
        source: Box::new(source),
    }
}
