//! Recovery diagnostics: coherence, the information subspace `T`, the
//! characteristic operator `P*`, `ν_B`, the `ρ` information-loss estimates,
//! sample-complexity terms and the error decomposition of the clipped
//! trace-norm estimator.

mod bounds;
mod nu;
mod pmin;
mod pstar;
mod rho;
mod subspace;

use serde::Serialize;

pub use bounds::{in_hypothesis_space, theorem2_bounds, Theorem2Bounds};
pub use nu::{assemble_nu_operator, compute_nu_b, NU_SIZE_LIMIT};
pub use pmin::{beta_floor, evaluate_pmin, PminInputs, PminTerms};
pub use pstar::apply_p_star;
pub use rho::{estimate_rho, RhoKind};
pub use subspace::{coherence, project_t, Coherence, SubspaceT};

use crate::linalg::{ClipSpec, DenseMatrix};
use crate::{Error, Result};

/// Default `β` of the sample-complexity bound.
pub const DEFAULT_BETA: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagnoseOptions {
    pub samples: usize,
    pub ascent_steps: usize,
    pub seed: u64,
    pub beta: f64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            samples: 200,
            ascent_steps: 20,
            seed: 0,
            beta: DEFAULT_BETA,
        }
    }
}

/// Every diagnostic for one matrix and threshold.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub mu: f64,
    /// `None` above [`NU_SIZE_LIMIT`].
    pub nu_b: Option<f64>,
    pub rho_fro: f64,
    pub rho_inf: f64,
    pub rho_op: f64,
    /// The `ρ` values are Monte-Carlo lower bounds of suprema.
    pub rho_lower_bound: bool,
    /// `Err` text when a recovery condition fails or `ν_B` is unavailable.
    pub pmin: std::result::Result<PminTerms, String>,
}

pub fn diagnose(m: &DenseMatrix, spec: &ClipSpec, opts: &DiagnoseOptions) -> Result<Diagnostics> {
    let c = coherence(m)?;
    let (n1, n2) = m.shape();
    let nu_b = match compute_nu_b(m, spec) {
        Ok(v) => Some(v),
        Err(Error::TooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    let rho = |kind| estimate_rho(m, spec, kind, opts.samples, opts.ascent_steps, opts.seed);
    let (rho_fro, rho_inf, rho_op) = (rho(RhoKind::Fro)?, rho(RhoKind::Inf)?, rho(RhoKind::Op)?);
    let pmin = match nu_b {
        None => Err("nu_b unavailable at this size".to_string()),
        Some(nu_b) => evaluate_pmin(&PminInputs {
            n1,
            n2,
            r: c.rank,
            mu0: c.mu0,
            mu1: c.mu1,
            rho_fro,
            rho_inf,
            rho_op,
            nu_b,
            beta: opts.beta,
        })
        .map_err(|e| e.to_string()),
    };
    Ok(Diagnostics {
        n1,
        n2,
        rank: c.rank,
        mu0: c.mu0,
        mu1: c.mu1,
        mu: c.mu,
        nu_b,
        rho_fro,
        rho_inf,
        rho_op,
        rho_lower_bound: true,
        pmin,
    })
}
