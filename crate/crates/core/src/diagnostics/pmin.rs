use serde::Serialize;

use crate::observations::golfing_partitions;
use crate::{Error, Result};

/// Inputs of the sample-complexity evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PminInputs {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub mu0: f64,
    pub mu1: f64,
    pub rho_fro: f64,
    pub rho_inf: f64,
    pub rho_op: f64,
    pub nu_b: f64,
    pub beta: f64,
}

/// The individual lower bounds on the observation probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PminTerms {
    pub k0: usize,
    pub p_fro: f64,
    pub p_op1: f64,
    pub p_op2: f64,
    pub p_inf: f64,
    pub p_main: f64,
    /// `max{1/(n1n2), p_fro, p_op1, p_op2, p_inf, p_main}` before capping at 1.
    pub uncapped: f64,
    /// `min{1, uncapped}`.
    pub overall: f64,
    /// Failure probability
    /// `k0(e^{1/4}(n1n2)^{−β} + 2(n1n2)^{1−β} + (n1+n2)^{1−β}) + 2(n1n2)^{1−β}`.
    pub failure_prob: f64,
}

impl PminTerms {
    /// `(name, value)` pairs in a fixed order, for reports.
    pub fn named(&self) -> [(&'static str, f64); 9] {
        [
            ("k0", self.k0 as f64),
            ("p_fro", self.p_fro),
            ("p_op1", self.p_op1),
            ("p_op2", self.p_op2),
            ("p_inf", self.p_inf),
            ("p_main", self.p_main),
            ("p_uncapped", self.uncapped),
            ("p_min", self.overall),
            ("failure_prob", self.failure_prob),
        ]
    }
}

/// Smallest `β` admitted: `max{1, 1/(4 log(n1n2)), 1 + log 2 / log(n1n2)}`.
pub fn beta_floor(n1: usize, n2: usize) -> f64 {
    let l = ((n1 * n2) as f64).ln();
    1f64.max(1.0 / (4.0 * l)).max(1.0 + 2f64.ln() / l)
}

/// Evaluates the exact-recovery sample-complexity terms.
///
/// Errors when `ρ_F ≥ ½`, `ρ_op ≥ ¼`, `ρ_∞ ≥ ½` or `ν_B ≥ ½` (the bound is
/// undefined) or when `β` does not exceed [`beta_floor`].
pub fn evaluate_pmin(inp: &PminInputs) -> Result<PminTerms> {
    let PminInputs {
        n1,
        n2,
        r,
        mu0,
        mu1,
        rho_fro,
        rho_inf,
        rho_op,
        nu_b,
        beta,
    } = *inp;
    if n1 < 2 || n2 < 2 || r == 0 {
        return Err(Error::InvalidArgument(format!("need n1, n2 ≥ 2 and r ≥ 1, got {n1}x{n2}, r = {r}")));
    }
    for (name, v, limit) in [
        ("rho_fro", rho_fro, 0.5),
        ("rho_op", rho_op, 0.25),
        ("rho_inf", rho_inf, 0.5),
        ("nu_b", nu_b, 0.5),
    ] {
        if !(v < limit) {
            return Err(Error::RecoveryConditionViolated(format!(
                "{name} = {v} is not below {limit}; bound undefined"
            )));
        }
    }
    let floor = beta_floor(n1, n2);
    if !(beta > floor) {
        return Err(Error::InvalidArgument(format!("beta = {beta} must exceed {floor}")));
    }

    let k0 = golfing_partitions(n1, n2, r);
    let (a, b, rf) = (n1 as f64, n2 as f64, r as f64);
    let k = k0 as f64;
    let prod = a * b;
    let log_prod = prod.ln();
    let log_sum = (a + b).ln();
    let spread = (a + b) * log_prod / prod;

    let p_fro = 8.0 * k * mu0 * beta * rf / (0.5 - rho_fro).powi(2) * spread;
    let p_op1 = 8.0 * k * beta / (3.0 * (0.25 - rho_op).powi(2)) * log_sum / a.max(b);
    let p_op2 = 8.0 * k * beta * rf * mu1 * mu1 / (3.0 * (0.25 - rho_op).powi(2)) * a.max(b) * log_sum / prod;
    let p_inf = 8.0 * k * mu0 * rf * beta / (3.0 * (0.5 - rho_inf).powi(2)) * spread;
    let p_main = 8.0 * beta * rf * mu0 / (3.0 * (0.5 - nu_b).powi(2)) * spread;
    let uncapped = [1.0 / prod, p_fro, p_op1, p_op2, p_inf, p_main]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let failure_prob = k * ((0.25f64).exp() * prod.powf(-beta) + 2.0 * prod.powf(1.0 - beta) + (a + b).powf(1.0 - beta))
        + 2.0 * prod.powf(1.0 - beta);

    Ok(PminTerms {
        k0,
        p_fro,
        p_op1,
        p_op2,
        p_inf,
        p_main,
        uncapped,
        overall: uncapped.min(1.0),
        failure_prob,
    })
}
