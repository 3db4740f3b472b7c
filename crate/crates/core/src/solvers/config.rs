use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The solver families and their baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "DTr-CMC")]
    DtrCmc,
    #[serde(rename = "Tr-CMC")]
    TrCmc,
    #[serde(rename = "Tr-MC")]
    TrMc,
    #[serde(rename = "Fro-CMC")]
    FroCmc,
    #[serde(rename = "Fro-MC")]
    FroMc,
    /// Tr-MC after dropping the clipped entries.
    #[serde(rename = "Tr-MCi")]
    TrMci,
    /// Fro-MC after dropping the clipped entries.
    #[serde(rename = "Fro-MCi")]
    FroMci,
    #[serde(rename = "ExactTraceNorm")]
    ExactTraceNorm,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::DtrCmc,
        Variant::TrCmc,
        Variant::TrMc,
        Variant::FroCmc,
        Variant::FroMc,
        Variant::TrMci,
        Variant::FroMci,
        Variant::ExactTraceNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::DtrCmc => "DTr-CMC",
            Variant::TrCmc => "Tr-CMC",
            Variant::TrMc => "Tr-MC",
            Variant::FroCmc => "Fro-CMC",
            Variant::FroMc => "Fro-MC",
            Variant::TrMci => "Tr-MCi",
            Variant::FroMci => "Fro-MCi",
            Variant::ExactTraceNorm => "ExactTraceNorm",
        }
    }

    pub fn is_fro(self) -> bool {
        matches!(self, Variant::FroCmc | Variant::FroMc | Variant::FroMci)
    }

    pub fn is_tr(self) -> bool {
        matches!(self, Variant::TrCmc | Variant::TrMc | Variant::TrMci)
    }

    /// Whether the variant needs clipping thresholds on the observations.
    pub fn needs_thresholds(self) -> bool {
        matches!(
            self,
            Variant::DtrCmc
                | Variant::TrCmc
                | Variant::FroCmc
                | Variant::TrMci
                | Variant::FroMci
                | Variant::ExactTraceNorm
        )
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownVariant(s.to_string()))
    }
}

/// Starting factors of the alternating least squares solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FroInit {
    /// `P⁰ = Q⁰ ≈ √((C+1)/k)`, so that `P⁰Q⁰ᵀ ≈ (C+1)·E`.
    Scaled,
    /// `P⁰ = Q⁰ ≈ (C+1)/√k`, so that `P⁰Q⁰ᵀ ≈ (C+1)²·E`.
    Literal,
}

/// Which `Q` the `p`-update sums over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FroUpdate {
    /// Sums over the freshly updated `Q⁽ᵗ⁾` (Gauss–Seidel).
    Consistent,
    /// Sums over `Q⁽ᵗ⁻¹⁾` while the hinge indicator uses `Q⁽ᵗ⁾`.
    Literal,
}

/// Hyperparameters of every solver. Fields irrelevant to a variant are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSolverConfig")]
pub struct SolverConfig {
    pub variant: Variant,
    /// Trace-norm weight (DTr) or ridge weight λ (Fro).
    pub lambda1: f64,
    /// Weight on the trace norm of the clipped matrix (DTr).
    pub lambda2: f64,
    /// Factor rank k (Fro).
    pub rank_k: usize,
    /// Iteration budget T.
    pub max_iter: usize,
    /// Initial step η₀ (DTr).
    pub eta0: f64,
    /// Step decay: `η_t = η₀ · step_decay^{t−1}` (DTr).
    pub step_decay: f64,
    /// Shrunk singular values at or below this are zeroed (DTr).
    pub sv_floor: f64,
    /// Initial ADMM penalty ρ (exact solver).
    pub admm_rho: f64,
    /// Stopping tolerance; 0 runs the full budget.
    pub tol: f64,
    pub seed: u64,
    /// Geometric continuation of λ (Tr).
    pub continuation: bool,
    /// Per-iteration continuation factor (Tr).
    pub continuation_factor: f64,
    /// Final λ as a multiple of `‖P_Ω(M^c)‖_op` (Tr).
    pub lambda_target_ratio: f64,
    /// Backtracking factor for the step-size search; `None` uses the fixed
    /// step `1/L_f = 1` (Tr).
    pub apg_eta: Option<f64>,
    /// Reject iterates that increase the objective and reset momentum (Tr).
    pub monotone_restart: bool,
    pub fro_init: FroInit,
    pub fro_update: FroUpdate,
    /// Relative amplitude of the seeded perturbation of the initial factors (Fro).
    pub fro_jitter: f64,
    /// Rescale ρ when primal and dual residuals drift apart (exact solver).
    pub residual_balancing: bool,
}

impl SolverConfig {
    /// Defaults for `variant`.
    pub fn new(variant: Variant) -> Self {
        let mut cfg = SolverConfig {
            variant,
            lambda1: 0.0,
            lambda2: 0.0,
            rank_k: 10,
            max_iter: 500,
            eta0: 1.0,
            step_decay: 0.99,
            sv_floor: 1e-8,
            admm_rho: 1.0,
            tol: 0.0,
            seed: 0,
            continuation: true,
            continuation_factor: 0.7,
            lambda_target_ratio: 1e-4,
            apg_eta: None,
            monotone_restart: false,
            fro_init: FroInit::Scaled,
            fro_update: FroUpdate::Consistent,
            fro_jitter: 0.1,
            residual_balancing: true,
        };
        match variant {
            Variant::DtrCmc => {
                cfg.lambda1 = 0.2;
                cfg.lambda2 = 0.2;
                cfg.max_iter = 1000;
            }
            Variant::TrCmc | Variant::TrMc | Variant::TrMci => {
                cfg.max_iter = 500;
                cfg.tol = 1e-7;
            }
            Variant::FroCmc | Variant::FroMc | Variant::FroMci => {
                cfg.lambda1 = 0.1;
                cfg.max_iter = 200;
            }
            Variant::ExactTraceNorm => {
                cfg.max_iter = 20_000;
                cfg.tol = 1e-8;
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be a finite non-negative number"));
            }
        }
        if self.variant.is_fro() && self.rank_k == 0 {
            return bad("rank_k must be at least 1".into());
        }
        if !(self.eta0 > 0.0) || !self.eta0.is_finite() {
            return bad(format!("eta0 = {} must be positive", self.eta0));
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return bad(format!("step_decay = {} outside (0, 1]", self.step_decay));
        }
        if !(self.sv_floor >= 0.0) {
            return bad(format!("sv_floor = {} must be non-negative", self.sv_floor));
        }
        if !(self.admm_rho > 0.0) || !self.admm_rho.is_finite() {
            return bad(format!("admm_rho = {} must be positive", self.admm_rho));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol = {} must be non-negative", self.tol));
        }
        if !(self.continuation_factor > 0.0 && self.continuation_factor < 1.0) {
            return bad(format!("continuation_factor = {} outside (0, 1)", self.continuation_factor));
        }
        if !(self.lambda_target_ratio >= 0.0) || !self.lambda_target_ratio.is_finite() {
            return bad(format!("lambda_target_ratio = {} must be non-negative", self.lambda_target_ratio));
        }
        if let Some(eta) = self.apg_eta {
            if !(eta > 0.0 && eta < 1.0) {
                return bad(format!("apg_eta = {eta} outside (0, 1)"));
            }
        }
        if !(self.fro_jitter >= 0.0 && self.fro_jitter < 1.0) {
            return bad(format!("fro_jitter = {} outside [0, 1)", self.fro_jitter));
        }
        Ok(())
    }
}

/// Deserialization form: only `variant` is required, the rest default per variant.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolverConfig {
    variant: String,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    rank_k: Option<usize>,
    max_iter: Option<usize>,
    eta0: Option<f64>,
    step_decay: Option<f64>,
    sv_floor: Option<f64>,
    admm_rho: Option<f64>,
    tol: Option<f64>,
    seed: Option<u64>,
    continuation: Option<bool>,
    continuation_factor: Option<f64>,
    lambda_target_ratio: Option<f64>,
    #[serde(default, deserialize_with = "explicit_option")]
    apg_eta: Option<Option<f64>>,
    monotone_restart: Option<bool>,
    fro_init: Option<FroInit>,
    fro_update: Option<FroUpdate>,
    fro_jitter: Option<f64>,
    residual_balancing: Option<bool>,
}

/// Distinguishes an explicit `null` from an absent field.
fn explicit_option<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<Option<f64>>, D::Error> {
    Option::<f64>::deserialize(d).map(Some)
}

impl TryFrom<RawSolverConfig> for SolverConfig {
    type Error = Error;

    fn try_from(raw: RawSolverConfig) -> Result<Self> {
        let mut cfg = SolverConfig::new(raw.variant.parse()?);
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = raw.$field { cfg.$field = v; })*
            };
        }
        set!(
            lambda1,
            lambda2,
            rank_k,
            max_iter,
            eta0,
            step_decay,
            sv_floor,
            admm_rho,
            tol,
            seed,
            continuation,
            continuation_factor,
            lambda_target_ratio,
            apg_eta,
            monotone_restart,
            fro_init,
            fro_update,
            fro_jitter,
            residual_balancing
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.name()));
        }
        assert!(matches!("Fro-XYZ".parse::<Variant>(), Err(Error::UnknownVariant(_))));
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg: SolverConfig = serde_json::from_str(r#"{"variant": "Fro-CMC", "rank_k": 7}"#).unwrap();
        assert_eq!(cfg.rank_k, 7);
        assert_eq!(cfg.max_iter, 200);
        let back: SolverConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let with_eta: SolverConfig = serde_json::from_str(r#"{"variant": "Tr-CMC", "apg_eta": 0.8}"#).unwrap();
        assert_eq!(with_eta.apg_eta, Some(0.8));
    }

    #[test]
    fn config_rejections() {
        for bad in [
            r#"{"variant": "Nope"}"#,
            r#"{"variant": "DTr-CMC", "lambda1": -1}"#,
            r#"{"variant": "Fro-CMC", "rank_k": 0}"#,
            r#"{"variant": "DTr-CMC", "step_decay": 1.5}"#,
            r#"{"variant": "DTr-CMC", "colour": 1}"#,
        ] {
            assert!(serde_json::from_str::<SolverConfig>(bad).is_err(), "{bad}");
        }
    }
}
