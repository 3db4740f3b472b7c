//! Named hyperparameter grids.

use super::{SolverConfig, Variant};

const DTR_LAMBDAS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// DTr-CMC: `T ∈ {1000, 2000}`, `η₀ ∈ {0.5, 1.0, 1.5}`, decay 0.99,
/// `ε = 1e-8`, `λ1, λ2 ∈ {0, 0.2, …, 1.0}` (216 configurations).
pub fn dtr_grid() -> Vec<SolverConfig> {
    let mut out = Vec::new();
    for max_iter in [1000, 2000] {
        for eta0 in [0.5, 1.0, 1.5] {
            for lambda1 in DTR_LAMBDAS {
                for lambda2 in DTR_LAMBDAS {
                    let mut cfg = SolverConfig::new(Variant::DtrCmc);
                    cfg.max_iter = max_iter;
                    cfg.eta0 = eta0;
                    cfg.step_decay = 0.99;
                    cfg.sv_floor = 1e-8;
                    cfg.lambda1 = lambda1;
                    cfg.lambda2 = lambda2;
                    out.push(cfg);
                }
            }
        }
    }
    out
}

fn fro_grid(variant: Variant, lambdas: &[f64], ranks: &[usize], iters: &[usize]) -> Vec<SolverConfig> {
    let mut out = Vec::new();
    for &max_iter in iters {
        for &lambda in lambdas {
            for &k in ranks {
                let mut cfg = SolverConfig::new(variant);
                cfg.lambda1 = lambda;
                cfg.rank_k = k;
                cfg.max_iter = max_iter;
                out.push(cfg);
            }
        }
    }
    out
}

/// Fro variants on synthetic data: `λ ∈ {0.01, 0.1, 0.5, 1.0}`,
/// `k ∈ {5, 10, …, 40}`, `T = 200`.
pub fn fro_synthetic_grid(variant: Variant) -> Vec<SolverConfig> {
    fro_grid(variant, &[0.01, 0.1, 0.5, 1.0], &[5, 10, 15, 20, 25, 30, 35, 40], &[200])
}

/// Fro variants on rating data: `λ ∈ {1e-1, 1e-2, 1e-3}`,
/// `k ∈ {24, 28, …, 40}`, `T ∈ {500, 1500}`.
pub fn fro_real_grid(variant: Variant) -> Vec<SolverConfig> {
    fro_grid(variant, &[1e-1, 1e-2, 1e-3], &[24, 28, 32, 36, 40], &[500, 1500])
}

/// Tr variants on rating data: `T ∈ {100, 500}` with the default continuation.
pub fn tr_real_grid(variant: Variant) -> Vec<SolverConfig> {
    [100, 500]
        .into_iter()
        .map(|max_iter| {
            let mut cfg = SolverConfig::new(variant);
            cfg.max_iter = max_iter;
            cfg
        })
        .collect()
}

/// Looks up a grid by name (`dtr`, `fro-synthetic`, `fro-real`, `tr-real`).
pub fn by_name(name: &str, variant: Variant) -> Option<Vec<SolverConfig>> {
    match name {
        "dtr" => Some(dtr_grid()),
        "fro-synthetic" => Some(fro_synthetic_grid(variant)),
        "fro-real" => Some(fro_real_grid(variant)),
        "tr-real" => Some(tr_real_grid(variant)),
        _ => None,
    }
}
