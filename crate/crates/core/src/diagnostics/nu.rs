use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::pstar::RegionMap;
use super::subspace::SubspaceT;
use crate::linalg::{singular_values, ClipSpec, DenseMatrix};
use crate::{rng, Error, Result};

/// Largest `n1·n2` for which the operator is assembled densely.
pub const NU_SIZE_LIMIT: usize = 4096;
/// Dimension above which the operator norm is found by power iteration.
const DENSE_NORM_LIMIT: usize = 1024;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// Matrix of `Z ↦ P_T P_B P_T(Z) − P_T(Z)` on column-major vectorizations,
/// where `B` is the set of entries of `m` strictly inside the thresholds.
pub fn assemble_nu_operator(m: &DenseMatrix, spec: &ClipSpec) -> Result<DenseMatrix> {
    let (n1, n2) = m.shape();
    let n = n1 * n2;
    if n > NU_SIZE_LIMIT {
        return Err(Error::TooLarge {
            what: "dense nu_B assembly (use the rho estimators for larger matrices)",
            size: n,
            limit: NU_SIZE_LIMIT,
        });
    }
    let t = SubspaceT::of(m)?;
    let mask = RegionMap::new(m, spec)?.unclipped_mask(n2);
    let mut op = DMatrix::<f64>::zeros(n, n);
    for j in 0..n2 {
        for i in 0..n1 {
            let e = DenseMatrix::zeros(n1, n2).with_entry(i, j, 1.0);
            let pt = t.project(&e);
            let out = &t.project(&pt.hadamard(&mask)) - &pt;
            op.column_mut(j * n1 + i).copy_from_slice(out.as_nalgebra().as_slice());
        }
    }
    Ok(DenseMatrix::from_nalgebra(op))
}

/// `ν_B = ‖P_T P_B P_T − P_T‖_op` for `B = {(i, j) : M_ij strictly inside the
/// thresholds}`.
pub fn compute_nu_b(m: &DenseMatrix, spec: &ClipSpec) -> Result<f64> {
    let op = assemble_nu_operator(m, spec)?;
    if op.rows() <= DENSE_NORM_LIMIT {
        return Ok(singular_values(&op)?.first().copied().unwrap_or(0.0));
    }
    Ok(power_norm(op.as_nalgebra()))
}

/// Largest absolute eigenvalue of a symmetric matrix, by power iteration on
/// its square. Stops once the eigen-residual of the Rayleigh quotient falls
/// below the tolerance.
fn power_norm(a: &DMatrix<f64>) -> f64 {
    let mut rng = rng::seeded(0);
    let mut v = DVector::from_fn(a.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    v.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = a * (a * &v);
        estimate = v.dot(&w);
        if estimate <= 0.0 {
            return 0.0;
        }
        let residual = (&w - &v * estimate).norm();
        if residual <= POWER_TOL * estimate {
            return estimate.sqrt();
        }
        v = &w / w.norm();
    }
    log::warn!("power iteration hit {POWER_MAX_ITER} iterations");
    estimate.sqrt()
}
