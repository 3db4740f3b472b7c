use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::pstar::RegionMap;
use super::subspace::{coherence_of, SubspaceT};
use crate::linalg::{norm, ClipSpec, DenseMatrix, NormKind};
use crate::{rng, Error, Result};

/// Which information-loss ratio to estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoKind {
    Fro,
    Inf,
    Op,
}

struct Problem {
    t: SubspaceT,
    regions: RegionMap,
    kind: RhoKind,
    /// Bound on the norm of `Z` in the matching norm.
    cap: f64,
    /// `√r·μ1` for the operator-norm ratio, 1 otherwise.
    prefactor: f64,
}

impl Problem {
    fn new(m: &DenseMatrix, spec: &ClipSpec, kind: RhoKind) -> Result<Self> {
        let t = SubspaceT::of(m)?;
        let regions = RegionMap::new(m, spec)?;
        let uv = t.u.matmul(&t.v.transpose());
        let (n1, n2) = m.shape();
        let (cap, prefactor) = match kind {
            RhoKind::Fro => (uv.frobenius(), 1.0),
            RhoKind::Inf => (uv.max_abs(), 1.0),
            RhoKind::Op => {
                let c = coherence_of(&t);
                (
                    ((n1 * n2) as f64).sqrt() * norm(&uv, NormKind::Operator)?,
                    (c.rank as f64).sqrt() * c.mu1,
                )
            }
        };
        Ok(Self {
            t,
            regions,
            kind,
            cap,
            prefactor,
        })
    }

    fn size(&self, z: &DenseMatrix) -> Result<f64> {
        match self.kind {
            RhoKind::Fro => Ok(z.frobenius()),
            RhoKind::Inf => Ok(z.max_abs()),
            RhoKind::Op => norm(z, NormKind::Operator),
        }
    }

    /// Rescales `z` onto the norm cap; `None` when `z` vanishes.
    fn to_cap(&self, z: DenseMatrix) -> Result<Option<DenseMatrix>> {
        let s = self.size(&z)?;
        Ok((s > 0.0 && s.is_finite()).then(|| z.scale(self.cap / s)))
    }

    fn ratio(&self, z: &DenseMatrix) -> Result<f64> {
        let pz = self.regions.apply(z);
        let diff = match self.kind {
            RhoKind::Fro | RhoKind::Inf => &self.t.project(&pz) - z,
            RhoKind::Op => &pz - z,
        };
        Ok(self.prefactor * self.size(&diff)? / self.size(z)?)
    }
}

/// Monte-Carlo lower bound on the supremum defining `ρ_F`, `ρ_∞` or `ρ_op`.
///
/// Sample `s` draws `Z = P_T(G)` for Gaussian `G` from the independent stream
/// `s` of `seed`, scales it to the norm cap and then runs `ascent_steps` of
/// coordinate ascent along `±P_T(e_i f_jᵀ)`. The best ratio over all samples
/// is returned, so the estimate never decreases as `samples` grows. When no
/// entry of `m` reaches a threshold the result is exactly 0.
pub fn estimate_rho(
    m: &DenseMatrix,
    spec: &ClipSpec,
    which: RhoKind,
    samples: usize,
    ascent_steps: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let problem = Problem::new(m, spec, which)?;
    // Z ∈ T and P* = I leave nothing to measure but round-off.
    if problem.regions.is_identity() {
        return Ok(0.0);
    }
    let (n1, n2) = m.shape();
    let mut best = 0.0f64;
    for s in 0..samples {
        let mut rng = rng::stream(seed, s as u64);
        let g = DenseMatrix::from_fn(n1, n2, |_, _| rng.sample(StandardNormal));
        let Some(mut z) = problem.to_cap(problem.t.project(&g))? else {
            continue;
        };
        let mut value = problem.ratio(&z)?;
        let mut step = 0.5;
        for _ in 0..ascent_steps {
            let (i, j) = (rng.random_range(0..n1), rng.random_range(0..n2));
            let dir = problem.t.project(&DenseMatrix::zeros(n1, n2).with_entry(i, j, 1.0));
            let dn = dir.frobenius();
            if dn == 0.0 {
                continue;
            }
            let dir = dir.scale(step * z.frobenius() / dn);
            let mut improved = false;
            for sign in [1.0, -1.0] {
                if let Some(cand) = problem.to_cap(&z + &dir.scale(sign))? {
                    let v = problem.ratio(&cand)?;
                    if v > value {
                        value = v;
                        z = cand;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(value);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix() -> DenseMatrix {
        let a = DenseMatrix::from_fn(7, 2, |i, k| 1.0 + ((i * 3 + k) % 5) as f64);
        let b = DenseMatrix::from_fn(6, 2, |j, k| 0.5 + ((j + 2 * k) % 4) as f64);
        a.matmul(&b.transpose())
    }

    #[test]
    fn lossless_clipping_gives_zero() {
        let m = sample_matrix();
        let spec = ClipSpec::ceiling(m.max() + 1.0).unwrap();
        for kind in [RhoKind::Fro, RhoKind::Inf, RhoKind::Op] {
            let v = estimate_rho(&m, &spec, kind, 5, 5, 1).unwrap();
            assert_eq!(v, 0.0, "{kind:?}");
        }
    }

    #[test]
    fn deterministic_and_monotone_in_samples() {
        let m = sample_matrix();
        let mut sorted = m.to_row_major();
        sorted.sort_by(f64::total_cmp);
        let spec = ClipSpec::ceiling(sorted[sorted.len() * 3 / 4]).unwrap();
        let a = estimate_rho(&m, &spec, RhoKind::Fro, 1, 3, 9).unwrap();
        assert_eq!(a, estimate_rho(&m, &spec, RhoKind::Fro, 1, 3, 9).unwrap());
        let mut last = 0.0;
        for n in [10, 40, 100] {
            let v = estimate_rho(&m, &spec, RhoKind::Fro, n, 3, 9).unwrap();
            assert!(v >= last);
            last = v;
        }
        assert!(last > 0.0);
    }

    #[test]
    fn zero_matrix_rejected() {
        let spec = ClipSpec::ceiling(1.0).unwrap();
        assert!(matches!(
            estimate_rho(&DenseMatrix::zeros(3, 3), &spec, RhoKind::Fro, 1, 0, 0),
            Err(Error::ZeroMatrix)
        ));
    }
}
