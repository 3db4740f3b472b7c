//! Skinny SVD and the trace-norm proximal map.
//!
//! Backed by `nalgebra`'s Golub–Kahan bidiagonalisation with implicit-shift QR,
//! which is deterministic for a fixed input.

use nalgebra::DMatrix;

use super::DenseMatrix;
use crate::{Error, Result};

/// Relative cut-off below which singular values are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

const SVD_MAX_ITER: usize = 10_000;
/// Deflation tolerance of the bidiagonal QR sweeps; `ε` itself sends some
/// inputs down a less accurate path (σ₁ off by 2e-10 on a 9×13 rank-3 case).
const SVD_EPS: f64 = 5.0 * f64::EPSILON;

/// `m = u · diag(sigma) · vᵀ` with `sigma` positive and non-increasing.
#[derive(Clone, Debug)]
pub struct SkinnySvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SkinnySvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let us = scale_columns(&self.u, &self.sigma);
        us.matmul(&self.v.transpose())
    }

    /// `U Vᵀ`, the sign matrix of the decomposition.
    pub fn uv_t(&self) -> DenseMatrix {
        self.u.matmul(&self.v.transpose())
    }

    pub fn trace_norm(&self) -> f64 {
        self.sigma.iter().sum()
    }
}

pub(crate) fn scale_columns(m: &DenseMatrix, s: &[f64]) -> DenseMatrix {
    m.map_indexed(|_, j, v| v * s[j])
}

struct FullSvd {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v_t: DMatrix<f64>,
}

fn full_svd(m: &DenseMatrix, vectors: bool) -> Result<FullSvd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(FullSvd {
            u: DMatrix::zeros(rows, 0),
            sigma: Vec::new(),
            v_t: DMatrix::zeros(0, cols),
        });
    }
    let svd = m
        .as_nalgebra()
        .clone()
        .try_svd(vectors, vectors, SVD_EPS, SVD_MAX_ITER)
        .ok_or(Error::SvdNonConvergence {
            rows,
            cols,
            max_iter: SVD_MAX_ITER,
        })?;
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::SvdNonConvergence {
            rows,
            cols,
            max_iter: SVD_MAX_ITER,
        });
    }
    Ok(FullSvd {
        u: svd.u.unwrap_or_else(|| DMatrix::zeros(rows, 0)),
        sigma,
        v_t: svd.v_t.unwrap_or_else(|| DMatrix::zeros(0, cols)),
    })
}

/// Singular values of `m`, non-increasing, including zeros (`min(rows, cols)` values).
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(full_svd(m, false)?.sigma)
}

/// Skinny SVD keeping singular values strictly above `rank_tol · σ_max`.
pub fn skinny_svd(m: &DenseMatrix, rank_tol: f64) -> Result<SkinnySvd> {
    let full = full_svd(m, true)?;
    let smax = full.sigma.first().copied().unwrap_or(0.0);
    let r = full
        .sigma
        .iter()
        .take_while(|&&s| s > 0.0 && s > rank_tol * smax)
        .count();
    Ok(SkinnySvd {
        u: DenseMatrix::from_nalgebra(full.u.columns(0, r).into_owned()),
        sigma: full.sigma[..r].to_vec(),
        v: DenseMatrix::from_nalgebra(full.v_t.rows(0, r).transpose()),
    })
}

/// Result of a singular value shrinkage.
#[derive(Clone, Debug)]
pub struct Shrunk {
    pub matrix: DenseMatrix,
    /// Singular values kept after shrinkage (positive, non-increasing).
    pub sigma: Vec<f64>,
}

impl Shrunk {
    pub fn trace_norm(&self) -> f64 {
        self.sigma.iter().sum()
    }
}

/// `U · diag(s) · Vᵀ` where `s_i = σ_i − tau` if that exceeds `floor`, else 0.
pub(crate) fn shrink(m: &DenseMatrix, tau: f64, floor: f64) -> Result<Shrunk> {
    let full = full_svd(m, true)?;
    let kept: Vec<f64> = full
        .sigma
        .iter()
        .map(|s| s - tau)
        .take_while(|&s| s > floor)
        .collect();
    let r = kept.len();
    let mut us = full.u.columns(0, r).into_owned();
    for (j, s) in kept.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    let matrix = &us * full.v_t.rows(0, r);
    Ok(Shrunk {
        matrix: DenseMatrix::from_nalgebra(matrix),
        sigma: kept,
    })
}

/// Proximal map of `tau‖·‖_tr`: soft-thresholds the singular values of `m`.
pub fn svt_prox(m: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("svt threshold {tau} < 0")));
    }
    if tau == 0.0 {
        return Ok(m.clone());
    }
    Ok(shrink(m, tau, 0.0)?.matrix)
}

#[cfg(test)]
mod tests {
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::rng;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = rng::seeded(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn assert_orthonormal_columns(m: &DenseMatrix) {
        let g = m.tr_matmul(m);
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g.get(i, j) - expect).abs() < 1e-10, "gram[{i},{j}] = {}", g.get(i, j));
            }
        }
    }

    #[test]
    fn diagonal_case() {
        let m = DenseMatrix::from_diagonal(&[3.0, 1.0]);
        let svd = skinny_svd(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(svd.sigma.len(), 2);
        assert!((svd.sigma[0] - 3.0).abs() < 1e-14);
        assert!((svd.sigma[1] - 1.0).abs() < 1e-14);
        // u = v = I up to a simultaneous sign flip of each pair
        for k in 0..2 {
            assert!((svd.u.get(k, k).abs() - 1.0).abs() < 1e-14);
            assert!((svd.u.get(k, k) * svd.v.get(k, k) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn all_ones_is_rank_one() {
        let m = DenseMatrix::filled(3, 4, 1.0);
        let svd = skinny_svd(&m, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(svd.rank(), 1);
        assert!((svd.sigma[0] - 12f64.sqrt()).abs() < 1e-12);
        for i in 0..3 {
            assert!((svd.u.get(i, 0).abs() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
        for j in 0..4 {
            assert!((svd.v.get(j, 0).abs() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        for (rows, cols, seed) in [(6, 5, 1), (5, 6, 2), (7, 7, 3)] {
            let g = gaussian(rows, cols, seed);
            let svd = skinny_svd(&g, DEFAULT_RANK_TOL).unwrap();
            let err = (&svd.reconstruct() - &g).frobenius();
            assert!(err <= 1e-9 * g.frobenius(), "err {err}");
            assert_orthonormal_columns(&svd.u);
            assert_orthonormal_columns(&svd.v);
            assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn zero_matrix_has_empty_decomposition() {
        let svd = skinny_svd(&DenseMatrix::zeros(3, 2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(svd.rank(), 0);
        assert_eq!(svd.reconstruct(), DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn rank_tolerance_drops_small_modes() {
        let m = DenseMatrix::from_diagonal(&[1.0, 1e-14, 0.0]);
        assert_eq!(skinny_svd(&m, DEFAULT_RANK_TOL).unwrap().rank(), 1);
        assert_eq!(skinny_svd(&m, 1e-16).unwrap().rank(), 2);
    }

    #[test]
    fn svt_diagonal_closed_form() {
        let m = DenseMatrix::from_diagonal(&[3.0, 1.0]);
        let out = svt_prox(&m, 2.0).unwrap();
        let expect = DenseMatrix::from_diagonal(&[1.0, 0.0]);
        assert!((&out - &expect).max_abs() < 1e-14);
        assert_eq!(svt_prox(&m, 0.0).unwrap(), m);
        assert!(svt_prox(&m, -1.0).is_err());
    }

    #[test]
    fn svt_shrinks_singular_values() {
        let g = gaussian(5, 7, 9);
        let before = singular_values(&g).unwrap();
        let after = singular_values(&svt_prox(&g, 0.8).unwrap()).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!((a - (b - 0.8).max(0.0)).abs() < 1e-9);
        }
    }
}
