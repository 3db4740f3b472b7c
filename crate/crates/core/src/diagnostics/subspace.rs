use crate::linalg::{skinny_svd, DenseMatrix, DEFAULT_RANK_TOL};
use crate::{Error, Result};

/// Row and column spaces of a matrix: `T = {U Yᵀ + X Vᵀ}`.
#[derive(Clone, Debug)]
pub struct SubspaceT {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl SubspaceT {
    /// From the skinny SVD of `m`; errors on the zero matrix.
    pub fn of(m: &DenseMatrix) -> Result<Self> {
        let svd = skinny_svd(m, DEFAULT_RANK_TOL)?;
        if svd.rank() == 0 {
            return Err(Error::ZeroMatrix);
        }
        Ok(Self { u: svd.u, v: svd.v })
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    /// `P_T(Z) = UUᵀZ + ZVVᵀ − UUᵀZVVᵀ`.
    pub fn project(&self, z: &DenseMatrix) -> DenseMatrix {
        let (u, v) = (self.u.as_nalgebra(), self.v.as_nalgebra());
        let z = z.as_nalgebra();
        let ut_z = u.transpose() * z;
        let z_v = z * v;
        let left = u * &ut_z;
        let right = &z_v * v.transpose();
        let both = u * (&ut_z * v) * v.transpose();
        DenseMatrix::from_nalgebra(left + right - both)
    }

    /// `Z − P_T(Z)`.
    pub fn project_orthogonal(&self, z: &DenseMatrix) -> DenseMatrix {
        z - &self.project(z)
    }

    /// `‖P_T(e_i f_jᵀ)‖_F² = ‖Uᵀe_i‖² + ‖Vᵀf_j‖² − ‖Uᵀe_i‖²‖Vᵀf_j‖²`.
    pub fn basis_weight(&self, i: usize, j: usize) -> f64 {
        let a = row_norm_sq(&self.u, i);
        let b = row_norm_sq(&self.v, j);
        a + b - a * b
    }
}

fn row_norm_sq(m: &DenseMatrix, i: usize) -> f64 {
    (0..m.cols()).map(|k| m.get(i, k).powi(2)).sum()
}

/// Projection onto `T` (or its complement when `orthogonal`).
pub fn project_t(z: &DenseMatrix, t: &SubspaceT, orthogonal: bool) -> Result<DenseMatrix> {
    z.ensure_shape(t.shape())?;
    Ok(if orthogonal { t.project_orthogonal(z) } else { t.project(z) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coherence {
    /// `max{(n1/r)·μ^U, (n2/r)·μ^V}`.
    pub mu0: f64,
    /// `√(n1n2/r)·‖UVᵀ‖_∞`.
    pub mu1: f64,
    /// Unnormalized `max{μ^U, μ^V}`: the largest squared row norm of `U` or `V`.
    pub mu: f64,
    pub rank: usize,
}

/// Coherence parameters of `m` from its skinny SVD.
pub fn coherence(m: &DenseMatrix) -> Result<Coherence> {
    let t = SubspaceT::of(m)?;
    Ok(coherence_of(&t))
}

pub(crate) fn coherence_of(t: &SubspaceT) -> Coherence {
    let (n1, n2) = t.shape();
    let r = t.rank() as f64;
    let mu_u = (0..n1).map(|i| row_norm_sq(&t.u, i)).fold(0.0, f64::max);
    let mu_v = (0..n2).map(|j| row_norm_sq(&t.v, j)).fold(0.0, f64::max);
    let uv = t.u.matmul(&t.v.transpose());
    Coherence {
        mu0: (n1 as f64 / r * mu_u).max(n2 as f64 / r * mu_v),
        mu1: ((n1 * n2) as f64 / r).sqrt() * uv.max_abs(),
        mu: mu_u.max(mu_v),
        rank: t.rank(),
    }
}
