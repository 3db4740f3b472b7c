use serde::Serialize;

use super::subspace::coherence;
use crate::linalg::{clip, norm, ClipSpec, DenseMatrix, NormKind};
use crate::{Error, Result};

/// Terms of the error decomposition for an estimate `M̂` of `M`, all
/// normalized by `√(n1n2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem2Bounds {
    /// `‖M − Clip(M)‖_F`: how much the data exceed the thresholds.
    pub b1: f64,
    /// `‖M̂ − Clip(M̂)‖_F`: how much the estimate exceeds them.
    pub b2: f64,
    /// `‖Clip(M̂) − Clip(M)‖_F`: error on the clipped scale.
    pub b3: f64,
    /// `‖M̂ − M‖_F`.
    pub lhs: f64,
    /// `(√β1 + √β2)·k^{1/4}·(n1n2)^{−1/4}`, the cap on `b1` and `b2` inside
    /// the hypothesis space.
    pub b12_cap: f64,
    /// `μ(Clip(M̂))`, used in place of the supremum over the hypothesis space.
    /// This is a plug-in value, not the quantity the cap is stated with.
    pub mu_plugin: Option<f64>,
    /// `√(c0·2μ²β2/p)·((pk(n1+n2) + k log(n1+n2))/(n1n2))^{1/4}` with the
    /// plug-in `μ`; `c0` is an unspecified universal constant supplied by the
    /// caller.
    pub b3_cap: Option<f64>,
}

/// Whether `‖X‖_tr² ≤ β1√(k n1 n2)` and `‖Clip(X)‖_tr² ≤ β2√(k n1 n2)`.
pub fn in_hypothesis_space(x: &DenseMatrix, spec: &ClipSpec, beta1: f64, beta2: f64, k: usize) -> Result<bool> {
    let scale = ((k * x.rows() * x.cols()) as f64).sqrt();
    let tr = norm(x, NormKind::Trace)?;
    let tr_clip = norm(&clip(x, spec), NormKind::Trace)?;
    Ok(tr * tr <= beta1 * scale && tr_clip * tr_clip <= beta2 * scale)
}

#[allow(clippy::too_many_arguments)]
pub fn theorem2_bounds(
    m: &DenseMatrix,
    m_hat: &DenseMatrix,
    spec: &ClipSpec,
    beta1: f64,
    beta2: f64,
    k: usize,
    p: f64,
    c0: f64,
) -> Result<Theorem2Bounds> {
    m_hat.ensure_shape(m.shape())?;
    spec.check_shape(m.shape())?;
    if [beta1, beta2, c0].iter().any(|v| !(*v >= 0.0)) || !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument("beta1, beta2, c0 must be ≥ 0 and p in [0, 1]".into()));
    }
    let (n1, n2) = m.shape();
    let prod = (n1 * n2) as f64;
    let root = prod.sqrt();
    let clip_m = clip(m, spec);
    let clip_hat = clip(m_hat, spec);
    let kf = k as f64;
    let mu_plugin = match coherence(&clip_hat) {
        Ok(c) => Some(c.mu),
        Err(Error::ZeroMatrix) => None,
        Err(e) => return Err(e),
    };
    let b3_cap = mu_plugin.filter(|_| p > 0.0).map(|mu| {
        let inner = (p * kf * (n1 + n2) as f64 + kf * ((n1 + n2) as f64).ln()) / prod;
        (c0 * 2.0 * mu * mu * beta2 / p).sqrt() * inner.powf(0.25)
    });
    Ok(Theorem2Bounds {
        b1: (m - &clip_m).frobenius() / root,
        b2: (m_hat - &clip_hat).frobenius() / root,
        b3: (&clip_hat - &clip_m).frobenius() / root,
        lhs: (m_hat - m).frobenius() / root,
        b12_cap: (beta1.sqrt() + beta2.sqrt()) * kf.powf(0.25) * prod.powf(-0.25),
        mu_plugin,
        b3_cap,
    })
}
