//! Squared loss, squared-hinge clipped loss and the clipped squared loss.
//!
//! All sums use compensated accumulation over entries in row-major order, so
//! values are bit-stable for a given input.

use crate::linalg::{Bound, CompensatedSum, DenseMatrix};
use crate::observations::ObservedEntries;
use crate::Result;

#[derive(Clone, Debug)]
pub struct LossValue {
    pub value: f64,
    /// Zero outside the observed entries.
    pub gradient: Option<DenseMatrix>,
}

/// Residual `X − M^c` on an entry and whether the hinge switches it off.
#[inline]
fn hinge_residual(bound: Bound, observed: f64, x: f64) -> f64 {
    let r = x - observed;
    match bound {
        Bound::Interior => r,
        // under-estimates of a ceiling-clipped value are penalised; the kink gets 0
        Bound::Ceiling => r.min(0.0),
        Bound::Floor => r.max(0.0),
    }
}

fn accumulate(
    x: &DenseMatrix,
    obs: &ObservedEntries,
    with_grad: bool,
    residual: impl Fn(Bound, f64, f64) -> f64,
) -> Result<LossValue> {
    x.ensure_shape(obs.shape())?;
    let mut sum = CompensatedSum::default();
    let mut grad = with_grad.then(|| DenseMatrix::zeros(x.rows(), x.cols()));
    for e in obs.entries() {
        let r = residual(obs.bound_of(e), e.value, x.get(e.row, e.col));
        sum.add(r * r);
        if let Some(g) = grad.as_mut() {
            g.inner_mut()[(e.row, e.col)] = r;
        }
    }
    Ok(LossValue {
        value: 0.5 * sum.value(),
        gradient: grad,
    })
}

/// `½‖P_Ω(M^c − X)‖_F²` with gradient `P_Ω(X − M^c)`.
pub fn f_mc(x: &DenseMatrix, obs: &ObservedEntries, with_grad: bool) -> Result<LossValue> {
    accumulate(x, obs, with_grad, |_, m, x| x - m)
}

/// Squared loss on unclipped entries plus the squared hinge `(M^c − X)_+²` on
/// ceiling-clipped ones (`(X − M^c)_+²` on floor-clipped ones), halved.
pub fn f_cmc(x: &DenseMatrix, obs: &ObservedEntries, with_grad: bool) -> Result<LossValue> {
    obs.require_spec()?;
    accumulate(x, obs, with_grad, hinge_residual)
}

/// `Σ_Ω (M^c − Clip(X))²`.
pub fn clipped_sq_loss(x: &DenseMatrix, obs: &ObservedEntries) -> Result<f64> {
    let spec = obs.require_spec()?;
    x.ensure_shape(obs.shape())?;
    spec.check_shape(obs.shape())?;
    Ok(obs
        .entries()
        .iter()
        .map(|e| {
            let d = e.value - spec.clip_value(e.row, e.col, x.get(e.row, e.col));
            d * d
        })
        .collect::<CompensatedSum>()
        .value())
}

/// Closed form of `2·f_cmc(X) − clipped_sq_loss(X)`: the sum of
/// `(t − X)(2M^c − t − X)` over observed entries where `X` lies past a
/// threshold `t` that clipping would move it back to, excluding the
/// threshold the entry itself was clipped at.
pub fn dominance_gap(x: &DenseMatrix, obs: &ObservedEntries) -> Result<f64> {
    let spec = obs.require_spec()?;
    x.ensure_shape(obs.shape())?;
    let mut sum = CompensatedSum::default();
    for e in obs.entries() {
        let v = x.get(e.row, e.col);
        let above = || spec.ceiling_at(e.row, e.col).filter(|&c| v >= c);
        let below = || spec.floor_at(e.row, e.col).filter(|&f| v <= f);
        let past = match obs.bound_of(e) {
            Bound::Interior => above().or_else(below),
            Bound::Ceiling => below(),
            Bound::Floor => above(),
        };
        if let Some(t) = past {
            sum.add((t - v) * (2.0 * e.value - t - v));
        }
    }
    Ok(sum.value())
}
