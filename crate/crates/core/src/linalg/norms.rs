use serde::{Deserialize, Serialize};

use super::{svd, DenseMatrix};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Trace,
    Operator,
    Frobenius,
    Infinity,
}

/// Matrix norms: trace (nuclear), operator (spectral), Frobenius, entrywise max.
pub fn norm(m: &DenseMatrix, which: NormKind) -> Result<f64> {
    Ok(match which {
        NormKind::Trace => svd::singular_values(m)?.iter().sum(),
        NormKind::Operator => svd::singular_values(m)?.first().copied().unwrap_or(0.0),
        NormKind::Frobenius => m.frobenius(),
        NormKind::Infinity => m.max_abs(),
    })
}
