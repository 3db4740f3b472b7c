//! Dense matrices, skinny SVD, trace-norm prox, clipping and norms.

mod clip;
pub mod io;
mod matrix;
mod norms;
mod sum;
mod svd;

pub use clip::{at_threshold, clip, Bound, ClipSpec, THRESHOLD_RTOL};
pub use matrix::DenseMatrix;
pub use norms::{norm, NormKind};
pub use sum::{compensated_sum, CompensatedSum};
pub use svd::{singular_values, skinny_svd, svt_prox, Shrunk, SkinnySvd, DEFAULT_RANK_TOL};

pub(crate) use svd::shrink;
