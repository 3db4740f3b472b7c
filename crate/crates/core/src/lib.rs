//! Recovery of low-rank matrices from clipped observations.
//!
//! Observed entries of a low-rank matrix `M` are only available after an
//! elementwise clip `min(C, M_ij)` (optionally also a floor). The crate provides
//! the exact trace-norm program with one-sided constraints on clipped entries,
//! three practical solvers that replace the squared loss by a squared hinge on
//! clipped entries (DTr-CMC, Tr-CMC, Fro-CMC) together with their ordinary
//! matrix-completion counterparts, recovery diagnostics (coherence, the
//! information subspace, `nu_B`, `rho` estimates, sample-complexity terms), the
//! NMF-based synthetic generator, rating-file loaders and the evaluation
//! protocols (rel-RMSE, f1 tasks, grid search).
//!
//! All stochastic routines take explicit seeds and use [`rng::Rng`]
//! (ChaCha8), so results are reproducible across platforms.

pub mod datagen;
pub mod datasets;
pub mod diagnostics;
mod error;
pub mod eval;
pub mod linalg;
pub mod losses;
pub mod observations;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{ClipSpec, DenseMatrix, NormKind, SkinnySvd};
pub use observations::{IndexSet, Observation, ObservedEntries};
pub use solvers::{SolveResult, SolverConfig, Variant};
