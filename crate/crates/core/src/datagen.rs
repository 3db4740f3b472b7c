//! Synthetic low-rank non-negative matrices and the clip/split pipeline.
//!
//! A uniform random matrix with entries in `{1, …, L}` is approximated by a
//! rank-`r` non-negative factorization; the product is the ground truth. Draws
//! are repeated until the product has numerical rank exactly `r`.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::linalg::{singular_values, ClipSpec, DenseMatrix};
use crate::observations::{split_entries, ObservedEntries};
use crate::{rng, Error, Result};

const NMF_EPS: f64 = 1e-12;
/// Relative singular-value cut-off used for the exact-rank check.
pub const RANK_TOL: f64 = 1e-10;

fn default_nmf_iters() -> usize {
    500
}

fn default_attempts() -> usize {
    20
}

/// Parameters of one synthetic instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    /// Entries of the raw matrix are drawn from `{1, …, l}`.
    pub l: u32,
    /// Fraction of entries in the training part; validation and test share
    /// the rest equally.
    pub p: f64,
    /// Clipping threshold applied to the training entries; `None` disables clipping.
    pub c: Option<f64>,
    pub seed: u64,
    /// Draw the raw matrix uniformly from `[1, l]` instead of integers.
    #[serde(default)]
    pub continuous: bool,
    #[serde(default = "default_nmf_iters")]
    pub nmf_iters: usize,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

impl SynthSpec {
    pub fn new(n1: usize, n2: usize, r: usize, l: u32, p: f64, c: Option<f64>, seed: u64) -> Self {
        Self {
            n1,
            n2,
            r,
            l,
            p,
            c,
            seed,
            continuous: false,
            nmf_iters: default_nmf_iters(),
            max_attempts: default_attempts(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::InvalidDimensions(format!("{}x{}", self.n1, self.n2)));
        }
        if self.r == 0 || self.r > self.n1.min(self.n2) {
            return Err(Error::InvalidArgument(format!("rank {} outside [1, min(n1, n2)]", self.r)));
        }
        if self.l == 0 {
            return Err(Error::InvalidArgument("L must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.c.is_some_and(f64::is_nan) {
            return Err(Error::InvalidArgument("C is NaN".into()));
        }
        Ok(())
    }

    /// `(p, (1 − p)/2, (1 − p)/2)`.
    pub fn split_ratios(&self) -> (f64, f64, f64) {
        let rest = (1.0 - self.p) / 2.0;
        (self.p, rest, 1.0 - self.p - rest)
    }
}

/// Non-negative factors `w` (n1×r) and `h` (r×n2) with the squared
/// reconstruction error after every iteration.
#[derive(Clone, Debug)]
pub struct Nmf {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
    pub errors: Vec<f64>,
}

/// Multiplicative-update NMF minimizing `‖M − WH‖_F²`, with a seeded uniform
/// initialization scaled to the mean of `m`.
pub fn nmf_factorize(m: &DenseMatrix, r: usize, iters: usize, seed: u64) -> Result<Nmf> {
    if let Some((i, j, _)) = m.iter().find(|&(_, _, v)| v < 0.0) {
        return Err(Error::InvalidArgument(format!("negative entry at ({i}, {j})")));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let (n1, n2) = m.shape();
    let v = m.as_nalgebra();
    let mean = v.sum() / (n1 * n2).max(1) as f64;
    let scale = (mean / r as f64).sqrt().max(NMF_EPS);
    let mut rng = rng::seeded(seed);
    let mut w = DMatrix::from_fn(n1, r, |_, _| scale * rng.random_range(0.5..1.5));
    let mut h = DMatrix::from_fn(r, n2, |_, _| scale * rng.random_range(0.5..1.5));
    let mut errors = Vec::with_capacity(iters);
    for _ in 0..iters {
        let wt = w.transpose();
        let num = &wt * v;
        let den = (&wt * &w) * &h;
        h.zip_zip_apply(&num, &den, |x, n, d| *x *= n / (d + NMF_EPS));
        let num = v * h.transpose();
        let den = &w * (&h * h.transpose());
        w.zip_zip_apply(&num, &den, |x, n, d| *x *= n / (d + NMF_EPS));
        errors.push((v - &w * &h).norm_squared());
    }
    Ok(Nmf {
        w: DenseMatrix::from_nalgebra(w),
        h: DenseMatrix::from_nalgebra(h),
        errors,
    })
}

/// Numerical rank: singular values above `RANK_TOL · σ_max`.
pub fn numerical_rank(m: &DenseMatrix) -> Result<usize> {
    let s = singular_values(m)?;
    let top = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x > 0.0 && x > RANK_TOL * top).count())
}

/// Ground truth of `spec` and the number of draws it took.
pub fn generate_truth(spec: &SynthSpec) -> Result<(DenseMatrix, usize)> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let l = spec.l as f64;
    for attempt in 1..=spec.max_attempts {
        let raw = DenseMatrix::from_fn(spec.n1, spec.n2, |_, _| {
            if spec.continuous {
                rng.random_range(1.0..=l)
            } else {
                rng.random_range(1..=spec.l) as f64
            }
        });
        let nmf = nmf_factorize(&raw, spec.r, spec.nmf_iters, rng.random())?;
        let m = nmf.w.matmul(&nmf.h);
        if numerical_rank(&m)? == spec.r {
            return Ok((m, attempt));
        }
        log::debug!("synthetic draw {attempt} fell short of rank {}", spec.r);
    }
    Err(Error::RankNotReached {
        target: spec.r,
        attempts: spec.max_attempts,
    })
}

#[derive(Clone, Debug)]
pub struct SyntheticInstance {
    pub truth: DenseMatrix,
    /// Training entries, clipped and carrying the thresholds when `C` is set.
    pub train: ObservedEntries,
    /// Unclipped validation entries.
    pub val: ObservedEntries,
    /// Unclipped test entries.
    pub test: ObservedEntries,
    pub spec: Option<ClipSpec>,
    /// Fraction of all entries of the truth strictly above `C`.
    pub clipping_rate: f64,
    pub attempts: usize,
    /// Some part of the split is empty.
    pub degenerate: bool,
}

/// Splits `truth` with ratios `(p, (1−p)/2, (1−p)/2)` and clips the training part.
pub fn instance_from_truth(truth: DenseMatrix, p: f64, c: Option<f64>, seed: u64) -> Result<SyntheticInstance> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    let rest = (1.0 - p) / 2.0;
    let split = split_entries(&truth, (p, rest, 1.0 - p - rest), seed)?;
    let spec = c.map(ClipSpec::ceiling).transpose()?;
    let train = match &spec {
        Some(s) => split.train.clipped_by(s.clone())?,
        None => split.train,
    };
    let clipping_rate = match c {
        Some(c) => truth.iter().filter(|&(_, _, v)| v > c).count() as f64 / truth.len().max(1) as f64,
        None => 0.0,
    };
    Ok(SyntheticInstance {
        truth,
        train,
        val: split.val,
        test: split.test,
        spec,
        clipping_rate,
        attempts: 0,
        degenerate: split.degenerate,
    })
}

/// Seed of the train/validation/test split belonging to generator seed `seed`,
/// drawn from a stream independent of the generator.
pub fn split_seed(seed: u64) -> u64 {
    rng::stream(seed, 1).random()
}

/// Ground truth, split and clipping for `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticInstance> {
    let (truth, attempts) = generate_truth(spec)?;
    let mut inst = instance_from_truth(truth, spec.p, spec.c, split_seed(spec.seed))?;
    inst.attempts = attempts;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmf_recovers_outer_product() {
        let a: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let b: Vec<f64> = (0..5).map(|j| 0.5 + j as f64 * 0.25).collect();
        let m = DenseMatrix::from_fn(6, 5, |i, j| a[i] * b[j]);
        let nmf = nmf_factorize(&m, 1, 500, 3).unwrap();
        let rel = (&nmf.w.matmul(&nmf.h) - &m).frobenius() / m.frobenius();
        assert!(rel <= 1e-6, "rel {rel}");
        assert!(nmf.w.min() >= 0.0 && nmf.h.min() >= 0.0);
    }

    #[test]
    fn nmf_error_is_monotone() {
        let mut rng = rng::seeded(4);
        let m = DenseMatrix::from_fn(12, 9, |_, _| rng.random_range(1..=15) as f64);
        let nmf = nmf_factorize(&m, 3, 300, 5).unwrap();
        for w in nmf.errors.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
        let wider = nmf_factorize(&m, 6, 300, 5).unwrap();
        assert!(wider.errors.last() < nmf.errors.last());
    }

    #[test]
    fn nmf_rejects_negative_input() {
        let m = DenseMatrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        assert!(nmf_factorize(&m, 1, 10, 0).is_err());
    }

    #[test]
    fn figure_two_construction() {
        let spec = SynthSpec::new(50, 80, 2, 15, 1.0, Some(10.0), 0);
        let inst = generate_synthetic(&spec).unwrap();
        assert_eq!(numerical_rank(&inst.truth).unwrap(), 2);
        assert!(inst.truth.min() >= 0.0);
        assert_eq!(inst.train.len(), 4000);
        assert!(inst.clipping_rate > 0.0);
        assert!(inst.train.values().all(|v| v <= 10.0));
        assert!(inst.degenerate);
    }

    #[test]
    fn no_threshold_means_no_clipping() {
        let spec = SynthSpec::new(20, 30, 3, 15, 0.8, None, 1);
        let inst = generate_synthetic(&spec).unwrap();
        assert_eq!(inst.clipping_rate, 0.0);
        assert!(inst.train.entries().iter().all(|e| e.value == inst.truth.get(e.row, e.col)));
        let parts = inst.train.index_set().union(&inst.val.index_set()).union(&inst.test.index_set());
        assert_eq!(parts.len(), 600);
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec::new(15, 12, 2, 10, 0.8, Some(6.0), 7);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn spec_validation() {
        assert!(SynthSpec::new(5, 5, 6, 15, 0.8, None, 0).validate().is_err());
        assert!(SynthSpec::new(5, 5, 2, 0, 0.8, None, 0).validate().is_err());
        assert!(SynthSpec::new(5, 5, 2, 15, 1.2, None, 0).validate().is_err());
        assert_eq!(SynthSpec::new(5, 5, 2, 15, 0.8, None, 0).split_ratios().0, 0.8);
    }
}
