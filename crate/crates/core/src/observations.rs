//! Observed entries with clipping metadata, sampling schemes and index-set
//! projections.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::linalg::{Bound, ClipSpec, DenseMatrix};
use crate::{rng, Error, Result};

/// A set of matrix indices, iterated in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSet {
    rows: usize,
    cols: usize,
    members: BTreeSet<(usize, usize)>,
}

impl IndexSet {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            members: BTreeSet::new(),
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            members: (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).collect(),
        }
    }

    pub fn from_indices(
        rows: usize,
        cols: usize,
        indices: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut set = Self::empty(rows, cols);
        for (i, j) in indices {
            set.insert(i, j)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, i: usize, j: usize) -> Result<bool> {
        if i >= self.rows || j >= self.cols {
            return Err(Error::InvalidObservation(format!(
                "index ({i}, {j}) outside {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(self.members.insert((i, j)))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.members.contains(&(i, j))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.members.iter().copied()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        IndexSet {
            rows: self.rows,
            cols: self.cols,
            members: self.members.union(&other.members).copied().collect(),
        }
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.members.is_disjoint(&other.members)
    }

    /// Indicator matrix of the set.
    pub fn mask(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        {
            let inner = m.inner_mut();
            for &(i, j) in &self.members {
                inner[(i, j)] = 1.0;
            }
        }
        m
    }

    /// Writes sorted `i,j` lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, j) in self.iter() {
            writeln!(w, "{i},{j}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(rows: usize, cols: usize, r: R) -> Result<Self> {
        let mut set = Self::empty(rows, cols);
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse = || -> Option<(usize, usize)> {
                let (a, b) = line.split_once(',')?;
                Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
            };
            let (i, j) = parse().ok_or_else(|| Error::Parse {
                path: "<index set>".into(),
                line: n + 1,
                message: format!("expected `i,j`, got `{line}`"),
            })?;
            set.insert(i, j)?;
        }
        Ok(set)
    }
}

/// `P_S(m)`: keeps entries in `s`, zeroes the rest.
pub fn project(m: &DenseMatrix, s: &IndexSet) -> Result<DenseMatrix> {
    m.ensure_shape(s.shape())?;
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    {
        let inner = out.inner_mut();
        for (i, j) in s.iter() {
            inner[(i, j)] = m.get(i, j);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Sparse observations `{(i, j, M^c_ij)}` of an `rows × cols` matrix.
///
/// Entries are kept sorted in row-major order and unique. When a
/// [`ClipSpec`] is attached every value respects its thresholds, and values
/// sitting at a threshold are the clipped entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedEntries {
    rows: usize,
    cols: usize,
    entries: Vec<Observation>,
    spec: Option<ClipSpec>,
}

impl ObservedEntries {
    pub fn new(
        rows: usize,
        cols: usize,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
        spec: Option<ClipSpec>,
    ) -> Result<Self> {
        let mut entries: Vec<Observation> = triples
            .into_iter()
            .map(|(row, col, value)| Observation { row, col, value })
            .collect();
        for e in &entries {
            if e.row >= rows || e.col >= cols {
                return Err(Error::InvalidObservation(format!(
                    "index ({}, {}) outside {rows}x{cols}",
                    e.row, e.col
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::NonFinite { row: e.row, col: e.col });
            }
        }
        entries.sort_by_key(|e| (e.row, e.col));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].row, w[0].col) == (w[1].row, w[1].col))
        {
            return Err(Error::InvalidObservation(format!(
                "duplicate index ({}, {})",
                w[0].row, w[0].col
            )));
        }
        let obs = Self {
            rows,
            cols,
            entries,
            spec: None,
        };
        match spec {
            Some(s) => obs.with_spec(s),
            None => Ok(obs),
        }
    }

    /// Observes `m` on `s`.
    pub fn from_matrix(m: &DenseMatrix, s: &IndexSet) -> Result<Self> {
        m.ensure_shape(s.shape())?;
        Self::new(m.rows(), m.cols(), s.iter().map(|(i, j)| (i, j, m.get(i, j))), None)
    }

    /// Attaches thresholds; every value must already respect them.
    pub fn with_spec(mut self, spec: ClipSpec) -> Result<Self> {
        spec.check_shape(self.shape())?;
        for e in &self.entries {
            if !spec.admits(e.row, e.col, e.value) {
                return Err(Error::InfeasibleObservation {
                    row: e.row,
                    col: e.col,
                    value: e.value,
                    floor: spec.floor_at(e.row, e.col).unwrap_or(f64::NEG_INFINITY),
                    ceiling: spec.ceiling_at(e.row, e.col).unwrap_or(f64::INFINITY),
                });
            }
        }
        self.spec = Some(spec);
        Ok(self)
    }

    /// Clips every value with `spec` and attaches it.
    pub fn clipped_by(mut self, spec: ClipSpec) -> Result<Self> {
        spec.check_shape(self.shape())?;
        for e in &mut self.entries {
            e.value = spec.clip_value(e.row, e.col, e.value);
        }
        self.spec = Some(spec);
        Ok(self)
    }

    pub fn without_spec(mut self) -> Self {
        self.spec = None;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn spec(&self) -> Option<&ClipSpec> {
        self.spec.as_ref()
    }

    pub fn require_spec(&self) -> Result<&ClipSpec> {
        self.spec.as_ref().ok_or(Error::MissingThreshold)
    }

    /// Position of `e` relative to the thresholds (interior without a spec).
    #[inline]
    pub fn bound_of(&self, e: &Observation) -> Bound {
        match &self.spec {
            Some(s) => s.classify(e.row, e.col, e.value),
            None => Bound::Interior,
        }
    }

    pub fn index_set(&self) -> IndexSet {
        IndexSet {
            rows: self.rows,
            cols: self.cols,
            members: self.entries.iter().map(|e| (e.row, e.col)).collect(),
        }
    }

    /// `P_Ω(M^c)` as a dense matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        {
            let inner = m.inner_mut();
            for e in &self.entries {
                inner[(e.row, e.col)] = e.value;
            }
        }
        m
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.value)
    }

    /// Keeps the entries satisfying `keep`; thresholds are retained.
    pub fn filter(&self, mut keep: impl FnMut(&Observation) -> bool) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().copied().filter(|e| keep(e)).collect(),
            spec: self.spec.clone(),
        }
    }

    /// Restricts to the entries in `s`.
    pub fn restrict(&self, s: &IndexSet) -> Self {
        self.filter(|e| s.contains(e.row, e.col))
    }

    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        entries: Vec<Observation>,
        spec: Option<ClipSpec>,
    ) -> Self {
        debug_assert!(entries.windows(2).all(|w| (w[0].row, w[0].col) < (w[1].row, w[1].col)));
        Self {
            rows,
            cols,
            entries,
            spec,
        }
    }
}

/// The observed entries sitting at their ceiling.
pub fn clipped_indices(obs: &ObservedEntries) -> Result<IndexSet> {
    let spec = obs.require_spec()?;
    if !spec.has_ceiling() {
        return Err(Error::MissingThreshold);
    }
    Ok(IndexSet {
        rows: obs.rows,
        cols: obs.cols,
        members: obs
            .entries
            .iter()
            .filter(|e| obs.bound_of(e) == Bound::Ceiling)
            .map(|e| (e.row, e.col))
            .collect(),
    })
}

/// The observed entries sitting at their floor (empty without a floor).
pub fn floor_indices(obs: &ObservedEntries) -> IndexSet {
    IndexSet {
        rows: obs.rows,
        cols: obs.cols,
        members: obs
            .entries
            .iter()
            .filter(|e| obs.bound_of(e) == Bound::Floor)
            .map(|e| (e.row, e.col))
            .collect(),
    }
}

/// Removes every entry at a threshold (ceiling or floor).
pub fn drop_clipped(obs: &ObservedEntries) -> Result<ObservedEntries> {
    obs.require_spec()?;
    Ok(obs.filter(|e| obs.bound_of(e) == Bound::Interior))
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

fn bernoulli_set(rows: usize, cols: usize, p: f64, rng: &mut rng::Rng) -> IndexSet {
    let mut members = BTreeSet::new();
    for i in 0..rows {
        for j in 0..cols {
            if rng.random::<f64>() < p {
                members.insert((i, j));
            }
        }
    }
    IndexSet { rows, cols, members }
}

/// Each index included independently with probability `p`.
pub fn sample_bernoulli(rows: usize, cols: usize, p: f64, seed: u64) -> Result<IndexSet> {
    check_probability(p)?;
    Ok(bernoulli_set(rows, cols, p, &mut rng::seeded(seed)))
}

/// `k0 = ⌈log2(2√2 · √(n1 n2 r))⌉`.
pub fn golfing_partitions(rows: usize, cols: usize, rank: usize) -> usize {
    let x = 2.0 * 2f64.sqrt() * ((rows * cols * rank) as f64).sqrt();
    x.log2().ceil().max(1.0) as usize
}

#[derive(Clone, Debug)]
pub struct GolfingSample {
    pub union: IndexSet,
    pub partitions: Vec<IndexSet>,
    pub k0: usize,
    /// Per-partition inclusion probability `1 − (1 − p)^{1/k0}`.
    pub q: f64,
}

/// Union of `k0` independent `q`-Bernoulli index sets; marginal inclusion is `p`.
pub fn sample_golfing(rows: usize, cols: usize, p: f64, rank: usize, seed: u64) -> Result<GolfingSample> {
    check_probability(p)?;
    if rank == 0 {
        return Err(Error::InvalidArgument("rank must be at least 1".into()));
    }
    let k0 = golfing_partitions(rows, cols, rank);
    let q = 1.0 - (1.0 - p).powf(1.0 / k0 as f64);
    let mut rng = rng::seeded(seed);
    let partitions: Vec<IndexSet> = (0..k0).map(|_| bernoulli_set(rows, cols, q, &mut rng)).collect();
    let union = partitions
        .iter()
        .fold(IndexSet::empty(rows, cols), |acc, s| acc.union(s));
    Ok(GolfingSample {
        union,
        partitions,
        k0,
        q,
    })
}

/// Train / validation / test partition.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: ObservedEntries,
    pub val: ObservedEntries,
    pub test: ObservedEntries,
    /// Set when some part received no entries.
    pub degenerate: bool,
}

fn check_ratios(ratios: (f64, f64, f64)) -> Result<()> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(*r >= 0.0) || !r.is_finite()) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    Ok(())
}

fn split_list(
    rows: usize,
    cols: usize,
    mut items: Vec<Observation>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Split> {
    check_ratios(ratios)?;
    let n = items.len();
    items.shuffle(&mut rng::seeded(seed));
    let cut1 = ((ratios.0 * n as f64).round() as usize).min(n);
    let cut2 = (((ratios.0 + ratios.1) * n as f64).round() as usize).clamp(cut1, n);
    let mut parts = [items[..cut1].to_vec(), items[cut1..cut2].to_vec(), items[cut2..].to_vec()];
    for p in &mut parts {
        p.sort_by_key(|e| (e.row, e.col));
    }
    let degenerate = parts.iter().any(Vec::is_empty);
    if degenerate {
        log::warn!("split {ratios:?} of {n} entries leaves a part empty");
    }
    let [train, val, test] = parts;
    Ok(Split {
        train: ObservedEntries::from_parts(rows, cols, train, None),
        val: ObservedEntries::from_parts(rows, cols, val, None),
        test: ObservedEntries::from_parts(rows, cols, test, None),
        degenerate,
    })
}

/// Randomly partitions all entries of `full` by one shuffled permutation cut
/// at the cumulative ratios.
pub fn split_entries(full: &DenseMatrix, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let items = full
        .iter()
        .map(|(row, col, value)| Observation { row, col, value })
        .collect();
    split_list(full.rows(), full.cols(), items, ratios, seed)
}

/// Same as [`split_entries`] for sparse input; thresholds are dropped.
pub fn split_observed(obs: &ObservedEntries, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    split_list(obs.rows, obs.cols, obs.entries.clone(), ratios, seed)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn obs(values: &[(usize, usize, f64)], c: f64) -> ObservedEntries {
        ObservedEntries::new(2, 2, values.iter().copied(), Some(ClipSpec::ceiling(c).unwrap())).unwrap()
    }

    #[test]
    fn clipped_indices_definition() {
        let o = obs(&[(0, 0, 10.0), (0, 1, 8.0)], 10.0);
        let c = clipped_indices(&o).unwrap();
        assert_eq!(c.iter().collect::<Vec<_>>(), vec![(0, 0)]);
        assert!(clipped_indices(&obs(&[(0, 1, 8.0)], 10.0)).unwrap().is_empty());
        let none = ObservedEntries::new(2, 2, [(0, 0, 1.0)], None).unwrap();
        assert!(matches!(clipped_indices(&none), Err(Error::MissingThreshold)));
        let floor_only = none.clone().with_spec(ClipSpec::floor(0.0).unwrap()).unwrap();
        assert!(clipped_indices(&floor_only).is_err());
    }

    #[test]
    fn clipped_indices_per_entry() {
        let cm = DenseMatrix::from_rows(&[vec![3.0, 9.0], vec![9.0, 9.0]]).unwrap();
        let spec = ClipSpec::ceiling(9.0).unwrap().with_ceiling_matrix(cm).unwrap();
        let o = ObservedEntries::new(2, 2, [(0, 0, 3.0), (0, 1, 3.0)], Some(spec)).unwrap();
        assert_eq!(clipped_indices(&o).unwrap().iter().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn observation_validation() {
        assert!(ObservedEntries::new(2, 2, [(2, 0, 1.0)], None).is_err());
        assert!(ObservedEntries::new(2, 2, [(0, 0, 1.0), (0, 0, 2.0)], None).is_err());
        assert!(ObservedEntries::new(2, 2, [(0, 0, f64::INFINITY)], None).is_err());
        let over = ObservedEntries::new(2, 2, [(0, 0, 11.0)], Some(ClipSpec::ceiling(10.0).unwrap()));
        assert!(matches!(over, Err(Error::InfeasibleObservation { .. })));
    }

    #[test]
    fn drop_clipped_cases() {
        let o = obs(&[(0, 0, 10.0), (0, 1, 8.0)], 10.0);
        let d = drop_clipped(&o).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(drop_clipped(&d).unwrap(), d);
        let plain = obs(&[(0, 1, 8.0)], 10.0);
        assert_eq!(drop_clipped(&plain).unwrap(), plain);
        let all = obs(&[(0, 0, 10.0), (1, 1, 10.0)], 10.0);
        assert!(drop_clipped(&all).unwrap().is_empty());
    }

    #[test]
    fn bernoulli_boundaries() {
        assert_eq!(sample_bernoulli(4, 5, 1.0, 3).unwrap().len(), 20);
        assert!(sample_bernoulli(4, 5, 0.0, 3).unwrap().is_empty());
        assert!(sample_bernoulli(4, 5, 1.5, 3).is_err());
        assert_eq!(sample_bernoulli(9, 9, 0.3, 5).unwrap(), sample_bernoulli(9, 9, 0.3, 5).unwrap());
    }

    #[test]
    fn bernoulli_concentration() {
        let (n1, n2, p) = (500usize, 800usize, 0.8);
        let s = sample_bernoulli(n1, n2, p, 42).unwrap();
        let n = (n1 * n2) as f64;
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((s.len() as f64 - n * p).abs() <= 3.0 * sd, "{} vs {}", s.len(), n * p);
    }

    #[test]
    fn golfing_k0_arithmetic() {
        // 2√2·√16 = 11.31..., log2 = 3.5..., ceil = 4
        assert_eq!(golfing_partitions(4, 4, 1), 4);
        let g = sample_golfing(4, 4, 0.0, 1, 0).unwrap();
        assert_eq!(g.k0, 4);
        assert_eq!(g.partitions.len(), 4);
        assert!(g.partitions.iter().all(IndexSet::is_empty));
        let full = sample_golfing(5, 6, 1.0, 2, 0).unwrap();
        assert_eq!(full.union.len(), 30);
    }

    #[test]
    fn golfing_union_density() {
        let (n1, n2, p) = (30usize, 30usize, 0.5);
        let seeds = 200u64;
        let total: usize = (0..seeds).map(|s| sample_golfing(n1, n2, p, 2, s).unwrap().union.len()).sum();
        let n = (n1 * n2) as f64 * seeds as f64;
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((total as f64 - n * p).abs() <= 3.0 * sd);
        let g = sample_golfing(n1, n2, p, 2, 7).unwrap();
        assert!((1.0 - (1.0 - g.q).powi(g.k0 as i32) - p).abs() < 1e-12);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let m = DenseMatrix::from_fn(500, 800, |i, j| (i + j) as f64);
        let s = split_entries(&m, (0.8, 0.1, 0.1), 1).unwrap();
        let n = 400_000.0f64;
        for (part, r) in [(&s.train, 0.8), (&s.val, 0.1), (&s.test, 0.1)] {
            let sd = (n * r * (1.0 - r)).sqrt();
            assert!((part.len() as f64 - n * r).abs() <= 3.0 * sd);
        }
        assert!(!s.degenerate);
        let again = split_entries(&m, (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!(again.train, s.train);
        assert_eq!(again.test, s.test);
        let all = split_entries(&DenseMatrix::filled(3, 3, 1.0), (1.0, 0.0, 0.0), 4).unwrap();
        assert_eq!(all.train.len(), 9);
        assert!(all.degenerate);
        assert!(split_entries(&m, (0.5, 0.1, 0.1), 1).is_err());
    }

    #[test]
    fn split_partitions_cover() {
        let m = DenseMatrix::from_fn(7, 9, |i, j| (i * 9 + j) as f64);
        let s = split_entries(&m, (0.6, 0.2, 0.2), 9).unwrap();
        let (a, b, c) = (s.train.index_set(), s.val.index_set(), s.test.index_set());
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        assert_eq!(a.union(&b).union(&c), IndexSet::full(7, 9));
    }

    #[test]
    fn projection_cases() {
        let m = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 + 1.0);
        assert_eq!(project(&m, &IndexSet::full(3, 4)).unwrap(), m);
        assert_eq!(project(&m, &IndexSet::empty(3, 4)).unwrap(), DenseMatrix::zeros(3, 4));
        assert!(project(&m, &IndexSet::empty(4, 3)).is_err());
    }

    #[test]
    fn index_set_csv_round_trip() {
        let s = IndexSet::from_indices(5, 5, [(3, 1), (0, 4), (0, 2)]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0,2\n0,4\n3,1\n");
        assert_eq!(IndexSet::read_csv(5, 5, &buf[..]).unwrap(), s);
        assert!(IndexSet::read_csv(5, 5, &b"1;2\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn projection_idempotent_and_self_adjoint(seed in any::<u64>(), p in 0.0f64..1.0) {
            let mut rng = rng::seeded(seed);
            let x = DenseMatrix::from_fn(4, 5, |_, _| rng.random::<f64>() - 0.5);
            let y = DenseMatrix::from_fn(4, 5, |_, _| rng.random::<f64>() - 0.5);
            let s = sample_bernoulli(4, 5, p, seed).unwrap();
            let px = project(&x, &s).unwrap();
            prop_assert_eq!(project(&px, &s).unwrap(), px.clone());
            let lhs = px.dot(&y);
            let rhs = x.dot(&project(&y, &s).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-15 * (1.0 + lhs.abs()));
        }
    }
}
