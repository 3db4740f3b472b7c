use crate::linalg::{Bound, ClipSpec, DenseMatrix};
use crate::Result;

/// Position of `M_ij` relative to the thresholds (equality within tolerance).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Region {
    Below,
    AtCeiling,
    AtFloor,
    Beyond,
}

pub(crate) fn region(spec: &ClipSpec, i: usize, j: usize, m: f64) -> Region {
    match spec.classify(i, j, m) {
        Bound::Ceiling => Region::AtCeiling,
        Bound::Floor => Region::AtFloor,
        Bound::Interior => {
            let below = spec.ceiling_at(i, j).is_none_or(|c| m < c);
            let above = spec.floor_at(i, j).is_none_or(|f| m > f);
            if below && above {
                Region::Below
            } else {
                Region::Beyond
            }
        }
    }
}

/// Per-entry regions of `m`, reused across many applications of `P*`.
#[derive(Clone, Debug)]
pub(crate) struct RegionMap {
    rows: usize,
    regions: Vec<Region>,
}

impl RegionMap {
    pub(crate) fn new(m: &DenseMatrix, spec: &ClipSpec) -> Result<Self> {
        spec.check_shape(m.shape())?;
        let mut regions = Vec::with_capacity(m.len());
        for j in 0..m.cols() {
            for i in 0..m.rows() {
                regions.push(region(spec, i, j, m.get(i, j)));
            }
        }
        Ok(Self { rows: m.rows(), regions })
    }

    #[inline]
    pub(crate) fn at(&self, i: usize, j: usize) -> Region {
        self.regions[j * self.rows + i]
    }

    pub(crate) fn apply(&self, z: &DenseMatrix) -> DenseMatrix {
        z.map_indexed(|i, j, v| match self.at(i, j) {
            Region::Below => v,
            Region::AtCeiling => v.max(0.0),
            Region::AtFloor => v.min(0.0),
            Region::Beyond => 0.0,
        })
    }

    /// Whether `P*` is the identity (no entry at or beyond a threshold).
    pub(crate) fn is_identity(&self) -> bool {
        self.regions.iter().all(|&r| r == Region::Below)
    }

    /// Indicator of the strictly unclipped region.
    pub(crate) fn unclipped_mask(&self, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, cols, |i, j| if self.at(i, j) == Region::Below { 1.0 } else { 0.0 })
    }
}

/// `P*(Z)`: `Z_ij` where `M_ij` is strictly inside the thresholds,
/// `max(Z_ij, 0)` where `M_ij` equals its ceiling, `min(Z_ij, 0)` where it
/// equals its floor, and 0 beyond.
pub fn apply_p_star(z: &DenseMatrix, m: &DenseMatrix, spec: &ClipSpec) -> Result<DenseMatrix> {
    z.ensure_shape(m.shape())?;
    Ok(RegionMap::new(m, spec)?.apply(z))
}
