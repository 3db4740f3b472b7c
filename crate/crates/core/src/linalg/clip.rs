use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::{Error, Result};

/// Relative tolerance used when deciding whether a value sits at a threshold.
pub const THRESHOLD_RTOL: f64 = 1e-9;

/// `|value − threshold| ≤ 1e-9 · max(1, |threshold|)`.
#[inline]
pub fn at_threshold(value: f64, threshold: f64) -> bool {
    if !threshold.is_finite() {
        return value == threshold;
    }
    (value - threshold).abs() <= THRESHOLD_RTOL * threshold.abs().max(1.0)
}

/// Where an observed value sits relative to its thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Interior,
    Ceiling,
    Floor,
}

/// Clipping thresholds: a ceiling, a floor, or both, each either a scalar or
/// a per-entry matrix (the matrix wins where present).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalarThresholds", into = "ScalarThresholds")]
pub struct ClipSpec {
    ceiling: Option<f64>,
    floor: Option<f64>,
    ceiling_matrix: Option<DenseMatrix>,
    floor_matrix: Option<DenseMatrix>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalarThresholds {
    #[serde(default)]
    ceiling: Option<f64>,
    #[serde(default)]
    floor: Option<f64>,
}

impl TryFrom<ScalarThresholds> for ClipSpec {
    type Error = Error;

    fn try_from(raw: ScalarThresholds) -> Result<Self> {
        ClipSpec::new(raw.floor, raw.ceiling)
    }
}

impl From<ClipSpec> for ScalarThresholds {
    fn from(spec: ClipSpec) -> Self {
        ScalarThresholds {
            ceiling: spec.ceiling,
            floor: spec.floor,
        }
    }
}

impl ClipSpec {
    pub fn new(floor: Option<f64>, ceiling: Option<f64>) -> Result<Self> {
        let spec = ClipSpec {
            ceiling,
            floor,
            ceiling_matrix: None,
            floor_matrix: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Clipping from above at `c` (`Clip(x) = min(c, x)`).
    pub fn ceiling(c: f64) -> Result<Self> {
        Self::new(None, Some(c))
    }

    /// Clipping from below at `f`.
    pub fn floor(f: f64) -> Result<Self> {
        Self::new(Some(f), None)
    }

    pub fn two_sided(floor: f64, ceiling: f64) -> Result<Self> {
        Self::new(Some(floor), Some(ceiling))
    }

    /// Per-entry ceilings, overriding the scalar ceiling.
    pub fn with_ceiling_matrix(mut self, m: DenseMatrix) -> Result<Self> {
        self.ceiling_matrix = Some(m);
        self.validate()?;
        Ok(self)
    }

    /// Per-entry floors, overriding the scalar floor.
    pub fn with_floor_matrix(mut self, m: DenseMatrix) -> Result<Self> {
        self.floor_matrix = Some(m);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let has_ceiling = self.ceiling.is_some() || self.ceiling_matrix.is_some();
        let has_floor = self.floor.is_some() || self.floor_matrix.is_some();
        if !has_ceiling && !has_floor {
            return Err(Error::InvalidClipSpec("neither ceiling nor floor given".into()));
        }
        for (name, v) in [("ceiling", self.ceiling), ("floor", self.floor)] {
            if v.is_some_and(f64::is_nan) {
                return Err(Error::InvalidClipSpec(format!("{name} is NaN")));
            }
        }
        if let (Some(f), Some(c)) = (self.floor, self.ceiling) {
            if !(f < c) {
                return Err(Error::InvalidClipSpec(format!("floor {f} not below ceiling {c}")));
            }
        }
        if let (Some(fm), Some(cm)) = (&self.floor_matrix, &self.ceiling_matrix) {
            if fm.shape() != cm.shape() {
                return Err(Error::InvalidClipSpec("threshold matrices differ in shape".into()));
            }
        }
        let shape = self
            .ceiling_matrix
            .as_ref()
            .or(self.floor_matrix.as_ref())
            .map(DenseMatrix::shape);
        if let Some((rows, cols)) = shape {
            for i in 0..rows {
                for j in 0..cols {
                    if let (Some(f), Some(c)) = (self.floor_at(i, j), self.ceiling_at(i, j)) {
                        if !(f < c) {
                            return Err(Error::InvalidClipSpec(format!(
                                "floor {f} not below ceiling {c} at ({i}, {j})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scalar_ceiling(&self) -> Option<f64> {
        self.ceiling
    }

    pub fn scalar_floor(&self) -> Option<f64> {
        self.floor
    }

    pub fn has_ceiling(&self) -> bool {
        self.ceiling.is_some() || self.ceiling_matrix.is_some()
    }

    pub fn has_floor(&self) -> bool {
        self.floor.is_some() || self.floor_matrix.is_some()
    }

    pub fn ceiling_matrix(&self) -> Option<&DenseMatrix> {
        self.ceiling_matrix.as_ref()
    }

    pub fn floor_matrix(&self) -> Option<&DenseMatrix> {
        self.floor_matrix.as_ref()
    }

    /// Shape required by per-entry thresholds, if any.
    pub fn required_shape(&self) -> Option<(usize, usize)> {
        self.ceiling_matrix
            .as_ref()
            .or(self.floor_matrix.as_ref())
            .map(DenseMatrix::shape)
    }

    pub(crate) fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        match self.required_shape() {
            Some(s) if s != shape => Err(Error::ShapeMismatch {
                expected: shape,
                actual: s,
            }),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn ceiling_at(&self, i: usize, j: usize) -> Option<f64> {
        match &self.ceiling_matrix {
            Some(m) => Some(m.get(i, j)),
            None => self.ceiling,
        }
    }

    #[inline]
    pub fn floor_at(&self, i: usize, j: usize) -> Option<f64> {
        match &self.floor_matrix {
            Some(m) => Some(m.get(i, j)),
            None => self.floor,
        }
    }

    /// Clips a single value at entry `(i, j)`.
    #[inline]
    pub fn clip_value(&self, i: usize, j: usize, x: f64) -> f64 {
        let mut y = x;
        if let Some(c) = self.ceiling_at(i, j) {
            y = y.min(c);
        }
        if let Some(f) = self.floor_at(i, j) {
            y = y.max(f);
        }
        y
    }

    /// Classifies an observed (already clipped) value.
    #[inline]
    pub fn classify(&self, i: usize, j: usize, value: f64) -> Bound {
        if self.ceiling_at(i, j).is_some_and(|c| at_threshold(value, c)) {
            Bound::Ceiling
        } else if self.floor_at(i, j).is_some_and(|f| at_threshold(value, f)) {
            Bound::Floor
        } else {
            Bound::Interior
        }
    }

    /// Whether `value` respects the thresholds at `(i, j)` (within tolerance).
    pub fn admits(&self, i: usize, j: usize, value: f64) -> bool {
        let below = self
            .ceiling_at(i, j)
            .is_none_or(|c| value <= c || at_threshold(value, c));
        let above = self
            .floor_at(i, j)
            .is_none_or(|f| value >= f || at_threshold(value, f));
        below && above
    }
}

/// Elementwise clip: `min` with the ceiling and/or `max` with the floor.
///
/// Panics if per-entry thresholds do not match the shape of `m`.
pub fn clip(m: &DenseMatrix, spec: &ClipSpec) -> DenseMatrix {
    if let Some(shape) = spec.required_shape() {
        assert_eq!(shape, m.shape(), "per-entry thresholds do not match matrix shape");
    }
    m.map_indexed(|i, j, v| spec.clip_value(i, j, v))
}
