use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Real dense matrix.
///
/// Values are immutable from the outside: every operation returns a new
/// matrix. Storage is delegated to `nalgebra` (column-major); the public
/// constructors and the binary format use row-major order.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    inner: DMatrix<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            inner: DMatrix::from_element(rows, cols, value),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(rows, cols, &data),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidDimensions("ragged rows".into()));
        }
        Self::from_row_major(n_rows, n_cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self {
            inner: DMatrix::from_fn(rows, cols, f),
        }
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn from_nalgebra(inner: DMatrix<f64>) -> Self {
        Self { inner }
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_nalgebra(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols()).map(|j| self.inner[(i, j)]).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.inner.column(j).iter().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    /// Returns a copy with entry `(row, col)` replaced.
    pub fn with_entry(&self, row: usize, col: usize, value: f64) -> Self {
        let mut inner = self.inner.clone();
        inner[(row, col)] = value;
        Self { inner }
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    /// Matrix product. Panics on incompatible shapes.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols(),
            other.rows(),
            "matmul of {:?} by {:?}",
            self.shape(),
            other.shape()
        );
        Self {
            inner: &self.inner * &other.inner,
        }
    }

    /// `selfᵀ · other`.
    pub fn tr_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows(), other.rows());
        Self {
            inner: self.inner.transpose() * &other.inner,
        }
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Self {
        Self {
            inner: self.inner.map(f),
        }
    }

    pub fn map_indexed(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        Self::from_fn(self.rows(), self.cols(), |i, j| f(i, j, self.inner[(i, j)]))
    }

    /// Elementwise combination of two equally shaped matrices. Panics on mismatch.
    pub fn zip_map(&self, other: &DenseMatrix, f: impl FnMut(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        Self {
            inner: self.inner.zip_map(&other.inner, f),
        }
    }

    pub fn hadamard(&self, other: &DenseMatrix) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: &self.inner * s,
        }
    }

    /// Frobenius inner product `tr(selfᵀ other)`.
    pub fn dot(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "dot shape mismatch");
        self.inner.dot(&other.inner)
    }

    pub fn frobenius(&self) -> f64 {
        self.inner.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.inner.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.inner.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let cols = self.cols();
        (0..self.len()).map(move |k| {
            let (i, j) = (k / cols, k % cols);
            (i, j, self.inner[(i, j)])
        })
    }

    pub fn ensure_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                actual: self.shape(),
            });
        }
        Ok(())
    }

    pub(crate) fn inner_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.inner
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} ", self.rows(), self.cols())?;
        if self.len() <= 64 {
            f.debug_list()
                .entries((0..self.rows()).map(|i| self.row(i)))
                .finish()
        } else {
            write!(f, "[..]")
        }
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;

    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        DenseMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;

    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        DenseMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

impl Mul<f64> for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: f64) -> DenseMatrix {
        self.scale(rhs)
    }
}
