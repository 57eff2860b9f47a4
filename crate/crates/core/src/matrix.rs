use crate::element::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StorageOrder {
    #[default]
    ColumnMajor,
    RowMajor,
}

/// Which triangle of a symmetric matrix is stored and updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Triangle {
    Lower,
    Upper,
}

impl Triangle {
    #[inline(always)]
    pub fn contains(self, r: usize, c: usize) -> bool {
        match self {
            Triangle::Lower => r >= c,
            Triangle::Upper => r <= c,
        }
    }
}

/// Dense matrix with an explicit leading dimension.
///
/// For column-major storage `ld` is the stride between columns, for
/// row-major the stride between rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    ld: usize,
    order: StorageOrder,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::zeros_with_order(rows, cols, StorageOrder::ColumnMajor)
    }

    pub fn zeros_with_order(rows: usize, cols: usize, order: StorageOrder) -> Self {
        let ld = match order {
            StorageOrder::ColumnMajor => rows.max(1),
            StorageOrder::RowMajor => cols.max(1),
        };
        Matrix {
            rows,
            cols,
            ld,
            order,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        order: StorageOrder,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Self {
        let mut m = Self::zeros_with_order(rows, cols, order);
        for c in 0..cols {
            for r in 0..rows {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    /// Column-major matrix with `ld == rows`.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::from_parts(rows, cols, rows.max(1), StorageOrder::ColumnMajor, data)
    }

    /// Builds a column-major matrix from nested rows, mostly for tests.
    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidLayout("ragged rows".into()));
        }
        Ok(Self::from_fn(r, c, StorageOrder::ColumnMajor, |i, j| rows[i][j]))
    }

    pub fn from_parts(
        rows: usize,
        cols: usize,
        ld: usize,
        order: StorageOrder,
        data: Vec<T>,
    ) -> Result<Self> {
        let (inner, outer) = match order {
            StorageOrder::ColumnMajor => (rows, cols),
            StorageOrder::RowMajor => (cols, rows),
        };
        if ld < inner.max(1) {
            return Err(Error::InvalidLayout(format!(
                "leading dimension {ld} smaller than {inner}"
            )));
        }
        let needed = if outer == 0 { 0 } else { ld * (outer - 1) + inner };
        if data.len() < needed {
            return Err(Error::InvalidLayout(format!(
                "buffer holds {} elements, layout needs {needed}",
                data.len()
            )));
        }
        Ok(Matrix {
            rows,
            cols,
            ld,
            order,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ld(&self) -> usize {
        self.ld
    }

    pub fn order(&self) -> StorageOrder {
        self.order
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline(always)]
    pub fn offset(&self, r: usize, c: usize) -> usize {
        match self.order {
            StorageOrder::ColumnMajor => r + c * self.ld,
            StorageOrder::RowMajor => r * self.ld + c,
        }
    }

    #[inline(always)]
    pub fn get(&self, r: usize, c: usize) -> T {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[self.offset(r, c)]
    }

    #[inline(always)]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        debug_assert!(r < self.rows && c < self.cols);
        let o = self.offset(r, c);
        self.data[o] = v;
    }

    /// Elements in column-major order, dropping any leading-dimension gap.
    pub fn to_col_major_vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.push(self.get(r, c));
            }
        }
        out
    }

    /// Logical transpose, materialized.
    pub fn transposed(&self) -> Self {
        Self::from_fn(self.cols, self.rows, self.order, |r, c| self.get(c, r))
    }

    pub fn map<U: Scalar>(&self, mut f: impl FnMut(T) -> U) -> Matrix<U> {
        Matrix::from_fn(self.rows, self.cols, self.order, |r, c| f(self.get(r, c)))
    }
}
