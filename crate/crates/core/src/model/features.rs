//! Feature matrix storage: dense rows or compressed sparse rows behind one type.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Compressed-sparse-row matrix. Column indices within a row are strictly
/// ascending. The transpose is kept alongside so `Aᵀ·S` is a row gather.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != nrows + 1 || indptr[0] != 0 || *indptr.last().unwrap() != indices.len() {
            return Err(Error::InvalidInput("malformed CSR row pointer".into()));
        }
        if indices.len() != values.len() {
            return Err(Error::InvalidInput("CSR index/value length mismatch".into()));
        }
        for row in indptr.windows(2) {
            if row[0] > row[1] {
                return Err(Error::InvalidInput("CSR row pointer not monotone".into()));
            }
            let cols = &indices[row[0]..row[1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(Error::InvalidInput(
                    "CSR column indices must be ascending and in range".into(),
                ));
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    /// Build from `(row, col, value)` rows already grouped per row.
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for &(c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self::new(rows.len(), ncols, indptr, indices, values)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, indptr: counts, indices, values }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                out[[r, c]] = v;
            }
        }
        out
    }

    /// `self · rhs` for a dense right-hand side.
    pub fn mul_dense(&self, rhs: ArrayView2<'_, f64>) -> Array2<f64> {
        let d = rhs.ncols();
        let mut out = Array2::zeros((self.nrows, d));
        for (r, mut out_row) in out.rows_mut().into_iter().enumerate() {
            for (c, v) in self.row(r) {
                out_row.scaled_add(v, &rhs.row(c));
            }
        }
        out
    }
}

/// Row-major features `A` (M×N). Rows are samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(Array2<f64>),
    Sparse { matrix: CsrMatrix, transpose: CsrMatrix },
}

impl Features {
    pub fn sparse(matrix: CsrMatrix) -> Self {
        let transpose = matrix.transpose();
        Features::Sparse { matrix, transpose }
    }

    pub fn nrows(&self) -> usize {
        match self {
            Features::Dense(a) => a.nrows(),
            Features::Sparse { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Features::Dense(a) => a.ncols(),
            Features::Sparse { matrix, .. } => matrix.ncols(),
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        match self {
            Features::Dense(a) => a.iter().map(|v| v * v).sum(),
            Features::Sparse { matrix, .. } => matrix.values.iter().map(|v| v * v).sum(),
        }
    }

    /// `A · X` for X of shape N×D.
    pub fn mul(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Features::Dense(a) => a.dot(&x),
            Features::Sparse { matrix, .. } => matrix.mul_dense(x),
        }
    }

    /// `Aᵀ · S` for S of shape M×D.
    pub fn tmul(&self, s: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Features::Dense(a) => a.t().dot(&s),
            Features::Sparse { transpose, .. } => transpose.mul_dense(s),
        }
    }

    /// Entries of row `m` as `(column, value)`, skipping structural zeros.
    pub fn row_entries(&self, m: usize) -> Vec<(usize, f64)> {
        match self {
            Features::Dense(a) => a.row(m).iter().copied().enumerate().collect(),
            Features::Sparse { matrix, .. } => matrix.row(m).collect(),
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            Features::Dense(a) => a.clone(),
            Features::Sparse { matrix, .. } => matrix.to_dense(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Features {
        match self {
            Features::Dense(a) => Features::Dense(a.select(ndarray::Axis(0), rows)),
            Features::Sparse { matrix, .. } => {
                let picked: Vec<Vec<(usize, f64)>> =
                    rows.iter().map(|&r| matrix.row(r).collect()).collect();
                Features::sparse(
                    CsrMatrix::from_rows(matrix.ncols(), &picked).expect("subset of valid CSR"),
                )
            }
        }
    }
}
