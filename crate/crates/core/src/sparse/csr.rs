use std::sync::Arc;

use crate::error::{Error, Result};

const NO_DIAG: u32 = u32::MAX;

/// Row-compressed sparsity structure. Column indices are sorted and unique
/// within each row. Matrices assembled on the same mesh share one pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrPattern {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    diag_pos: Vec<u32>,
}

impl CsrPattern {
    /// Builds a pattern from per-row column lists. Columns are sorted and
    /// deduplicated.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<usize>>) -> CsrPattern {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            for c in cols {
                assert!(c < n_cols, "column {c} out of range {n_cols}");
                col_idx.push(c as u32);
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_raw(n_rows, n_cols, row_ptr, col_idx)
    }

    fn from_raw(n_rows: usize, n_cols: usize, row_ptr: Vec<usize>, col_idx: Vec<u32>) -> Self {
        let diag_pos = (0..n_rows)
            .map(|i| {
                let (s, e) = (row_ptr[i], row_ptr[i + 1]);
                col_idx[s..e]
                    .binary_search(&(i as u32))
                    .map(|k| (s + k) as u32)
                    .unwrap_or(NO_DIAG)
            })
            .collect();
        CsrPattern {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            diag_pos,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    #[inline]
    pub fn col(&self, k: usize) -> usize {
        self.col_idx[k] as usize
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    /// Storage position of the diagonal entry of row `i`, if present.
    #[inline]
    pub fn diag_pos(&self, i: usize) -> Option<usize> {
        let p = self.diag_pos[i];
        (p != NO_DIAG).then_some(p as usize)
    }

    /// Storage position of `(i, j)`, if structurally present.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()]
            .binary_search(&(j as u32))
            .ok()
            .map(|k| r.start + k)
    }
}

/// Compressed-row sparse matrix. Explicit zeros produced by assembly are
/// kept so matrices on one mesh share a pattern.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_pattern(pattern: Arc<CsrPattern>, values: Vec<f64>) -> CsrMatrix {
        assert_eq!(pattern.nnz(), values.len());
        CsrMatrix { pattern, values }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        let pattern = CsrPattern::from_rows(n, (0..n).map(|i| vec![i]).collect());
        CsrMatrix::from_pattern(Arc::new(pattern), vec![1.0; n])
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> CsrMatrix {
        let pattern = CsrPattern::from_rows(n_cols, vec![Vec::new(); n_rows]);
        CsrMatrix::from_pattern(Arc::new(pattern), Vec::new())
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn shares_pattern(&self, other: &CsrMatrix) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| self.pattern.diag_pos(i).map_or(0.0, |k| self.values[k]))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| self.values[self.pattern.row_range(i)].iter().sum())
            .collect()
    }

    /// Iterates `(row, col, value)` in storage order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows()).flat_map(move |i| {
            self.pattern
                .row_range(i)
                .map(move |k| (i, self.pattern.col(k), self.values[k]))
        })
    }

    /// `y = self * x`, summing each row in ascending column order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols(),
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows()];
        self.mul_into(x, &mut y);
        Ok(y)
    }

    /// `y = self * x` into a preallocated buffer.
    #[inline]
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols());
        assert_eq!(y.len(), self.n_rows());
        let p = &*self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in p.row_range(i) {
                s += self.values[k] * x[p.col_idx[k] as usize];
            }
            *yi = s;
        }
    }

    /// `y += alpha * self * x`
    pub fn mul_add_into(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols());
        assert_eq!(y.len(), self.n_rows());
        let p = &*self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in p.row_range(i) {
                s += self.values[k] * x[p.col_idx[k] as usize];
            }
            *yi += alpha * s;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut builder = TripletBuilder::new(self.n_cols(), self.n_rows());
        for (i, j, v) in self.triplets() {
            builder.push(j, i, v);
        }
        builder.build()
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Largest `|a_ij - a_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> super::DenseMatrix {
        let mut d = super::DenseMatrix::zeros(self.n_rows(), self.n_cols());
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }
}

/// Coordinate-format accumulator; duplicates are summed on `build`.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        TripletBuilder {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n_rows && j < self.n_cols, "entry ({i},{j}) out of range");
        self.entries.push((i, j, v));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx: Vec<u32> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j as u32);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let pattern = CsrPattern::from_raw(self.n_rows, self.n_cols, row_ptr, col_idx);
        CsrMatrix::from_pattern(Arc::new(pattern), values)
    }
}

/// Diagonal matrix; for a lumped mass matrix every entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMatrix {
    diag: Vec<f64>,
}

impl DiagonalMatrix {
    pub fn new(diag: Vec<f64>) -> Self {
        DiagonalMatrix { diag }
    }

    /// Like `new` but rejects non-positive entries.
    pub fn positive(diag: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
        Ok(DiagonalMatrix { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, d), xi) in y.iter_mut().zip(&self.diag).zip(x) {
            *yi = d * xi;
        }
    }

    pub fn solve_into(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, d), xi) in y.iter_mut().zip(&self.diag).zip(x) {
            *yi = xi / d;
        }
    }

    pub fn to_dense(&self) -> super::DenseMatrix {
        let n = self.diag.len();
        let mut d = super::DenseMatrix::zeros(n, n);
        for (i, &v) in self.diag.iter().enumerate() {
            d[(i, i)] = v;
        }
        d
    }
}
