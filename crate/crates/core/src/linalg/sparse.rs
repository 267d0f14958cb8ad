//! Compressed sparse row storage and the basic kernels built on it.

use super::LinalgError;

/// A real sparse matrix in canonical CSR form.
///
/// Canonical means: `row_offsets` has `nrows + 1` non-decreasing entries
/// starting at 0, column indices are strictly increasing within a row, and
/// no stored value is zero or NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` entries.
    ///
    /// Duplicate positions are summed in input order. Zero values, including
    /// duplicates that cancel exactly, are not stored.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, v) in entries {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            if v.is_nan() {
                return Err(LinalgError::NotANumber { row: r, col: c });
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // Bucket by row (stable, so duplicates keep their input order).
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); entries.len()];
        for &(r, c, v) in entries {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_offsets.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = row[k].1;
                k += 1;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    col_indices.push(c);
                    values.push(sum);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Wraps raw CSR arrays after checking the canonical-form invariants.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        let m = Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    // Used by kernels that produce canonical output by construction.
    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let m = Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        };
        debug_assert!(m.validate().is_ok());
        m
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a sparse matrix from row-major dense data, dropping zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(LinalgError::DimensionMismatch {
                    op: "from_dense",
                    expected: ncols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                entries.push((i, j, v));
            }
        }
        Self::from_triplets(nrows, ncols, &entries)
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

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Stored entries of row `i` as `(col, value)` pairs in column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    /// Largest stored magnitude, 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Checks the canonical CSR invariants.
    pub fn validate(&self) -> Result<(), LinalgError> {
        let bad = |what: &str| Err(LinalgError::InvalidStructure(what.to_string()));
        if self.row_offsets.len() != self.nrows + 1 {
            return bad("row_offsets length must be nrows + 1");
        }
        if self.row_offsets[0] != 0 {
            return bad("row_offsets must start at 0");
        }
        if *self.row_offsets.last().unwrap() != self.values.len()
            || self.col_indices.len() != self.values.len()
        {
            return bad("row_offsets must end at the number of stored values");
        }
        for i in 0..self.nrows {
            let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
            if a > b {
                return bad("row_offsets must be non-decreasing");
            }
            let cols = &self.col_indices[a..b];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad("column indices must be strictly increasing within a row");
            }
            if cols.last().is_some_and(|&c| c >= self.ncols) {
                return bad("column index out of range");
            }
        }
        if self.values.iter().any(|v| v.is_nan()) {
            return bad("stored value is NaN");
        }
        if self.values.contains(&0.0) {
            return bad("explicit zero stored");
        }
        Ok(())
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.ncols {
            return Err(LinalgError::DimensionMismatch {
                op: "matvec",
                expected: self.ncols,
                found: x.len(),
            });
        }
        Ok((0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    /// `Aᵀ x` without forming the transpose.
    pub fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.nrows {
            return Err(LinalgError::DimensionMismatch {
                op: "transpose_matvec",
                expected: self.nrows,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += v * xi;
                }
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in order, so each output row comes out sorted.
        for (i, j, v) in self.triplets() {
            col_indices[next[j]] = i;
            values[next[j]] = v;
            next[j] += 1;
        }
        Self::from_parts_unchecked(self.ncols, self.nrows, counts, col_indices, values)
    }

    /// `A B`, computed with a symbolic pass for the pattern followed by a
    /// numeric pass. Exact cancellations are dropped from the result.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix, LinalgError> {
        if self.ncols != other.nrows {
            return Err(LinalgError::DimensionMismatch {
                op: "matmul",
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let n = other.ncols;

        // Symbolic: pattern of each output row.
        let mut marker = vec![usize::MAX; n];
        let mut pattern_offsets = Vec::with_capacity(self.nrows + 1);
        let mut pattern = Vec::new();
        pattern_offsets.push(0);
        for i in 0..self.nrows {
            let start = pattern.len();
            for (k, _) in self.row(i) {
                for (j, _) in other.row(k) {
                    if marker[j] != i {
                        marker[j] = i;
                        pattern.push(j);
                    }
                }
            }
            pattern[start..].sort_unstable();
            pattern_offsets.push(pattern.len());
        }

        // Numeric.
        let mut acc = vec![0.0; n];
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::with_capacity(pattern.len());
        let mut values = Vec::with_capacity(pattern.len());
        row_offsets.push(0);
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    acc[j] += a * b;
                }
            }
            for &j in &pattern[pattern_offsets[i]..pattern_offsets[i + 1]] {
                let v = acc[j];
                acc[j] = 0.0;
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self::from_parts_unchecked(
            self.nrows,
            n,
            row_offsets,
            col_indices,
            values,
        ))
    }

    /// `alpha A + beta B` for matrices of equal shape.
    pub fn linear_combination(
        alpha: f64,
        a: &SparseMatrix,
        beta: f64,
        b: &SparseMatrix,
    ) -> Result<SparseMatrix, LinalgError> {
        if a.nrows != b.nrows || a.ncols != b.ncols {
            return Err(LinalgError::DimensionMismatch {
                op: "linear_combination",
                expected: a.nrows * a.ncols,
                found: b.nrows * b.ncols,
            });
        }
        let entries: Vec<_> = a
            .triplets()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(b.triplets().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        Self::from_triplets(a.nrows, a.ncols, &entries)
    }

    /// True when `|a_ij - a_ji| <= rel_tol * max|A|` for every pair.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = rel_tol * self.max_abs();
        self.triplets()
            .all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol)
    }

    /// `(A + Aᵀ) / 2`; the result is bitwise symmetric.
    pub fn symmetrized(&self) -> Result<SparseMatrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                nrows: self.nrows,
                ncols: self.ncols,
            });
        }
        let t = self.transpose();
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.nrows {
            let mut a = self.row(i).peekable();
            let mut b = t.row(i).peekable();
            loop {
                let (j, v) = match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ja, va)), Some((jb, vb))) if ja == jb => {
                        a.next();
                        b.next();
                        // Averaging in the same operand order for (i, j) and
                        // (j, i) keeps the two results bit-identical.
                        (ja, 0.5 * va.min(vb) + 0.5 * va.max(vb))
                    }
                    (Some((ja, va)), Some((jb, _))) if ja < jb => {
                        a.next();
                        (ja, 0.5 * va)
                    }
                    (Some((ja, va)), None) => {
                        a.next();
                        (ja, 0.5 * va)
                    }
                    (_, Some((jb, vb))) => {
                        b.next();
                        (jb, 0.5 * vb)
                    }
                };
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self::from_parts_unchecked(
            self.nrows,
            self.ncols,
            row_offsets,
            col_indices,
            values,
        ))
    }

    /// `Cᵀ A C` for square `A` (n×n) and `C` (n×m).
    ///
    /// When `A` is symmetric the result is averaged with its transpose so
    /// that rounding cannot leave it asymmetric.
    pub fn triple_product(c: &SparseMatrix, a: &SparseMatrix) -> Result<SparseMatrix, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                nrows: a.nrows,
                ncols: a.ncols,
            });
        }
        if c.nrows != a.nrows {
            return Err(LinalgError::DimensionMismatch {
                op: "triple_product",
                expected: a.nrows,
                found: c.nrows,
            });
        }
        let ac = a.matmul(c)?;
        let result = c.transpose().matmul(&ac)?;
        if a.is_symmetric(SYMMETRY_TOL) {
            result.symmetrized()
        } else {
            Ok(result)
        }
    }
}

/// Relative tolerance under which a matrix is treated as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-14;
