//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` with a minimum-degree
//! ordering.

use super::ordering::minimum_degree;
use super::{LinalgError, Permutation, SparseMatrix};

/// Relative pivot threshold: a pivot `d` is rejected unless
/// `d > PIVOT_TOL * |a_jj|`.
pub const PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    perm: Permutation,
    diag: Vec<f64>,
    // Strictly lower part of L, column-compressed, permuted indices.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric matrix. Only the pattern union of `A` and `Aᵀ`
    /// is used for ordering; values are read from the lower triangle of
    /// the permuted matrix, which for a symmetric input is the whole input.
    pub fn factor(a: &SparseMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                nrows: a.nrows(),
                ncols: a.ncols(),
            });
        }
        let n = a.nrows();
        let sym = minimum_degree(a);
        let fwd = sym.order.forward();
        let inv = sym.order.inverse();

        let mut col_ptr = Vec::with_capacity(n + 1);
        col_ptr.push(0);
        for col in &sym.columns {
            col_ptr.push(col_ptr.last().unwrap() + col.len());
        }
        let row_idx: Vec<usize> = sym.columns.concat();
        let mut vals = vec![0.0; row_idx.len()];
        let mut diag = vec![0.0; n];

        // rows_of[j] lists columns k < j whose pattern contains row j, with
        // the position of that entry.
        let mut rows_of: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for k in 0..n {
            for p in col_ptr[k]..col_ptr[k + 1] {
                rows_of[row_idx[p]].push((k, p));
            }
        }

        let mut work = vec![0.0; n];
        for j in 0..n {
            let orig = fwd[j];
            let mut ajj = 0.0;
            for (c, v) in a.row(orig) {
                let i = inv[c];
                if i == j {
                    ajj = v;
                    work[j] += v;
                } else if i > j {
                    work[i] += v;
                }
            }
            for &(k, pjk) in &rows_of[j] {
                let ljk = vals[pjk];
                work[j] -= ljk * ljk;
                for p in pjk + 1..col_ptr[k + 1] {
                    work[row_idx[p]] -= vals[p] * ljk;
                }
            }
            let d = work[j];
            work[j] = 0.0;
            if d.is_nan() || d <= PIVOT_TOL * ajj.abs() || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: orig });
            }
            let ljj = d.sqrt();
            diag[j] = ljj;
            for p in col_ptr[j]..col_ptr[j + 1] {
                let i = row_idx[p];
                vals[p] = work[i] / ljj;
                work[i] = 0.0;
            }
        }

        Ok(Self {
            n,
            perm: sym.order,
            diag,
            col_ptr,
            row_idx,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of `L` including the diagonal.
    pub fn factor_nnz(&self) -> usize {
        self.n + self.vals.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                op: "cholesky solve",
                expected: self.n,
                found: b.len(),
            });
        }
        let mut y = self.perm.gather(b);
        // L y = b
        for j in 0..self.n {
            y[j] /= self.diag[j];
            let yj = y[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.vals[p] * yj;
            }
        }
        // Lᵀ x = y
        for j in (0..self.n).rev() {
            let mut s = y[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s -= self.vals[p] * y[self.row_idx[p]];
            }
            y[j] = s / self.diag[j];
        }
        Ok(self.perm.scatter(&y))
    }
}

/// Solves a symmetric positive definite system by sparse Cholesky.
pub fn solve_spd(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Cholesky::factor(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let b = [1.0, -2.0, 3.5];
        assert_eq!(
            solve_spd(&SparseMatrix::identity(3), &b).unwrap(),
            b.to_vec()
        );
    }

    #[test]
    fn two_by_two() {
        let a = SparseMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let x = solve_spd(&a, &[0.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn floating_chain_is_rejected() {
        let k = SparseMatrix::from_dense(&[
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            solve_spd(&k, &[0.0, 0.0, 1.0]),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        match Cholesky::factor(&a) {
            Err(LinalgError::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_system() {
        let c = Cholesky::factor(&SparseMatrix::zeros(0, 0)).unwrap();
        assert!(c.solve(&[]).unwrap().is_empty());
    }
}
