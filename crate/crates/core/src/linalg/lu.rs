//! Right-looking sparse LU with partial (row) pivoting.

use std::collections::BTreeSet;

use super::{LinalgError, SparseMatrix};

/// Pivots with magnitude below `SINGULAR_TOL * max|A|` are treated as zero.
pub const SINGULAR_TOL: f64 = 1e-14;

type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    /// Original row index used as pivot at each step.
    pivot_rows: Vec<usize>,
    /// Row operations of each step: `(target row, multiplier)`.
    eliminations: Vec<Vec<(usize, f64)>>,
    /// Pivot row at each step, restricted to columns `>= step`.
    upper: Vec<SparseRow>,
}

impl Lu {
    pub fn factor(a: &SparseMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                nrows: a.nrows(),
                ncols: a.ncols(),
            });
        }
        let n = a.nrows();
        let tol = SINGULAR_TOL * a.max_abs();
        let mut rows: Vec<SparseRow> = (0..n).map(|i| a.row(i).collect()).collect();
        let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (i, j, _) in a.triplets() {
            col_rows[j].insert(i);
        }

        let mut pivot_rows = Vec::with_capacity(n);
        let mut eliminations = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);

        for k in 0..n {
            let mut best: Option<(usize, f64)> = None;
            for &i in &col_rows[k] {
                let v = leading(&rows[i], k);
                if best.is_none_or(|(_, b)| v.abs() > b.abs()) {
                    best = Some((i, v));
                }
            }
            let (p, pivot) = match best {
                Some((p, v)) if v.abs() > tol && v.abs() > 0.0 => (p, v),
                _ => return Err(LinalgError::Singular { pivot: k }),
            };
            let prow = std::mem::take(&mut rows[p]);
            for &(c, _) in &prow {
                col_rows[c].remove(&p);
            }
            let targets: Vec<usize> = col_rows[k].iter().copied().collect();
            let mut ops = Vec::with_capacity(targets.len());
            for i in targets {
                let mult = leading(&rows[i], k) / pivot;
                let old = std::mem::take(&mut rows[i]);
                let merged = axpy_row(&old, -mult, &prow);
                for &(c, _) in &old {
                    col_rows[c].remove(&i);
                }
                for &(c, _) in &merged {
                    col_rows[c].insert(i);
                }
                rows[i] = merged;
                ops.push((i, mult));
            }
            pivot_rows.push(p);
            eliminations.push(ops);
            upper.push(prow);
        }
        Ok(Self {
            n,
            pivot_rows,
            eliminations,
            upper,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                op: "lu solve",
                expected: self.n,
                found: b.len(),
            });
        }
        let mut y = b.to_vec();
        for (k, ops) in self.eliminations.iter().enumerate() {
            let yp = y[self.pivot_rows[k]];
            for &(i, m) in ops {
                y[i] -= m * yp;
            }
        }
        let mut x = vec![0.0; self.n];
        for k in (0..self.n).rev() {
            let mut s = y[self.pivot_rows[k]];
            let mut diag = 0.0;
            for &(c, v) in &self.upper[k] {
                if c == k {
                    diag = v;
                } else {
                    s -= v * x[c];
                }
            }
            x[k] = s / diag;
        }
        Ok(x)
    }
}

fn leading(row: &SparseRow, col: usize) -> f64 {
    row.binary_search_by_key(&col, |&(c, _)| c)
        .map_or(0.0, |k| row[k].1)
}

/// `a + alpha * b` over sorted sparse rows, dropping exact zeros.
pub(crate) fn axpy_row(a: &[(usize, f64)], alpha: f64, b: &[(usize, f64)]) -> SparseRow {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (c, v) = if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            i += 1;
            a[i - 1]
        } else if i == a.len() || b[j].0 < a[i].0 {
            j += 1;
            (b[j - 1].0, alpha * b[j - 1].1)
        } else {
            i += 1;
            j += 1;
            (a[i - 1].0, a[i - 1].1 + alpha * b[j - 1].1)
        };
        if v != 0.0 {
            out.push((c, v));
        }
    }
    out
}

/// Solves a square nonsingular system by sparse LU.
pub fn lu_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Lu::factor(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_permutation() {
        let b = [3.0, 4.0];
        assert_eq!(
            lu_solve(&SparseMatrix::identity(2), &b).unwrap(),
            b.to_vec()
        );
        let p = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(lu_solve(&p, &b).unwrap(), vec![4.0, 3.0]);
    }

    #[test]
    fn singular_reports_step() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            lu_solve(&a, &[1.0, 1.0]),
            Err(LinalgError::Singular { pivot: 1 })
        ));
        let z = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            Lu::factor(&z),
            Err(LinalgError::Singular { pivot: 1 })
        ));
    }

    #[test]
    fn unsymmetric_three_by_three() {
        // x = [1, -1, 2]
        let a = SparseMatrix::from_dense(&[
            vec![0.0, 2.0, 1.0],
            vec![3.0, 0.0, -1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        let x = lu_solve(&a, &[0.0, 1.0, 2.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, -1.0, 2.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn axpy_drops_cancellation() {
        let r = axpy_row(&[(0, 1.0), (2, 2.0)], -1.0, &[(0, 1.0), (1, 3.0)]);
        assert_eq!(r, vec![(1, -3.0), (2, 2.0)]);
    }
}
