//! Sparse null-space basis `C` of the constraint matrix `B` and a sparse
//! particular solution `v_p` with `B v_p = v_DB`.
//!
//! Rows of `B` are reduced in declaration order against the pivot rows
//! found so far. Each surviving row contributes one pivot column; the
//! reduced pivot rows form an upper-triangular factor `[U1 | U2]` of
//! `B P`. Columns of `C` and the particular solution come from sparse
//! back substitution with `U1`, so `U1⁻¹` is never formed.
//!
//! Any displacement `v = C w + v_p` satisfies `B v = v_DB`.

use std::collections::{BTreeSet, BinaryHeap, HashMap};

use crate::constraints::ConstraintSystem;
use crate::linalg::{axpy_row, Cholesky, Permutation, SparseMatrix};

/// A reduced row is redundant when its largest entry is at most
/// `REDUNDANCY_TOL * max|B|`.
pub const REDUNDANCY_TOL: f64 = 1e-12;
/// A redundant row is inconsistent when its reduced right-hand side
/// exceeds `INFEASIBILITY_TOL * (1 + max|v_DB|)`.
pub const INFEASIBILITY_TOL: f64 = 1e-10;
const NOISE_TOL: f64 = 1e-15;
/// Basis residual tolerances checked by [`verify_basis`].
pub const BASIS_TOL: f64 = 1e-12;
/// Candidates for a pivot must reach this fraction of the row's largest
/// entry before fill is taken into account.
pub const PIVOT_THRESHOLD: f64 = 0.1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NullspaceError {
    #[error(
        "constraint '{label}' (row {row}) is inconsistent with earlier constraints \
         (reduced right-hand side {residual:e})"
    )]
    Infeasible {
        row: usize,
        label: String,
        residual: f64,
    },
    #[error("right-hand side has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedRow {
    pub row: usize,
    pub label: String,
    pub reason: String,
}

type SparseRow = Vec<(usize, f64)>;

/// Null basis of `B`, particular solution and the elimination factors used
/// to map further right-hand sides to particular solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct NullBasis {
    c: SparseMatrix,
    v_p: Vec<f64>,
    col_perm: Permutation,
    rank: usize,
    dropped_rows: Vec<DroppedRow>,
    factors: Factors,
}

#[derive(Debug, Clone, PartialEq)]
struct Factors {
    labels: Vec<String>,
    /// For every row of `B`, `(pivot step, multiplier)` pairs applied to it.
    multipliers: Vec<Vec<(usize, f64)>>,
    /// Row of `B` that became pivot `k`, `None` for dropped rows.
    step_of_row: Vec<Option<usize>>,
    pivot_cols: Vec<usize>,
    pivot_vals: Vec<f64>,
    /// Above-diagonal part of `U1` by pivot column: `(step i < k, value)`.
    u1_cols: Vec<Vec<(usize, f64)>>,
}

impl NullBasis {
    /// `C = I`, `v_p = 0`: the basis for an unconstrained system.
    pub fn identity(n: usize) -> Self {
        Self {
            c: SparseMatrix::identity(n),
            v_p: vec![0.0; n],
            col_perm: Permutation::identity(n),
            rank: 0,
            dropped_rows: Vec::new(),
            factors: Factors {
                labels: Vec::new(),
                multipliers: Vec::new(),
                step_of_row: Vec::new(),
                pivot_cols: Vec::new(),
                pivot_vals: Vec::new(),
                u1_cols: Vec::new(),
            },
        }
    }

    pub fn c(&self) -> &SparseMatrix {
        &self.c
    }

    /// Particular solution for the nominal `v_DB`.
    pub fn v_p(&self) -> &[f64] {
        &self.v_p
    }

    /// Pivot columns first (in pivot order), then free columns ascending.
    pub fn col_perm(&self) -> &Permutation {
        &self.col_perm
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dropped_rows(&self) -> &[DroppedRow] {
        &self.dropped_rows
    }

    pub fn n_dofs(&self) -> usize {
        self.c.nrows()
    }

    /// Dimension of the reduced space, `n - rank`.
    pub fn n_reduced(&self) -> usize {
        self.c.ncols()
    }

    /// Dofs carrying a pivot, in pivot order.
    pub fn pivot_dofs(&self) -> &[usize] {
        &self.factors.pivot_cols
    }

    /// Particular solution `v_p` with `B v_p = rhs`, using the stored
    /// factors. Redundant rows must be consistent with `rhs`.
    pub fn particular(&self, rhs: &[f64]) -> Result<Vec<f64>, NullspaceError> {
        let f = &self.factors;
        if rhs.len() != f.multipliers.len() {
            return Err(NullspaceError::LengthMismatch {
                expected: f.multipliers.len(),
                found: rhs.len(),
            });
        }
        let tol = INFEASIBILITY_TOL * (1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let mut reduced = vec![0.0; self.rank];
        for (row, ops) in f.multipliers.iter().enumerate() {
            let mut r = rhs[row];
            for &(k, m) in ops {
                r -= m * reduced[k];
            }
            match f.step_of_row[row] {
                Some(k) => reduced[k] = r,
                None if r.abs() > tol => {
                    return Err(NullspaceError::Infeasible {
                        row,
                        label: f.labels[row].clone(),
                        residual: r,
                    })
                }
                None => {}
            }
        }
        let x = f.back_substitute(reduced.into_iter().enumerate().filter(|(_, v)| *v != 0.0));
        let mut v = vec![0.0; self.n_dofs()];
        for (k, xk) in x {
            v[f.pivot_cols[k]] = xk;
        }
        Ok(v)
    }

    /// Maps a reduced vector back to the full space: `C w + v_p`.
    pub fn expand(&self, w: &[f64], v_p: &[f64]) -> Vec<f64> {
        let mut v = self
            .c
            .matvec(w)
            .expect("reduced vector length matches basis");
        for (vi, p) in v.iter_mut().zip(v_p) {
            *vi += p;
        }
        v
    }
}

impl Factors {
    /// Solves `U1 x = b` for sparse `b`, visiting only reachable steps.
    /// Returns the nonzero entries of `x` as `(step, value)`.
    fn back_substitute(&self, b: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
        let mut x: Vec<(usize, f64)> = Vec::new();
        let mut work: HashMap<usize, f64> = HashMap::new();
        let mut heap = BinaryHeap::new();
        for (k, v) in b {
            if work.insert(k, v).is_none() {
                heap.push(k);
            }
        }
        while let Some(k) = heap.pop() {
            let xk = work[&k] / self.pivot_vals[k];
            if xk == 0.0 {
                continue;
            }
            x.push((k, xk));
            for &(i, u) in &self.u1_cols[k] {
                let e = work.entry(i).or_insert_with(|| {
                    heap.push(i);
                    0.0
                });
                *e -= u * xk;
            }
        }
        x.sort_unstable_by_key(|&(k, _)| k);
        x
    }
}

/// Builds `C` and `v_p` for the relation `B v = v_DB`.
pub fn build_null_basis(cs: &ConstraintSystem) -> Result<NullBasis, NullspaceError> {
    let b = cs.b();
    let n = b.ncols();
    let m = b.nrows();
    let v_db = cs.v_db();
    let max_b = b.max_abs();
    let zero_tol = REDUNDANCY_TOL * max_b;
    let max_rhs = v_db.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rhs_tol = INFEASIBILITY_TOL * (1.0 + max_rhs);

    let mut col_count = vec![0usize; n];
    for &c in b.col_indices() {
        col_count[c] += 1;
    }

    let mut pivot_of_col: Vec<Option<usize>> = vec![None; n];
    let mut pivot_rows: Vec<SparseRow> = Vec::new();
    let mut pivot_cols = Vec::new();
    let mut pivot_vals: Vec<f64> = Vec::new();
    let mut reduced_rhs: Vec<f64> = Vec::new();
    let mut multipliers = Vec::with_capacity(m);
    let mut step_of_row = Vec::with_capacity(m);
    let mut dropped_rows = Vec::new();

    for (i, &rhs0) in v_db.iter().enumerate().take(m) {
        let mut row: SparseRow = b.row(i).collect();
        let mut rhs = rhs0;
        let mut ops = Vec::new();

        // Eliminate pivot columns in ascending step order; fill only ever
        // introduces later steps.
        let mut pending: BTreeSet<usize> =
            row.iter().filter_map(|&(c, _)| pivot_of_col[c]).collect();
        while let Some(k) = pending.pop_first() {
            let pc = pivot_cols[k];
            let Ok(pos) = row.binary_search_by_key(&pc, |&(c, _)| c) else {
                continue;
            };
            let mult = row[pos].1 / pivot_vals[k];
            row = axpy_row(&row, -mult, &pivot_rows[k]);
            if let Ok(pos) = row.binary_search_by_key(&pc, |&(c, _)| c) {
                row.remove(pos);
            }
            rhs -= mult * reduced_rhs[k];
            ops.push((k, mult));
            for &(c, _) in &pivot_rows[k] {
                if let Some(j) = pivot_of_col[c] {
                    if j > k {
                        pending.insert(j);
                    }
                }
            }
        }
        multipliers.push(ops);

        let row_max = row.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
        if row_max <= zero_tol {
            if rhs.abs() > rhs_tol {
                return Err(NullspaceError::Infeasible {
                    row: i,
                    label: cs.labels()[i].clone(),
                    residual: rhs,
                });
            }
            dropped_rows.push(DroppedRow {
                row: i,
                label: cs.labels()[i].clone(),
                reason: "linearly dependent on earlier constraints".into(),
            });
            step_of_row.push(None);
            continue;
        }
        // Cancellation noise only.
        row.retain(|&(_, v)| v.abs() > NOISE_TOL * max_b);

        // Among entries within PIVOT_THRESHOLD of the largest, maximise
        // |value| / (1 + column count); ties go to the lowest column.
        let mut best: Option<(usize, f64, f64)> = None;
        for &(c, v) in &row {
            if v.abs() < PIVOT_THRESHOLD * row_max {
                continue;
            }
            let score = v.abs() / (1.0 + col_count[c] as f64);
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((c, v, score));
            }
        }
        let (pc, pv, _) = best.expect("row has an entry at its maximum");
        let k = pivot_rows.len();
        pivot_of_col[pc] = Some(k);
        pivot_cols.push(pc);
        pivot_vals.push(pv);
        reduced_rhs.push(rhs);
        pivot_rows.push(row);
        step_of_row.push(Some(k));
    }

    let rank = pivot_rows.len();
    let mut u1_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rank];
    // Entries of pivot rows in free columns, grouped by column: -U2.
    let mut u2_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (k, row) in pivot_rows.iter().enumerate() {
        for &(c, v) in row {
            match pivot_of_col[c] {
                Some(j) if j == k => {}
                Some(j) => {
                    debug_assert!(j > k, "pivot rows are upper triangular");
                    u1_cols[j].push((k, v));
                }
                None => u2_cols[c].push((k, v)),
            }
        }
    }

    let factors = Factors {
        labels: cs.labels().to_vec(),
        multipliers,
        step_of_row,
        pivot_cols,
        pivot_vals,
        u1_cols,
    };

    let free_cols: Vec<usize> = (0..n).filter(|&c| pivot_of_col[c].is_none()).collect();
    let mut entries = Vec::new();
    for (j, &f) in free_cols.iter().enumerate() {
        entries.push((f, j, 1.0));
        let rhs = u2_cols[f].iter().map(|&(k, v)| (k, -v));
        for (k, x) in factors.back_substitute(rhs) {
            entries.push((factors.pivot_cols[k], j, x));
        }
    }
    let c = SparseMatrix::from_triplets(n, free_cols.len(), &entries)
        .expect("basis entries are in range");

    let mut forward = factors.pivot_cols.clone();
    forward.extend_from_slice(&free_cols);
    let col_perm = Permutation::new(forward).expect("pivot and free columns partition the dofs");

    let mut nb = NullBasis {
        c,
        v_p: Vec::new(),
        col_perm,
        rank,
        dropped_rows,
        factors,
    };
    nb.v_p = nb.particular(v_db)?;
    Ok(nb)
}

/// Residuals of a basis against its constraint system.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisReport {
    pub n_dofs: usize,
    pub rank: usize,
    pub n_columns: usize,
    /// `max |B C|`.
    pub max_bc: f64,
    /// `max |B v_p - v_DB|` over rows kept as pivots.
    pub max_particular_residual: f64,
    /// Same, over every row including dropped ones.
    pub max_particular_residual_all: f64,
    /// `Cᵀ C` admits a Cholesky factorization.
    pub full_column_rank: bool,
    pub bc_tolerance: f64,
    pub particular_tolerance: f64,
}

impl BasisReport {
    pub fn passed(&self) -> bool {
        self.max_bc <= self.bc_tolerance
            && self.max_particular_residual <= self.particular_tolerance
            && self.full_column_rank
            && self.rank + self.n_columns == self.n_dofs
    }
}

/// Checks `B C = 0`, `B v_p = v_DB` and the column rank of `C`.
/// Never fails: shape problems show up as failed checks.
pub fn verify_basis(cs: &ConstraintSystem, nb: &NullBasis) -> BasisReport {
    let b = cs.b();
    let max_rhs = cs.v_db().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut report = BasisReport {
        n_dofs: nb.n_dofs(),
        rank: nb.rank(),
        n_columns: nb.n_reduced(),
        max_bc: f64::INFINITY,
        max_particular_residual: f64::INFINITY,
        max_particular_residual_all: f64::INFINITY,
        full_column_rank: false,
        bc_tolerance: BASIS_TOL * b.max_abs().max(1.0),
        particular_tolerance: BASIS_TOL * (1.0 + max_rhs),
    };
    if b.ncols() != nb.n_dofs() || nb.v_p.len() != nb.n_dofs() {
        return report;
    }
    if let Ok(bc) = b.matmul(&nb.c) {
        report.max_bc = bc.max_abs();
    }
    if let Ok(bv) = b.matvec(&nb.v_p) {
        let dropped: BTreeSet<usize> = nb.dropped_rows.iter().map(|d| d.row).collect();
        let (mut kept, mut all) = (0.0f64, 0.0f64);
        for (i, (x, y)) in bv.iter().zip(cs.v_db()).enumerate() {
            let r = (x - y).abs();
            all = all.max(r);
            if !dropped.contains(&i) {
                kept = kept.max(r);
            }
        }
        report.max_particular_residual = kept;
        report.max_particular_residual_all = all;
    }
    let ctc = nb.c.transpose().matmul(&nb.c).ok();
    report.full_column_rank = ctc.is_some_and(|m| Cholesky::factor(&m).is_ok());
    report
}
