//! Sparse matrix storage, products and direct solvers.

mod cholesky;
mod lu;
pub mod mm;
mod ordering;
mod permutation;
mod sparse;

pub use cholesky::{solve_spd, Cholesky};
pub use lu::{lu_solve, Lu};
pub use permutation::Permutation;
pub use sparse::{SparseMatrix, SYMMETRY_TOL};

pub(crate) use lu::axpy_row;

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("entry ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("NaN value at ({row}, {col})")]
    NotANumber { row: usize, col: usize },
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix is not square ({nrows}x{ncols})")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("matrix is not positive definite (pivot at index {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("matrix is numerically singular (pivot step {pivot})")]
    Singular { pivot: usize },
    #[error("not a permutation")]
    InvalidPermutation,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
