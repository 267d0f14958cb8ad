//! Dense reference solvers for cross-checking the null-space path:
//! master-slave elimination with full pivoting, and the penalty method.
//!
//! These work on dense `nalgebra` matrices and share nothing with the
//! sparse kernels beyond reading the input matrices. Both solve the static
//! problem with the constant load and nominal prescribed values.

use nalgebra::{DMatrix, DVector};

use crate::constraints::ConstraintSystem;
use crate::reduction::AssembledSystem;

/// Relative threshold below which a fully pivoted row is treated as zero.
const RANK_TOL: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("constraint '{label}' is inconsistent with the others")]
    Infeasible { label: String },
    #[error("reduced system is singular")]
    Singular,
    #[error("penalty parameter must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("dimension mismatch between system ({system}) and constraints ({constraints})")]
    DimensionMismatch { system: usize, constraints: usize },
}

fn dense(m: &crate::linalg::SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplets() {
        d[(i, j)] = v;
    }
    d
}

fn check_dims(sys: &AssembledSystem, cs: &ConstraintSystem) -> Result<(), OracleError> {
    if sys.n() != cs.n_dofs() {
        return Err(OracleError::DimensionMismatch {
            system: sys.n(),
            constraints: cs.n_dofs(),
        });
    }
    Ok(())
}

fn dense_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>, OracleError> {
    if a.nrows() == 0 {
        return Ok(b);
    }
    let scale = a.amax();
    let lu = a.full_piv_lu();
    let u_min = lu.u().diagonal().amin();
    if u_min.is_nan() || u_min <= 1e-13 * scale {
        return Err(OracleError::Singular);
    }
    lu.solve(&b).ok_or(OracleError::Singular)
}

/// Master-slave elimination: `B` is reduced to row echelon form with full
/// pivoting, pivot (slave) dofs are expressed through the remaining master
/// dofs as `v = T v_m + g`, and `Tᵀ K T v_m = Tᵀ (F − K g)` is solved
/// densely.
pub fn dense_elimination_solve(
    sys: &AssembledSystem,
    cs: &ConstraintSystem,
) -> Result<Vec<f64>, OracleError> {
    check_dims(sys, cs)?;
    let n = sys.n();
    let mut b = dense(cs.b());
    let mut rhs = DVector::from_column_slice(cs.v_db());
    let mut labels: Vec<String> = cs.labels().to_vec();
    let m = b.nrows();
    let b_scale = b.amax();
    let rhs_scale = 1.0 + rhs.amax();

    let mut pivots: Vec<usize> = Vec::new();
    let mut is_pivot = vec![false; n];
    let mut r = 0;
    while r < m {
        // Full pivoting over the unreduced block.
        let mut best = (0.0, r, 0);
        for i in r..m {
            for j in (0..n).filter(|&j| !is_pivot[j]) {
                if b[(i, j)].abs() > best.0 {
                    best = (b[(i, j)].abs(), i, j);
                }
            }
        }
        if best.0 <= RANK_TOL * b_scale {
            break;
        }
        let (_, pi, pj) = best;
        b.swap_rows(r, pi);
        rhs.swap_rows(r, pi);
        labels.swap(r, pi);
        let p = b[(r, pj)];
        for i in 0..m {
            if i != r && b[(i, pj)] != 0.0 {
                let f = b[(i, pj)] / p;
                for j in 0..n {
                    b[(i, j)] -= f * b[(r, j)];
                }
                b[(i, pj)] = 0.0;
                rhs[i] -= f * rhs[r];
            }
        }
        pivots.push(pj);
        is_pivot[pj] = true;
        r += 1;
    }
    for i in r..m {
        if rhs[i].abs() > CONSISTENCY_TOL * rhs_scale {
            return Err(OracleError::Infeasible {
                label: labels[i].clone(),
            });
        }
    }

    let masters: Vec<usize> = (0..n).filter(|&j| !is_pivot[j]).collect();
    let mut t = DMatrix::zeros(n, masters.len());
    let mut g = DVector::zeros(n);
    for (c, &j) in masters.iter().enumerate() {
        t[(j, c)] = 1.0;
    }
    for (k, &pj) in pivots.iter().enumerate() {
        let p = b[(k, pj)];
        g[pj] = rhs[k] / p;
        for (c, &j) in masters.iter().enumerate() {
            t[(pj, c)] = -b[(k, j)] / p;
        }
    }

    let kd = dense(sys.stiffness());
    let f = DVector::from_column_slice(sys.load().constant());
    let k_red = t.transpose() * &kd * &t;
    let f_red = t.transpose() * (f - &kd * &g);
    let vm = dense_solve(k_red, f_red)?;
    Ok((t * vm + g).as_slice().to_vec())
}

/// Solves `(K + α BᵀB) v = F + α Bᵀ v_DB`.
pub fn penalty_solve(
    sys: &AssembledSystem,
    cs: &ConstraintSystem,
    alpha: f64,
) -> Result<Vec<f64>, OracleError> {
    check_dims(sys, cs)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(OracleError::InvalidAlpha(alpha));
    }
    let b = dense(cs.b());
    let bt = b.transpose();
    let a = dense(sys.stiffness()) + alpha * &bt * &b;
    let rhs = DVector::from_column_slice(sys.load().constant())
        + alpha * &bt * DVector::from_column_slice(cs.v_db());
    Ok(dense_solve(a, rhs)?.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintSet;
    use crate::linalg::SparseMatrix;
    use crate::reduction::LoadVector;

    fn chain_problem() -> (AssembledSystem, ConstraintSystem) {
        let k = SparseMatrix::from_dense(&[
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ])
        .unwrap();
        let sys = AssembledSystem::new(k)
            .unwrap()
            .with_load(LoadVector::from_constant(vec![0.0, 0.0, 1.0]))
            .unwrap();
        let mut set = ConstraintSet::new(3);
        set.add_dirichlet(0, 0.0).unwrap();
        (sys, set.assemble())
    }

    #[test]
    fn elimination_chain() {
        let (sys, cs) = chain_problem();
        let v = dense_elimination_solve(&sys, &cs).unwrap();
        for (a, b) in v.iter().zip([0.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn elimination_without_constraints() {
        let k = SparseMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let sys = AssembledSystem::new(k)
            .unwrap()
            .with_load(LoadVector::from_constant(vec![0.0, 1.0]))
            .unwrap();
        let v = dense_elimination_solve(&sys, &ConstraintSystem::empty(2)).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn elimination_rejects_inconsistent_and_singular() {
        let (sys, _) = chain_problem();
        let mut set = ConstraintSet::new(3);
        set.add_dirichlet(0, 0.0).unwrap();
        set.add_linear(&[(0, 2.0)], 1.0).unwrap();
        assert!(matches!(
            dense_elimination_solve(&sys, &set.assemble()),
            Err(OracleError::Infeasible { .. })
        ));
        assert_eq!(
            dense_elimination_solve(&sys, &ConstraintSystem::empty(3)),
            Err(OracleError::Singular)
        );
    }

    #[test]
    fn penalty_chain() {
        let (sys, cs) = chain_problem();
        let v = penalty_solve(&sys, &cs, 1e8).unwrap();
        for (a, b) in v.iter().zip([0.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(penalty_solve(&sys, &cs, 0.0).is_err());
    }
}
