//! Enforcement of Dirichlet and linear multipoint constraints on assembled
//! finite-element systems `M v̈ + D v̇ + K v = F` by null-space projection.
//!
//! The constraints `B v = v_DB` are turned into a sparse basis `C` of the
//! null space of `B` and a particular solution `v_p`. Every field of the
//! form `v = C w + v_p` satisfies the constraints, so the system is solved
//! in the unconstrained coordinates `w`:
//!
//! ```text
//! CᵀMC ẅ + CᵀDC ẇ + CᵀKC w = Cᵀ (F − K v_p − D v̇_p − M v̈_p)
//! ```
//!
//! A static solve looks like this:
//!
//! ```
//! use nullfem::constraints::ConstraintSet;
//! use nullfem::femlab::{assemble_bar, point_load, Mesh1D};
//! use nullfem::{dynamics, nullspace, reduction};
//!
//! let mesh = Mesh1D::new(5, 2.0, 1.0, 1.0, 1.0).unwrap();
//! let sys = point_load(assemble_bar(&mesh).unwrap(), 4, 1.0).unwrap();
//! let mut set = ConstraintSet::new(5);
//! set.add_dirichlet(0, 0.0).unwrap();
//! let cs = set.assemble();
//!
//! let basis = nullspace::build_null_basis(&cs).unwrap();
//! let red = reduction::project(&sys, &cs, &basis).unwrap();
//! let w = dynamics::static_solve(&red).unwrap();
//! let v = reduction::recover(&basis, &w).unwrap();
//! assert!((v[4] - 2.0).abs() < 1e-12);
//! ```

pub mod constraints;
pub mod dynamics;
pub mod femlab;
pub mod linalg;
pub mod nullspace;
pub mod oracle;
pub mod profile;
pub mod reduction;

pub use constraints::{Constraint, ConstraintSet, ConstraintSystem};
pub use linalg::SparseMatrix;
pub use nullspace::{build_null_basis, verify_basis, NullBasis};
pub use reduction::{project, recover, AssembledSystem, ReducedSystem};
