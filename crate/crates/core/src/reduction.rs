//! Projection of `M v̈ + D v̇ + K v = F` onto the constrained subspace
//! `v = C w + v_p`, recovery of the full field and reaction forces.
//!
//! The reduced system is
//!
//! ```text
//! CᵀMC ẅ + CᵀDC ẇ + CᵀKC w = Cᵀ (F − K v_p − D v̇_p − M v̈_p)
//! ```
//!
//! where `v_p(t)` is the particular solution for the prescribed values at
//! time `t` and `v̇_p`, `v̈_p` are the particular solutions of their rates.
//! `B` and `C` are fixed, so projecting an updated assembled system against
//! the same [`NullBasis`] is the whole re-linearization step of a nonlinear
//! solver.

use crate::constraints::ConstraintSystem;
use crate::linalg::{LinalgError, SparseMatrix};
use crate::nullspace::{NullBasis, NullspaceError};
use crate::profile::Profile;

#[derive(Debug, thiserror::Error)]
pub enum ReductionError {
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Nullspace(#[from] NullspaceError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), ReductionError> {
    if expected == found {
        Ok(())
    } else {
        Err(ReductionError::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

/// A load `value * profile(t)` applied at one dof.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedLoad {
    pub dof: usize,
    pub value: f64,
    pub profile: Profile,
}

/// External force `F(t)`: a constant part plus profile-scaled point loads.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVector {
    constant: Vec<f64>,
    timed: Vec<TimedLoad>,
}

impl LoadVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            constant: vec![0.0; n],
            timed: Vec::new(),
        }
    }

    pub fn from_constant(constant: Vec<f64>) -> Self {
        Self {
            constant,
            timed: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.constant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constant.is_empty()
    }

    pub fn constant(&self) -> &[f64] {
        &self.constant
    }

    pub fn constant_mut(&mut self) -> &mut [f64] {
        &mut self.constant
    }

    pub fn timed(&self) -> &[TimedLoad] {
        &self.timed
    }

    pub fn push_timed(&mut self, load: TimedLoad) {
        if load.profile.is_constant() {
            self.constant[load.dof] += load.value;
        } else {
            self.timed.push(load);
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let mut f = self.constant.clone();
        for l in &self.timed {
            f[l.dof] += l.value * l.profile.value(t);
        }
        f
    }
}

/// Assembled second-order system `M v̈ + D v̇ + K v = F(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    mass: Option<SparseMatrix>,
    damping: Option<SparseMatrix>,
    stiffness: SparseMatrix,
    load: LoadVector,
}

impl AssembledSystem {
    /// A static system with zero load.
    pub fn new(stiffness: SparseMatrix) -> Result<Self, ReductionError> {
        if !stiffness.is_square() {
            return Err(LinalgError::NotSquare {
                nrows: stiffness.nrows(),
                ncols: stiffness.ncols(),
            }
            .into());
        }
        let n = stiffness.nrows();
        Ok(Self {
            mass: None,
            damping: None,
            stiffness,
            load: LoadVector::zeros(n),
        })
    }

    pub fn with_mass(mut self, mass: SparseMatrix) -> Result<Self, ReductionError> {
        check_len("mass matrix rows", self.n(), mass.nrows())?;
        check_len("mass matrix columns", self.n(), mass.ncols())?;
        self.mass = Some(mass);
        Ok(self)
    }

    pub fn with_damping(mut self, damping: SparseMatrix) -> Result<Self, ReductionError> {
        check_len("damping matrix rows", self.n(), damping.nrows())?;
        check_len("damping matrix columns", self.n(), damping.ncols())?;
        self.damping = Some(damping);
        Ok(self)
    }

    pub fn with_load(mut self, load: LoadVector) -> Result<Self, ReductionError> {
        check_len("load vector", self.n(), load.len())?;
        self.load = load;
        Ok(self)
    }

    /// Replaces the stiffness, e.g. after re-linearization.
    pub fn with_stiffness(mut self, stiffness: SparseMatrix) -> Result<Self, ReductionError> {
        check_len("stiffness rows", self.n(), stiffness.nrows())?;
        check_len("stiffness columns", self.n(), stiffness.ncols())?;
        self.stiffness = stiffness;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn mass(&self) -> Option<&SparseMatrix> {
        self.mass.as_ref()
    }

    pub fn damping(&self) -> Option<&SparseMatrix> {
        self.damping.as_ref()
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn load(&self) -> &LoadVector {
        &self.load
    }

    pub fn load_mut(&mut self) -> &mut LoadVector {
        &mut self.load
    }

    pub fn force_at(&self, t: f64) -> Vec<f64> {
        self.load.at(t)
    }
}

/// Particular solution and its rates at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticularState {
    pub value: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

/// The projected system in `w` coordinates, tied to the basis, constraint
/// system and assembled system it was built from.
#[derive(Debug, Clone)]
pub struct ReducedSystem<'a> {
    mass: Option<SparseMatrix>,
    damping: Option<SparseMatrix>,
    stiffness: SparseMatrix,
    basis: &'a NullBasis,
    constraints: &'a ConstraintSystem,
    system: &'a AssembledSystem,
    // Cᵀ K v_p for time-invariant prescribed values.
    constant_offset: Option<Vec<f64>>,
}

/// Projects every present matrix with `Cᵀ A C` and prepares the reduced
/// forcing.
pub fn project<'a>(
    system: &'a AssembledSystem,
    constraints: &'a ConstraintSystem,
    basis: &'a NullBasis,
) -> Result<ReducedSystem<'a>, ReductionError> {
    check_len("basis rows", system.n(), basis.n_dofs())?;
    check_len("constraint columns", system.n(), constraints.n_dofs())?;
    let c = basis.c();
    let stiffness = SparseMatrix::triple_product(c, system.stiffness())?;
    let mass = system
        .mass()
        .map(|m| SparseMatrix::triple_product(c, m))
        .transpose()?;
    let damping = system
        .damping()
        .map(|d| SparseMatrix::triple_product(c, d))
        .transpose()?;
    let constant_offset = if constraints.is_time_invariant() {
        let kvp = system.stiffness().matvec(basis.v_p())?;
        Some(c.transpose_matvec(&kvp)?)
    } else {
        None
    };
    Ok(ReducedSystem {
        mass,
        damping,
        stiffness,
        basis,
        constraints,
        system,
        constant_offset,
    })
}

impl<'a> ReducedSystem<'a> {
    pub fn mass(&self) -> Option<&SparseMatrix> {
        self.mass.as_ref()
    }

    pub fn damping(&self) -> Option<&SparseMatrix> {
        self.damping.as_ref()
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn basis(&self) -> &'a NullBasis {
        self.basis
    }

    pub fn constraints(&self) -> &'a ConstraintSystem {
        self.constraints
    }

    pub fn system(&self) -> &'a AssembledSystem {
        self.system
    }

    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    /// `v_p(t)`, `v̇_p(t)`, `v̈_p(t)` from the prescribed values and rates.
    pub fn particular_state(&self, t: f64) -> Result<ParticularState, ReductionError> {
        if self.constraints.is_time_invariant() {
            let n = self.basis.n_dofs();
            return Ok(ParticularState {
                value: self.basis.v_p().to_vec(),
                velocity: vec![0.0; n],
                acceleration: vec![0.0; n],
            });
        }
        Ok(ParticularState {
            value: self.basis.particular(&self.constraints.values_at(t))?,
            velocity: self.basis.particular(&self.constraints.velocities_at(t))?,
            acceleration: self
                .basis
                .particular(&self.constraints.accelerations_at(t))?,
        })
    }

    /// `Cᵀ (F(t) − K v_p − D v̇_p − M v̈_p)`.
    pub fn forcing(&self, t: f64) -> Result<Vec<f64>, ReductionError> {
        let c = self.basis.c();
        let mut f = self.system.force_at(t);
        if let Some(offset) = &self.constant_offset {
            let mut red = c.transpose_matvec(&f)?;
            for (r, o) in red.iter_mut().zip(offset) {
                *r -= o;
            }
            return Ok(red);
        }
        let p = self.particular_state(t)?;
        let mut subtract = |a: Option<&SparseMatrix>, x: &[f64]| -> Result<(), ReductionError> {
            if let Some(a) = a {
                for (fi, y) in f.iter_mut().zip(a.matvec(x)?) {
                    *fi -= y;
                }
            }
            Ok(())
        };
        subtract(Some(self.system.stiffness()), &p.value)?;
        subtract(self.system.damping(), &p.velocity)?;
        subtract(self.system.mass(), &p.acceleration)?;
        Ok(c.transpose_matvec(&f)?)
    }

    /// Full-space field at time `t` from reduced coordinates.
    pub fn recover_at(&self, w: &[f64], t: f64) -> Result<Vec<f64>, ReductionError> {
        check_len("reduced vector", self.dim(), w.len())?;
        let p = self.particular_state(t)?;
        Ok(self.basis.expand(w, &p.value))
    }
}

/// `v = C w + v_p` for the nominal prescribed values.
pub fn recover(basis: &NullBasis, w: &[f64]) -> Result<Vec<f64>, ReductionError> {
    check_len("reduced vector", basis.n_reduced(), w.len())?;
    Ok(basis.expand(w, basis.v_p()))
}

/// How reactions treat loads applied at constrained dofs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReactionMode {
    /// `B (K v − F)`: the net support reaction.
    #[default]
    Net,
    /// `B K v`, which equals `B K C w + B K v_p`.
    StiffnessOnly,
}

/// Static reaction per declared constraint from reduced coordinates.
pub fn reaction_forces(
    system: &AssembledSystem,
    constraints: &ConstraintSystem,
    basis: &NullBasis,
    w: &[f64],
    applied: &[f64],
) -> Result<Vec<f64>, ReductionError> {
    reaction_forces_with_mode(system, constraints, basis, w, applied, ReactionMode::Net)
}

pub fn reaction_forces_with_mode(
    system: &AssembledSystem,
    constraints: &ConstraintSystem,
    basis: &NullBasis,
    w: &[f64],
    applied: &[f64],
    mode: ReactionMode,
) -> Result<Vec<f64>, ReductionError> {
    let v = recover(basis, w)?;
    static_reactions(system, constraints, &v, applied, mode)
}

/// Static reactions from a full-space field, whatever method produced it.
pub fn static_reactions(
    system: &AssembledSystem,
    constraints: &ConstraintSystem,
    v: &[f64],
    applied: &[f64],
    mode: ReactionMode,
) -> Result<Vec<f64>, ReductionError> {
    check_len("field", system.n(), v.len())?;
    check_len("applied load", system.n(), applied.len())?;
    let mut r = system.stiffness().matvec(v)?;
    if mode == ReactionMode::Net {
        for (ri, f) in r.iter_mut().zip(applied) {
            *ri -= f;
        }
    }
    Ok(constraints.b().matvec(&r)?)
}

/// Full-space state `(v, v̇, v̈)` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub value: Vec<f64>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

/// `B (M v̈ + D v̇ + K v − F)`.
pub fn dynamic_reactions(
    system: &AssembledSystem,
    constraints: &ConstraintSystem,
    state: &FieldState,
    applied: &[f64],
) -> Result<Vec<f64>, ReductionError> {
    let mut r = static_reactions(
        system,
        constraints,
        &state.value,
        applied,
        ReactionMode::Net,
    )?;
    let b = constraints.b();
    if let Some(m) = system.mass() {
        for (ri, y) in r.iter_mut().zip(b.matvec(&m.matvec(&state.acceleration)?)?) {
            *ri += y;
        }
    }
    if let Some(d) = system.damping() {
        for (ri, y) in r.iter_mut().zip(b.matvec(&d.matvec(&state.velocity)?)?) {
            *ri += y;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintSet;
    use crate::nullspace::build_null_basis;

    fn chain() -> SparseMatrix {
        SparseMatrix::from_dense(&[
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ])
        .unwrap()
    }

    fn loaded_chain() -> AssembledSystem {
        AssembledSystem::new(chain())
            .unwrap()
            .with_load(LoadVector::from_constant(vec![0.0, 0.0, 1.0]))
            .unwrap()
    }

    fn fixed_left(value: f64) -> ConstraintSystem {
        let mut set = ConstraintSet::new(3);
        set.add_dirichlet(0, value).unwrap();
        set.assemble()
    }

    #[test]
    fn chain_projection() {
        let sys = loaded_chain();
        let cs = fixed_left(0.0);
        let nb = build_null_basis(&cs).unwrap();
        let red = project(&sys, &cs, &nb).unwrap();
        assert_eq!(
            red.stiffness().to_dense(),
            vec![vec![2.0, -1.0], vec![-1.0, 1.0]]
        );
        assert_eq!(red.forcing(0.0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn chain_projection_inhomogeneous() {
        let sys = loaded_chain();
        let cs = fixed_left(1.0);
        let nb = build_null_basis(&cs).unwrap();
        let red = project(&sys, &cs, &nb).unwrap();
        assert_eq!(red.forcing(0.0).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn unconstrained_projection_is_identity() {
        let m = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let k = SparseMatrix::from_dense(&[vec![3.0, -1.0], vec![-1.0, 3.0]]).unwrap();
        let sys = AssembledSystem::new(k.clone())
            .unwrap()
            .with_mass(m.clone())
            .unwrap()
            .with_load(LoadVector::from_constant(vec![1.0, -2.0]))
            .unwrap();
        let cs = ConstraintSystem::empty(2);
        let nb = NullBasis::identity(2);
        let red = project(&sys, &cs, &nb).unwrap();
        assert_eq!(red.stiffness(), &k);
        assert_eq!(red.mass(), Some(&m));
        assert!(red.damping().is_none());
        assert_eq!(red.forcing(0.0).unwrap(), vec![1.0, -2.0]);
        assert_eq!(recover(&nb, &[4.0, 5.0]).unwrap(), vec![4.0, 5.0]);
    }

    #[test]
    fn recovery() {
        let cs = fixed_left(0.0);
        let nb = build_null_basis(&cs).unwrap();
        assert_eq!(recover(&nb, &[1.0, 2.0]).unwrap(), vec![0.0, 1.0, 2.0]);
        assert_eq!(recover(&nb, &[0.0, 0.0]).unwrap(), nb.v_p().to_vec());
        assert!(recover(&nb, &[1.0]).is_err());
    }

    #[test]
    fn chain_reactions() {
        let sys = loaded_chain();
        let cs = fixed_left(0.0);
        let nb = build_null_basis(&cs).unwrap();
        let r = reaction_forces(&sys, &cs, &nb, &[1.0, 2.0], sys.load().constant()).unwrap();
        assert_eq!(r, vec![-1.0]);
    }

    #[test]
    fn rigid_translation_has_no_reaction() {
        let sys = AssembledSystem::new(chain()).unwrap();
        let cs = fixed_left(1.0);
        let nb = build_null_basis(&cs).unwrap();
        // v = [1, 1, 1]
        let r = reaction_forces(&sys, &cs, &nb, &[1.0, 1.0], &[0.0; 3]).unwrap();
        assert_eq!(r, vec![0.0]);
        let r0 = reaction_forces(
            &sys,
            &fixed_left(0.0),
            &build_null_basis(&fixed_left(0.0)).unwrap(),
            &[0.0, 0.0],
            &[0.0; 3],
        )
        .unwrap();
        assert_eq!(r0, vec![0.0]);
    }

    #[test]
    fn stiffness_only_mode_ignores_applied_load_at_support() {
        let mut sys = loaded_chain();
        sys.load_mut().constant_mut()[0] = 0.5;
        let cs = fixed_left(0.0);
        let nb = build_null_basis(&cs).unwrap();
        let f = sys.load().constant().to_vec();
        let net = reaction_forces(&sys, &cs, &nb, &[1.0, 2.0], &f).unwrap();
        let literal =
            reaction_forces_with_mode(&sys, &cs, &nb, &[1.0, 2.0], &f, ReactionMode::StiffnessOnly)
                .unwrap();
        assert_eq!(net, vec![-1.5]);
        assert_eq!(literal, vec![-1.0]);
    }

    #[test]
    fn timed_loads() {
        let mut l = LoadVector::zeros(2);
        l.push_timed(TimedLoad {
            dof: 1,
            value: 2.0,
            profile: Profile::Ramp { duration: 2.0 },
        });
        l.push_timed(TimedLoad {
            dof: 0,
            value: 1.0,
            profile: Profile::Constant,
        });
        assert_eq!(l.at(1.0), vec![1.0, 1.0]);
        assert_eq!(l.constant(), &[1.0, 0.0]);
    }

    #[test]
    fn time_varying_forcing_matches_definition() {
        use crate::constraints::Constraint;
        let m = SparseMatrix::from_dense(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 4.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        let sys = AssembledSystem::new(chain())
            .unwrap()
            .with_mass(m.clone())
            .unwrap();
        let mut set = ConstraintSet::new(3);
        let profile = Profile::Sinusoid {
            frequency: 0.5,
            phase: 0.0,
        };
        set.push(Constraint::dirichlet(0, 2.0).with_profile(profile))
            .unwrap();
        let cs = set.assemble();
        let nb = build_null_basis(&cs).unwrap();
        let red = project(&sys, &cs, &nb).unwrap();
        let t = 0.3;
        let g = 2.0 * profile.value(t);
        let a = 2.0 * profile.acceleration(t);
        // Cᵀ(−K e0 g − M e0 a) restricted to dofs 1, 2.
        let want = [g - a * 1.0, 0.0];
        let got = red.forcing(t).unwrap();
        for (x, y) in got.iter().zip(want) {
            assert!((x - y).abs() < 1e-14, "{got:?}");
        }
        let v = red.recover_at(&[0.0, 0.0], t).unwrap();
        assert!((v[0] - g).abs() < 1e-15);
    }
}
