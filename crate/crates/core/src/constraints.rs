//! Declaration of Dirichlet, tie and general multipoint constraints and
//! their assembly into the relation `B v = v_DB`.
//!
//! Rows are stored exactly as declared: no normalization is applied, so a
//! reaction reported for a row carries that row's scaling.

use std::fmt;

use crate::linalg::SparseMatrix;
use crate::profile::Profile;

/// Coefficients below this magnitude do not count as a real term.
pub const MIN_COEFFICIENT: f64 = 1e-14;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConstraintError {
    #[error("constraint '{label}': dof {dof} out of range for {n_dofs} dofs")]
    DofOutOfRange {
        label: String,
        dof: usize,
        n_dofs: usize,
    },
    #[error("constraint '{label}' prescribes dof {dof}, already prescribed by '{existing}'")]
    DuplicateDirichlet {
        label: String,
        existing: String,
        dof: usize,
    },
    #[error("constraint '{label}': tie needs two distinct dofs (got {dof} twice)")]
    SelfTie { label: String, dof: usize },
    #[error("constraint '{label}' has no terms")]
    EmptyTerms { label: String },
    #[error("constraint '{label}' lists dof {dof} more than once")]
    DuplicateDof { label: String, dof: usize },
    #[error("constraint '{label}' has no coefficient of magnitude >= {MIN_COEFFICIENT:e}")]
    ZeroCoefficients { label: String },
    #[error("constraint '{label}': non-finite coefficient or value")]
    NonFinite { label: String },
    #[error("constraint '{label}': {message}")]
    InvalidProfile { label: String, message: String },
    #[error("{count} constraints exceed the {n_dofs} available dofs")]
    TooManyConstraints { count: usize, n_dofs: usize },
    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Dirichlet,
    Tie,
    Linear,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::Dirichlet => "dirichlet",
            ConstraintKind::Tie => "tie",
            ConstraintKind::Linear => "linear",
        })
    }
}

/// One row `bᵀ v = rhs`, with terms sorted by dof.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    terms: Vec<(usize, f64)>,
    rhs: f64,
    label: String,
    kind: ConstraintKind,
    profile: Profile,
}

impl Constraint {
    pub fn dirichlet(dof: usize, value: f64) -> Self {
        Self {
            terms: vec![(dof, 1.0)],
            rhs: value,
            label: format!("dirichlet({dof})"),
            kind: ConstraintKind::Dirichlet,
            profile: Profile::Constant,
        }
    }

    /// `v[a] - v[b] = 0`. Terms are stored sorted by dof, so `tie(1, 0)`
    /// is the row `[-1, 1]`.
    pub fn tie(dof_a: usize, dof_b: usize) -> Result<Self, ConstraintError> {
        let label = format!("tie({dof_a},{dof_b})");
        if dof_a == dof_b {
            return Err(ConstraintError::SelfTie { label, dof: dof_a });
        }
        let mut terms = vec![(dof_a, 1.0), (dof_b, -1.0)];
        terms.sort_by_key(|&(d, _)| d);
        Ok(Self {
            terms,
            rhs: 0.0,
            label,
            kind: ConstraintKind::Tie,
            profile: Profile::Constant,
        })
    }

    /// General multipoint row. Exactly-zero coefficients are discarded.
    pub fn linear(terms: &[(usize, f64)], rhs: f64) -> Result<Self, ConstraintError> {
        let label = format!(
            "linear({})",
            terms
                .iter()
                .map(|(d, _)| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let c = Self {
            terms: terms.to_vec(),
            rhs,
            label,
            kind: ConstraintKind::Linear,
            profile: Profile::Constant,
        };
        c.canonical()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = profile;
        self
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn rhs(&self) -> f64 {
        self.rhs
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    fn canonical(mut self) -> Result<Self, ConstraintError> {
        let label = self.label.clone();
        if self.terms.is_empty() {
            return Err(ConstraintError::EmptyTerms { label });
        }
        if !self.rhs.is_finite() || self.terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(ConstraintError::NonFinite { label });
        }
        self.terms.sort_by_key(|&(d, _)| d);
        if let Some(w) = self.terms.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(ConstraintError::DuplicateDof { label, dof: w[0].0 });
        }
        self.terms.retain(|&(_, c)| c != 0.0);
        if !self.terms.iter().any(|(_, c)| c.abs() >= MIN_COEFFICIENT) {
            return Err(ConstraintError::ZeroCoefficients { label });
        }
        if let Err(message) = self.profile.validate() {
            return Err(ConstraintError::InvalidProfile { label, message });
        }
        Ok(self)
    }
}

/// Ordered constraint declarations over a fixed number of dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    n_dofs: usize,
    constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(n_dofs: usize) -> Self {
        Self {
            n_dofs,
            constraints: Vec::new(),
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Appends a constraint after checking it against the set.
    pub fn push(&mut self, constraint: Constraint) -> Result<&mut Self, ConstraintError> {
        let constraint = constraint.canonical()?;
        if let Some(&(dof, _)) = constraint.terms.iter().find(|(d, _)| *d >= self.n_dofs) {
            return Err(ConstraintError::DofOutOfRange {
                label: constraint.label,
                dof,
                n_dofs: self.n_dofs,
            });
        }
        if constraint.kind == ConstraintKind::Dirichlet {
            let dof = constraint.terms[0].0;
            if let Some(existing) = self
                .constraints
                .iter()
                .find(|c| c.kind == ConstraintKind::Dirichlet && c.terms[0].0 == dof)
            {
                return Err(ConstraintError::DuplicateDirichlet {
                    label: constraint.label,
                    existing: existing.label.clone(),
                    dof,
                });
            }
        }
        if self.constraints.len() + 1 > self.n_dofs {
            return Err(ConstraintError::TooManyConstraints {
                count: self.constraints.len() + 1,
                n_dofs: self.n_dofs,
            });
        }
        self.constraints.push(constraint);
        Ok(self)
    }

    pub fn add_dirichlet(&mut self, dof: usize, value: f64) -> Result<&mut Self, ConstraintError> {
        self.push(Constraint::dirichlet(dof, value))
    }

    pub fn add_tie(&mut self, dof_a: usize, dof_b: usize) -> Result<&mut Self, ConstraintError> {
        self.push(Constraint::tie(dof_a, dof_b)?)
    }

    pub fn add_linear(
        &mut self,
        terms: &[(usize, f64)],
        rhs: f64,
    ) -> Result<&mut Self, ConstraintError> {
        self.push(Constraint::linear(terms, rhs)?)
    }

    /// Stacks the declarations into `B` and `v_DB` in declaration order.
    pub fn assemble(&self) -> ConstraintSystem {
        let entries: Vec<_> = self
            .constraints
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.terms.iter().map(move |&(d, v)| (i, d, v)))
            .collect();
        let b = SparseMatrix::from_triplets(self.constraints.len(), self.n_dofs, &entries)
            .expect("constraint terms are validated on insertion");
        ConstraintSystem {
            b,
            v_db: self.constraints.iter().map(|c| c.rhs).collect(),
            v_db_vel: None,
            v_db_acc: None,
            labels: self.constraints.iter().map(|c| c.label.clone()).collect(),
            kinds: self.constraints.iter().map(|c| c.kind).collect(),
            profiles: self.constraints.iter().map(|c| c.profile).collect(),
        }
    }
}

/// The assembled relation `B v(t) = v_DB(t)`.
///
/// `v_DB(t)` is the nominal right-hand side scaled row-wise by each
/// constraint's time profile. Rates default to the analytic profile
/// derivatives (zero for constant data) unless explicit vectors are set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    b: SparseMatrix,
    v_db: Vec<f64>,
    v_db_vel: Option<Vec<f64>>,
    v_db_acc: Option<Vec<f64>>,
    labels: Vec<String>,
    kinds: Vec<ConstraintKind>,
    profiles: Vec<Profile>,
}

impl ConstraintSystem {
    /// The system with no constraints over `n_dofs` dofs.
    pub fn empty(n_dofs: usize) -> Self {
        ConstraintSet::new(n_dofs).assemble()
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    /// Nominal prescribed values.
    pub fn v_db(&self) -> &[f64] {
        &self.v_db
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kinds(&self) -> &[ConstraintKind] {
        &self.kinds
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn n_dofs(&self) -> usize {
        self.b.ncols()
    }

    pub fn len(&self) -> usize {
        self.b.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.b.nrows() == 0
    }

    /// True when every row is a Dirichlet declaration.
    pub fn is_pure_dirichlet(&self) -> bool {
        self.kinds.iter().all(|&k| k == ConstraintKind::Dirichlet)
    }

    /// Overrides the prescribed velocity and acceleration vectors.
    pub fn with_rates(
        mut self,
        velocity: Vec<f64>,
        acceleration: Vec<f64>,
    ) -> Result<Self, ConstraintError> {
        for (what, v) in [("velocity", &velocity), ("acceleration", &acceleration)] {
            if v.len() != self.len() {
                return Err(ConstraintError::LengthMismatch {
                    what,
                    expected: self.len(),
                    found: v.len(),
                });
            }
        }
        self.v_db_vel = Some(velocity);
        self.v_db_acc = Some(acceleration);
        Ok(self)
    }

    /// True when prescribed values are constant in time with zero rates.
    pub fn is_time_invariant(&self) -> bool {
        self.v_db_vel.is_none() && self.profiles.iter().all(Profile::is_constant)
    }

    pub fn values_at(&self, t: f64) -> Vec<f64> {
        self.v_db
            .iter()
            .zip(&self.profiles)
            .map(|(v, p)| v * p.value(t))
            .collect()
    }

    pub fn velocities_at(&self, t: f64) -> Vec<f64> {
        match &self.v_db_vel {
            Some(v) => v.clone(),
            None => self
                .v_db
                .iter()
                .zip(&self.profiles)
                .map(|(v, p)| v * p.rate(t))
                .collect(),
        }
    }

    pub fn accelerations_at(&self, t: f64) -> Vec<f64> {
        match &self.v_db_acc {
            Some(v) => v.clone(),
            None => self
                .v_db
                .iter()
                .zip(&self.profiles)
                .map(|(v, p)| v * p.acceleration(t))
                .collect(),
        }
    }

    /// `max |B v - v_DB(t)|`.
    pub fn residual_at(&self, v: &[f64], t: f64) -> f64 {
        let bv = self.b.matvec(v).expect("vector length matches dofs");
        bv.iter()
            .zip(self.values_at(t))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// The end-to-end satisfaction tolerance `1e-10 (1 + max|v_DB(t)|)`.
    pub fn satisfaction_tolerance_at(&self, t: f64) -> f64 {
        1e-10 * (1.0 + self.values_at(t).iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_b(cs: &ConstraintSystem) -> Vec<Vec<f64>> {
        cs.b().to_dense()
    }

    #[test]
    fn dirichlet_rows() {
        let mut set = ConstraintSet::new(4);
        set.add_dirichlet(0, 0.0)
            .unwrap()
            .add_dirichlet(3, 2.5)
            .unwrap();
        let cs = set.assemble();
        assert_eq!(
            dense_b(&cs),
            vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]
        );
        assert_eq!(cs.v_db(), &[0.0, 2.5]);
    }

    #[test]
    fn duplicate_dirichlet_names_both() {
        let mut set = ConstraintSet::new(4);
        set.push(Constraint::dirichlet(0, 1.0).with_label("left"))
            .unwrap();
        let err = set
            .push(Constraint::dirichlet(0, 1.0).with_label("again"))
            .unwrap_err();
        assert_eq!(
            err,
            ConstraintError::DuplicateDirichlet {
                label: "again".into(),
                existing: "left".into(),
                dof: 0
            }
        );
        assert!(err.to_string().contains("left") && err.to_string().contains("again"));
    }

    #[test]
    fn dirichlet_out_of_range() {
        let mut set = ConstraintSet::new(2);
        assert!(matches!(
            set.add_dirichlet(2, 0.0),
            Err(ConstraintError::DofOutOfRange { dof: 2, .. })
        ));
    }

    #[test]
    fn tie_rows() {
        let mut set = ConstraintSet::new(3);
        set.add_tie(0, 1).unwrap();
        assert_eq!(dense_b(&set.assemble()), vec![vec![1.0, -1.0, 0.0]]);

        let mut set = ConstraintSet::new(2);
        set.add_tie(1, 0).unwrap();
        assert_eq!(set.constraints()[0].terms(), &[(0, -1.0), (1, 1.0)]);
        assert_eq!(set.assemble().v_db(), &[0.0]);

        assert!(matches!(
            ConstraintSet::new(2).add_tie(0, 0),
            Err(ConstraintError::SelfTie { .. })
        ));
    }

    #[test]
    fn linear_rows() {
        let mut set = ConstraintSet::new(3);
        set.add_linear(&[(0, 0.5), (1, 0.5)], 1.0).unwrap();
        set.add_linear(&[(0, 1.0), (1, -2.0), (2, 1.0)], 0.0)
            .unwrap();
        let cs = set.assemble();
        assert_eq!(
            dense_b(&cs),
            vec![vec![0.5, 0.5, 0.0], vec![1.0, -2.0, 1.0]]
        );
        assert_eq!(cs.v_db(), &[1.0, 0.0]);
    }

    #[test]
    fn linear_errors() {
        let mut set = ConstraintSet::new(3);
        assert!(matches!(
            set.add_linear(&[], 0.0),
            Err(ConstraintError::EmptyTerms { .. })
        ));
        assert!(matches!(
            set.add_linear(&[(1, 1.0), (1, 2.0)], 0.0),
            Err(ConstraintError::DuplicateDof { dof: 1, .. })
        ));
        assert!(matches!(
            set.add_linear(&[(0, 0.0), (1, 1e-16)], 0.0),
            Err(ConstraintError::ZeroCoefficients { .. })
        ));
        assert!(matches!(
            set.add_linear(&[(0, f64::NAN)], 0.0),
            Err(ConstraintError::NonFinite { .. })
        ));
        set.add_linear(&[(0, 1.0), (2, 0.0)], 0.0).unwrap();
        assert_eq!(set.constraints()[0].terms(), &[(0, 1.0)]);
    }

    #[test]
    fn assemble_mixed_in_declaration_order() {
        let mut set = ConstraintSet::new(3);
        set.add_dirichlet(0, 0.0).unwrap().add_tie(1, 2).unwrap();
        let cs = set.assemble();
        assert_eq!(
            dense_b(&cs),
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, -1.0]]
        );
        assert_eq!(cs.v_db(), &[0.0, 0.0]);
        assert!(!cs.is_pure_dirichlet());
        assert!(cs.is_time_invariant());
        assert_eq!(cs.velocities_at(1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn too_many_constraints() {
        let mut set = ConstraintSet::new(2);
        set.add_dirichlet(0, 0.0)
            .unwrap()
            .add_dirichlet(1, 0.0)
            .unwrap();
        assert!(matches!(
            set.add_tie(0, 1),
            Err(ConstraintError::TooManyConstraints { .. })
        ));
    }

    #[test]
    fn profiles_scale_values() {
        let mut set = ConstraintSet::new(2);
        set.push(Constraint::dirichlet(1, 2.0).with_profile(Profile::Ramp { duration: 4.0 }))
            .unwrap();
        let cs = set.assemble();
        assert!(!cs.is_time_invariant());
        assert_eq!(cs.values_at(1.0), vec![0.5]);
        assert_eq!(cs.velocities_at(1.0), vec![0.5]);
        let cs = cs.with_rates(vec![3.0], vec![0.0]).unwrap();
        assert_eq!(cs.velocities_at(1.0), vec![3.0]);
    }
}
