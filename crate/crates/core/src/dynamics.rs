//! Static and Newmark-β solution of the reduced system.

use crate::linalg::{Cholesky, LinalgError, Lu, SparseMatrix, SYMMETRY_TOL};
use crate::nullspace::NullBasis;
use crate::reduction::{ReducedSystem, ReductionError};

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error(
        "reduced stiffness is singular: the system is under-constrained \
         and rigid-body modes remain ({0})"
    )]
    Underconstrained(LinalgError),
    #[error("effective Newmark matrix is singular ({0})")]
    SingularEffective(LinalgError),
    #[error("reduced mass matrix is singular ({0})")]
    SingularMass(LinalgError),
    #[error("dynamic analysis needs a mass matrix")]
    MissingMass,
    #[error("invalid Newmark parameters: {0}")]
    InvalidParams(String),
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A factored square matrix: Cholesky when possible, LU otherwise.
#[derive(Debug, Clone)]
pub enum Factorization {
    Cholesky(Cholesky),
    Lu(Lu),
}

impl Factorization {
    /// Tries Cholesky first. LU is used only for unsymmetric input, so a
    /// symmetric matrix that is not positive definite is rejected.
    pub fn new(a: &SparseMatrix) -> Result<Self, LinalgError> {
        match Cholesky::factor(a) {
            Ok(c) => Ok(Self::Cholesky(c)),
            Err(LinalgError::NotPositiveDefinite { pivot }) => {
                if a.is_symmetric(SYMMETRY_TOL) {
                    Err(LinalgError::NotPositiveDefinite { pivot })
                } else {
                    Ok(Self::Lu(Lu::factor(a)?))
                }
            }
            Err(e) => Err(e),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        match self {
            Self::Cholesky(c) => c.solve(b),
            Self::Lu(l) => l.solve(b),
        }
    }
}

/// Solves `K_red w = forcing(0)`.
pub fn static_solve(red: &ReducedSystem<'_>) -> Result<Vec<f64>, DynamicsError> {
    static_solve_at(red, 0.0)
}

/// Solves `K_red w = forcing(t)`.
pub fn static_solve_at(red: &ReducedSystem<'_>, t: f64) -> Result<Vec<f64>, DynamicsError> {
    let f = red.forcing(t)?;
    if red.dim() == 0 {
        return Ok(Vec::new());
    }
    let factor = Factorization::new(red.stiffness()).map_err(DynamicsError::Underconstrained)?;
    Ok(factor.solve(&f)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkParams {
    pub beta: f64,
    pub gamma: f64,
    pub dt: f64,
    pub steps: usize,
}

impl NewmarkParams {
    /// Average acceleration: β = 1/4, γ = 1/2.
    pub fn average_acceleration(dt: f64, steps: usize) -> Self {
        Self {
            beta: 0.25,
            gamma: 0.5,
            dt,
            steps,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidParams(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        // β = 0 is the explicit limit, which the displacement form used here
        // cannot represent.
        if !(self.beta > 0.0 && self.beta <= 0.5) {
            return bad("beta must lie in (0, 0.5]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Reduced displacement, velocity and acceleration at each output time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeHistory {
    pub times: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub w_dot: Vec<Vec<f64>>,
    pub w_ddot: Vec<Vec<f64>>,
}

impl TimeHistory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn mv(a: Option<&SparseMatrix>, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
    match a {
        Some(a) => a.matvec(x),
        None => Ok(vec![0.0; x.len()]),
    }
}

/// Integrates the reduced system with the Newmark-β method.
///
/// The effective matrix `K + γ/(βΔt) D + 1/(βΔt²) M` is factored once.
pub fn newmark_integrate(
    red: &ReducedSystem<'_>,
    params: NewmarkParams,
    w0: &[f64],
    w0_dot: &[f64],
) -> Result<TimeHistory, DynamicsError> {
    params.validate()?;
    let n = red.dim();
    for (what, v) in [("initial displacement", w0), ("initial velocity", w0_dot)] {
        if v.len() != n {
            return Err(DynamicsError::DimensionMismatch {
                what,
                expected: n,
                found: v.len(),
            });
        }
    }
    let mass = red.mass().ok_or(DynamicsError::MissingMass)?;
    let damping = red.damping();
    let stiffness = red.stiffness();
    let NewmarkParams {
        beta,
        gamma,
        dt,
        steps,
    } = params;

    // M a0 = f0 − D v0 − K w0
    let f0 = red.forcing(0.0)?;
    let a0 = if n == 0 {
        Vec::new()
    } else {
        let dv = mv(damping, w0_dot)?;
        let kw = stiffness.matvec(w0)?;
        let rhs: Vec<f64> = (0..n).map(|i| f0[i] - dv[i] - kw[i]).collect();
        Factorization::new(mass)
            .map_err(DynamicsError::SingularMass)?
            .solve(&rhs)?
    };

    let c_m = 1.0 / (beta * dt * dt);
    let c_d = gamma / (beta * dt);
    let mut k_eff = SparseMatrix::linear_combination(1.0, stiffness, c_m, mass)?;
    if let Some(d) = damping {
        k_eff = SparseMatrix::linear_combination(1.0, &k_eff, c_d, d)?;
    }
    let factor = if n == 0 {
        None
    } else {
        Some(Factorization::new(&k_eff).map_err(DynamicsError::SingularEffective)?)
    };

    let mut history = TimeHistory {
        times: Vec::with_capacity(steps + 1),
        w: Vec::with_capacity(steps + 1),
        w_dot: Vec::with_capacity(steps + 1),
        w_ddot: Vec::with_capacity(steps + 1),
    };
    history.times.push(0.0);
    history.w.push(w0.to_vec());
    history.w_dot.push(w0_dot.to_vec());
    history.w_ddot.push(a0);

    let half_beta = 1.0 / (2.0 * beta) - 1.0;
    for step in 1..=steps {
        let t = step as f64 * dt;
        let (u, v, a) = (
            &history.w[step - 1],
            &history.w_dot[step - 1],
            &history.w_ddot[step - 1],
        );
        let u_new = match &factor {
            None => Vec::new(),
            Some(factor) => {
                let mut rhs = red.forcing(t)?;
                let m_part: Vec<f64> = (0..n)
                    .map(|i| c_m * u[i] + v[i] / (beta * dt) + half_beta * a[i])
                    .collect();
                for (r, y) in rhs.iter_mut().zip(mass.matvec(&m_part)?) {
                    *r += y;
                }
                if let Some(d) = damping {
                    let d_part: Vec<f64> = (0..n)
                        .map(|i| {
                            c_d * u[i]
                                + (gamma / beta - 1.0) * v[i]
                                + dt * (gamma / (2.0 * beta) - 1.0) * a[i]
                        })
                        .collect();
                    for (r, y) in rhs.iter_mut().zip(d.matvec(&d_part)?) {
                        *r += y;
                    }
                }
                factor.solve(&rhs)?
            }
        };
        let a_new: Vec<f64> = (0..n)
            .map(|i| c_m * (u_new[i] - u[i] - dt * v[i]) - half_beta * a[i])
            .collect();
        let v_new: Vec<f64> = (0..n)
            .map(|i| v[i] + dt * ((1.0 - gamma) * a[i] + gamma * a_new[i]))
            .collect();
        history.times.push(t);
        history.w.push(u_new);
        history.w_dot.push(v_new);
        history.w_ddot.push(a_new);
    }
    Ok(history)
}

/// Least-squares reduced coordinates for a full-space vector:
/// solves `CᵀC w = Cᵀ (v − shift)`.
pub fn to_reduced(basis: &NullBasis, v: &[f64], shift: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    let n = basis.n_dofs();
    for (what, x) in [("full-space vector", v), ("shift", shift)] {
        if x.len() != n {
            return Err(DynamicsError::DimensionMismatch {
                what,
                expected: n,
                found: x.len(),
            });
        }
    }
    if basis.n_reduced() == 0 {
        return Ok(Vec::new());
    }
    let c = basis.c();
    let diff: Vec<f64> = v.iter().zip(shift).map(|(a, b)| a - b).collect();
    let rhs = c.transpose_matvec(&diff)?;
    let ctc = c.transpose().matmul(c)?;
    Ok(Cholesky::factor(&ctc)?.solve(&rhs)?)
}

/// `½ ẇᵀ M ẇ + ½ wᵀ K w` in reduced coordinates.
pub fn reduced_energy(
    red: &ReducedSystem<'_>,
    w: &[f64],
    w_dot: &[f64],
) -> Result<f64, DynamicsError> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let kinetic = match red.mass() {
        Some(m) => 0.5 * dot(w_dot, &m.matvec(w_dot)?),
        None => 0.0,
    };
    Ok(kinetic + 0.5 * dot(w, &red.stiffness().matvec(w)?))
}
