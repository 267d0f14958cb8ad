//! Assembly and solution of a parsed problem.

use std::time::Instant;

use nullfem::constraints::ConstraintSystem;
use nullfem::dynamics::{newmark_integrate, static_solve, to_reduced, DynamicsError};
use nullfem::femlab::{assemble_bar, assemble_poisson, poisson_source_load};
use nullfem::linalg::SparseMatrix;
use nullfem::nullspace::{build_null_basis, verify_basis, BasisReport, DroppedRow, NullspaceError};
use nullfem::oracle::{dense_elimination_solve, penalty_solve, OracleError};
use nullfem::reduction::{
    dynamic_reactions, project, static_reactions, AssembledSystem, FieldState, LoadVector,
    ReactionMode, ReductionError,
};

use crate::error::CliError;
use crate::problem::{AnalysisKind, MeshSpec, ProblemFile};

/// Penalty parameter relative to the largest diagonal entry of `K`.
pub const DEFAULT_ALPHA_SCALE: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Nullspace,
    Elimination,
    Penalty,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Nullspace => "nullspace",
            Method::Elimination => "elimination",
            Method::Penalty => "penalty",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nullspace" => Some(Method::Nullspace),
            "elimination" => Some(Method::Elimination),
            "penalty" => Some(Method::Penalty),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub method: Method,
    /// Penalty parameter; defaults to `1e8 · max diag(K)`.
    pub alpha: Option<f64>,
}

/// Field and reactions at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub time: f64,
    pub values: Vec<f64>,
    pub velocity: Option<Vec<f64>>,
    pub acceleration: Option<Vec<f64>>,
    /// One entry per declared constraint.
    pub reactions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub rank: Option<usize>,
    pub n_reduced: Option<usize>,
    pub dropped_rows: Vec<DroppedRow>,
    pub basis: Option<BasisReport>,
    pub penalty_alpha: Option<f64>,
    /// `max_t max |B v(t) − v_DB(t)|`.
    pub max_constraint_residual: f64,
    /// Every step within `1e-10 (1 + max|v_DB(t)|)`.
    pub constraints_satisfied: bool,
    /// Wall-clock seconds per stage. Reported on stderr, never written to
    /// result files.
    pub timings: Vec<(String, f64)>,
}

impl Diagnostics {
    /// Failed invariant checks, empty when everything holds.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(b) = &self.basis {
            if !b.passed() {
                out.push(format!(
                    "null basis check failed (max|BC| = {:e}, max|B v_p - v_DB| = {:e}, \
                     full column rank = {}, rank + columns = {} of {})",
                    b.max_bc,
                    b.max_particular_residual,
                    b.full_column_rank,
                    b.rank + b.n_columns,
                    b.n_dofs
                ));
            }
        }
        if !self.constraints_satisfied {
            out.push(format!(
                "constraint residual {:e} exceeds tolerance",
                self.max_constraint_residual
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub method: Method,
    pub analysis: AnalysisKind,
    pub n_dofs: usize,
    pub labels: Vec<String>,
    pub steps: Vec<StepResult>,
    pub diagnostics: Diagnostics,
}

/// Matrices written by `--dump-matrices`.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub b: SparseMatrix,
    pub v_db: Vec<f64>,
    /// `(C, K_red, v_p)` for the null-space method.
    pub basis: Option<(SparseMatrix, SparseMatrix, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub results: ResultSet,
    pub artifacts: Artifacts,
}

/// Builds `K`, `M`, `D` and the load vector for a problem.
pub fn assemble(problem: &ProblemFile) -> Result<AssembledSystem, CliError> {
    let assembly = |e: ReductionError| CliError::numerical("assembly", e);
    let mut sys = match &problem.mesh {
        MeshSpec::Bar(mesh) => assemble_bar(mesh).map_err(assembly)?,
        MeshSpec::Grid2D { mesh, source } => {
            let sys = assemble_poisson(mesh).map_err(assembly)?;
            let load = poisson_source_load(mesh, |_, _| *source);
            sys.with_load(LoadVector::from_constant(load))
                .map_err(assembly)?
        }
    };
    for load in &problem.loads {
        sys.load_mut().push_timed(*load);
    }
    let a = &problem.analysis;
    if a.kind == AnalysisKind::Dynamic && (a.rayleigh_mass != 0.0 || a.rayleigh_stiffness != 0.0) {
        let mass = sys
            .mass()
            .ok_or_else(|| CliError::numerical("assembly", DynamicsError::MissingMass))?;
        let d = SparseMatrix::linear_combination(
            a.rayleigh_mass,
            mass,
            a.rayleigh_stiffness,
            sys.stiffness(),
        )
        .map_err(|e| CliError::numerical("assembly", e))?;
        sys = sys.with_damping(d).map_err(assembly)?;
    }
    Ok(sys)
}

fn nullspace_error(e: NullspaceError) -> CliError {
    match e {
        NullspaceError::Infeasible { .. } => CliError::Infeasible {
            stage: "null basis",
            message: e.to_string(),
        },
        other => CliError::numerical("null basis", other),
    }
}

fn reduction_error(stage: &'static str, e: ReductionError) -> CliError {
    match e {
        ReductionError::Nullspace(n) => nullspace_error(n),
        other => CliError::numerical(stage, other),
    }
}

fn dynamics_error(stage: &'static str, e: DynamicsError) -> CliError {
    match e {
        DynamicsError::Reduction(r) => reduction_error(stage, r),
        other => CliError::numerical(stage, other),
    }
}

fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::Infeasible { .. } => CliError::Infeasible {
            stage: "oracle",
            message: e.to_string(),
        },
        OracleError::InvalidAlpha(_) => CliError::Usage(e.to_string()),
        other => CliError::numerical("oracle", other),
    }
}

struct Clock {
    start: Instant,
    timings: Vec<(String, f64)>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            timings: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings
            .push((stage.to_string(), (now - self.start).as_secs_f64()));
        self.start = now;
    }
}

fn check_satisfaction(cs: &ConstraintSystem, steps: &[StepResult], diag: &mut Diagnostics) {
    let mut worst = 0.0f64;
    let mut ok = true;
    for s in steps {
        let r = cs.residual_at(&s.values, s.time);
        worst = worst.max(r);
        ok &= r <= cs.satisfaction_tolerance_at(s.time);
    }
    diag.max_constraint_residual = worst;
    diag.constraints_satisfied = ok;
}

/// Runs the full pipeline for one problem.
pub fn run(problem: &ProblemFile, options: RunOptions) -> Result<Solution, CliError> {
    let analysis = problem.analysis.kind;
    if options.method != Method::Nullspace && analysis == AnalysisKind::Dynamic {
        return Err(CliError::Usage(format!(
            "--method {} supports static analysis only",
            options.method.as_str()
        )));
    }
    if options.alpha.is_some() && options.method != Method::Penalty {
        return Err(CliError::Usage(
            "--alpha applies to --method penalty only".into(),
        ));
    }

    let mut clock = Clock::new();
    let sys = assemble(problem)?;
    let cs = problem.constraints.assemble();
    clock.lap("assembly");

    let mut diag = Diagnostics::default();
    let mut artifacts = Artifacts {
        b: cs.b().clone(),
        v_db: cs.v_db().to_vec(),
        basis: None,
    };

    let steps = match options.method {
        Method::Nullspace => {
            let basis = build_null_basis(&cs).map_err(nullspace_error)?;
            let report = verify_basis(&cs, &basis);
            diag.rank = Some(basis.rank());
            diag.n_reduced = Some(basis.n_reduced());
            diag.dropped_rows = basis.dropped_rows().to_vec();
            diag.basis = Some(report);
            clock.lap("null basis");

            let red = project(&sys, &cs, &basis).map_err(|e| reduction_error("projection", e))?;
            clock.lap("projection");
            artifacts.basis = Some((
                basis.c().clone(),
                red.stiffness().clone(),
                basis.v_p().to_vec(),
            ));

            let steps = match analysis {
                AnalysisKind::Static => {
                    let w = static_solve(&red).map_err(|e| dynamics_error("static solve", e))?;
                    let v = red
                        .recover_at(&w, 0.0)
                        .map_err(|e| reduction_error("recovery", e))?;
                    let applied = sys.force_at(0.0);
                    let reactions = static_reactions(&sys, &cs, &v, &applied, ReactionMode::Net)
                        .map_err(|e| reduction_error("reactions", e))?;
                    vec![StepResult {
                        time: 0.0,
                        values: v,
                        velocity: None,
                        acceleration: None,
                        reactions,
                    }]
                }
                AnalysisKind::Dynamic => {
                    let params = problem.analysis.newmark().ok_or_else(|| {
                        CliError::Usage("dynamic analysis needs dt and steps".into())
                    })?;
                    let n = sys.n();
                    let p0 = red
                        .particular_state(0.0)
                        .map_err(|e| reduction_error("initial state", e))?;
                    let zeros = vec![0.0; n];
                    let u0 = problem
                        .analysis
                        .initial_displacement
                        .as_deref()
                        .unwrap_or(&zeros);
                    let v0 = problem
                        .analysis
                        .initial_velocity
                        .as_deref()
                        .unwrap_or(&zeros);
                    let w0 = to_reduced(&basis, u0, &p0.value)
                        .map_err(|e| dynamics_error("initial state", e))?;
                    let w0_dot = to_reduced(&basis, v0, &p0.velocity)
                        .map_err(|e| dynamics_error("initial state", e))?;
                    let history = newmark_integrate(&red, params, &w0, &w0_dot)
                        .map_err(|e| dynamics_error("time integration", e))?;
                    clock.lap("time integration");

                    let mut steps = Vec::with_capacity(history.len());
                    for k in 0..history.len() {
                        let t = history.times[k];
                        let p = red
                            .particular_state(t)
                            .map_err(|e| reduction_error("recovery", e))?;
                        let state = FieldState {
                            value: basis.expand(&history.w[k], &p.value),
                            velocity: basis.expand(&history.w_dot[k], &p.velocity),
                            acceleration: basis.expand(&history.w_ddot[k], &p.acceleration),
                        };
                        let reactions = dynamic_reactions(&sys, &cs, &state, &sys.force_at(t))
                            .map_err(|e| reduction_error("reactions", e))?;
                        steps.push(StepResult {
                            time: t,
                            values: state.value,
                            velocity: Some(state.velocity),
                            acceleration: Some(state.acceleration),
                            reactions,
                        });
                    }
                    steps
                }
            };
            steps
        }
        Method::Elimination | Method::Penalty => {
            let v = if options.method == Method::Elimination {
                dense_elimination_solve(&sys, &cs).map_err(oracle_error)?
            } else {
                let alpha = match options.alpha {
                    Some(a) => a,
                    None => {
                        DEFAULT_ALPHA_SCALE
                            * sys
                                .stiffness()
                                .diagonal()
                                .iter()
                                .fold(0.0f64, |m, d| m.max(d.abs()))
                    }
                };
                diag.penalty_alpha = Some(alpha);
                penalty_solve(&sys, &cs, alpha).map_err(oracle_error)?
            };
            clock.lap("dense solve");
            let applied = sys.force_at(0.0);
            let reactions = static_reactions(&sys, &cs, &v, &applied, ReactionMode::Net)
                .map_err(|e| reduction_error("reactions", e))?;
            vec![StepResult {
                time: 0.0,
                values: v,
                velocity: None,
                acceleration: None,
                reactions,
            }]
        }
    };
    clock.lap("recovery");
    check_satisfaction(&cs, &steps, &mut diag);
    diag.timings = clock.timings;

    Ok(Solution {
        results: ResultSet {
            method: options.method,
            analysis,
            n_dofs: sys.n(),
            labels: cs.labels().to_vec(),
            steps,
            diagnostics: diag,
        },
        artifacts,
    })
}
