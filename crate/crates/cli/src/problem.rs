//! Problem files: a strict TOML schema with one `[mesh]`, one `[analysis]`,
//! and any number of `[[constraints]]` and `[[loads]]` records.
//!
//! ```toml
//! [mesh]
//! type = "bar"          # or "grid2d"
//! n_nodes = 3
//! length = 2.0
//! area = 1.0
//! youngs = 1.0
//! density = 1.0
//!
//! [[constraints]]
//! type = "dirichlet"    # dirichlet | tie | linear
//! dof = 0
//! value = 0.0
//! label = "left"
//! profile = { type = "ramp", duration = 1.0 }
//!
//! [[loads]]
//! dof = 2
//! value = 1.0
//!
//! [analysis]
//! type = "static"       # or "dynamic" with dt, steps, beta, gamma, ...
//! ```

use std::path::Path;

use nullfem::constraints::{Constraint, ConstraintError, ConstraintSet};
use nullfem::dynamics::NewmarkParams;
use nullfem::femlab::{Mesh1D, MeshGrid2D};
use nullfem::profile::Profile;
use nullfem::reduction::TimedLoad;
use serde::Deserialize;
use toml::Spanned;

use crate::error::CliError;

pub const DEFAULT_BETA: f64 = 0.25;
pub const DEFAULT_GAMMA: f64 = 0.5;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    mesh: Spanned<RawMesh>,
    #[serde(default)]
    constraints: Vec<Spanned<RawConstraint>>,
    #[serde(default)]
    loads: Vec<Spanned<RawLoad>>,
    analysis: Spanned<RawAnalysis>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    #[serde(rename = "type")]
    kind: String,
    n_nodes: Option<usize>,
    length: Option<f64>,
    area: Option<f64>,
    youngs: Option<f64>,
    density: Option<f64>,
    nx: Option<usize>,
    ny: Option<usize>,
    lx: Option<f64>,
    ly: Option<f64>,
    conductivity: Option<f64>,
    source: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    #[serde(rename = "type")]
    kind: String,
    duration: Option<f64>,
    frequency: Option<f64>,
    phase: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    #[serde(rename = "type")]
    kind: String,
    label: Option<String>,
    dof: Option<usize>,
    value: Option<f64>,
    dofs: Option<Vec<usize>>,
    coefficients: Option<Vec<f64>>,
    rhs: Option<f64>,
    profile: Option<RawProfile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoad {
    dof: usize,
    value: f64,
    profile: Option<RawProfile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    #[serde(rename = "type")]
    kind: String,
    dt: Option<f64>,
    steps: Option<usize>,
    beta: Option<f64>,
    gamma: Option<f64>,
    rayleigh_mass: Option<f64>,
    rayleigh_stiffness: Option<f64>,
    initial_displacement: Option<Vec<f64>>,
    initial_velocity: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Bar(Mesh1D),
    /// Grid with a uniform source term.
    Grid2D {
        mesh: MeshGrid2D,
        source: f64,
    },
}

impl MeshSpec {
    pub fn n_dofs(&self) -> usize {
        match self {
            MeshSpec::Bar(m) => m.n_nodes,
            MeshSpec::Grid2D { mesh, .. } => mesh.n_nodes(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisKind {
    Static,
    Dynamic,
}

impl AnalysisKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnalysisKind::Static => "static",
            AnalysisKind::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    pub kind: AnalysisKind,
    pub beta: f64,
    pub gamma: f64,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub rayleigh_mass: f64,
    pub rayleigh_stiffness: f64,
    pub initial_displacement: Option<Vec<f64>>,
    pub initial_velocity: Option<Vec<f64>>,
}

impl AnalysisSpec {
    pub fn newmark(&self) -> Option<NewmarkParams> {
        Some(NewmarkParams {
            beta: self.beta,
            gamma: self.gamma,
            dt: self.dt?,
            steps: self.steps?,
        })
    }
}

/// A validated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub mesh: MeshSpec,
    pub constraints: ConstraintSet,
    pub loads: Vec<TimedLoad>,
    pub analysis: AnalysisSpec,
}

struct Ctx<'a> {
    src: &'a str,
}

impl Ctx<'_> {
    fn line(&self, offset: usize) -> usize {
        self.src[..offset.min(self.src.len())]
            .bytes()
            .filter(|&b| b == b'\n')
            .count()
            + 1
    }

    fn err<T>(
        &self,
        at: &Spanned<T>,
        field: impl Into<String>,
        msg: impl Into<String>,
    ) -> CliError {
        CliError::Field {
            line: self.line(at.span().start),
            field: field.into(),
            message: msg.into(),
        }
    }
}

pub fn parse_problem(path: &Path) -> Result<ProblemFile, CliError> {
    let src = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problem_str(&src)
}

pub fn parse_problem_str(src: &str) -> Result<ProblemFile, CliError> {
    let raw: RawProblem = toml::from_str(src).map_err(|e| CliError::Parse(e.to_string()))?;
    let ctx = Ctx { src };
    let mesh = parse_mesh(&ctx, &raw.mesh)?;
    let n = mesh.n_dofs();
    let analysis = parse_analysis(&ctx, &raw.analysis, n, &mesh)?;

    let mut constraints = ConstraintSet::new(n);
    for (i, rc) in raw.constraints.iter().enumerate() {
        let c = parse_constraint(&ctx, rc, i)?;
        if analysis.kind == AnalysisKind::Static && !c.profile().is_constant() {
            return Err(ctx.err(
                rc,
                format!("constraints[{i}].profile"),
                "time profiles require a dynamic analysis",
            ));
        }
        constraints.push(c).map_err(|e| {
            let field = match e {
                ConstraintError::DofOutOfRange { .. } => format!("constraints[{i}].dof"),
                _ => format!("constraints[{i}]"),
            };
            ctx.err(rc, field, e.to_string())
        })?;
    }

    let mut loads = Vec::with_capacity(raw.loads.len());
    for (i, rl) in raw.loads.iter().enumerate() {
        let l = rl.get_ref();
        if l.dof >= n {
            return Err(ctx.err(
                rl,
                format!("loads[{i}].dof"),
                format!("dof {} beyond mesh size {n}", l.dof),
            ));
        }
        if !l.value.is_finite() {
            return Err(ctx.err(rl, format!("loads[{i}].value"), "must be finite"));
        }
        let profile = match &l.profile {
            Some(p) => parse_profile(&ctx, rl, p, &format!("loads[{i}].profile"))?,
            None => Profile::Constant,
        };
        if analysis.kind == AnalysisKind::Static && !profile.is_constant() {
            return Err(ctx.err(
                rl,
                format!("loads[{i}].profile"),
                "time profiles require a dynamic analysis",
            ));
        }
        loads.push(TimedLoad {
            dof: l.dof,
            value: l.value,
            profile,
        });
    }

    Ok(ProblemFile {
        mesh,
        constraints,
        loads,
        analysis,
    })
}

fn require<T: Copy, S>(
    ctx: &Ctx,
    at: &Spanned<S>,
    v: Option<T>,
    field: &str,
    context: &str,
) -> Result<T, CliError> {
    v.ok_or_else(|| ctx.err(at, field, format!("{field} required for {context}")))
}

fn reject<T, S>(
    ctx: &Ctx,
    at: &Spanned<S>,
    v: &Option<T>,
    field: &str,
    context: &str,
) -> Result<(), CliError> {
    match v {
        Some(_) => Err(ctx.err(at, field, format!("{field} is not valid for {context}"))),
        None => Ok(()),
    }
}

fn parse_mesh(ctx: &Ctx, at: &Spanned<RawMesh>) -> Result<MeshSpec, CliError> {
    let m = at.get_ref();
    let spec = match m.kind.as_str() {
        "bar" => {
            for (v, f) in [(&m.nx, "mesh.nx"), (&m.ny, "mesh.ny")] {
                reject(ctx, at, v, f, "a bar mesh")?;
            }
            for (v, f) in [
                (&m.lx, "mesh.lx"),
                (&m.ly, "mesh.ly"),
                (&m.conductivity, "mesh.conductivity"),
                (&m.source, "mesh.source"),
            ] {
                reject(ctx, at, v, f, "a bar mesh")?;
            }
            let mesh = Mesh1D {
                n_nodes: require(ctx, at, m.n_nodes, "mesh.n_nodes", "bar")?,
                length: require(ctx, at, m.length, "mesh.length", "bar")?,
                area: require(ctx, at, m.area, "mesh.area", "bar")?,
                youngs: require(ctx, at, m.youngs, "mesh.youngs", "bar")?,
                density: m.density.unwrap_or(1.0),
            };
            mesh.validate()
                .map_err(|e| ctx.err(at, "mesh", e.to_string()))?;
            MeshSpec::Bar(mesh)
        }
        "grid2d" => {
            reject(ctx, at, &m.n_nodes, "mesh.n_nodes", "a grid2d mesh")?;
            for (v, f) in [
                (&m.length, "mesh.length"),
                (&m.area, "mesh.area"),
                (&m.youngs, "mesh.youngs"),
                (&m.density, "mesh.density"),
            ] {
                reject(ctx, at, v, f, "a grid2d mesh")?;
            }
            let mesh = MeshGrid2D {
                nx: require(ctx, at, m.nx, "mesh.nx", "grid2d")?,
                ny: require(ctx, at, m.ny, "mesh.ny", "grid2d")?,
                lx: m.lx.unwrap_or(1.0),
                ly: m.ly.unwrap_or(1.0),
                conductivity: m.conductivity.unwrap_or(1.0),
            };
            mesh.validate()
                .map_err(|e| ctx.err(at, "mesh", e.to_string()))?;
            let source = m.source.unwrap_or(0.0);
            if !source.is_finite() {
                return Err(ctx.err(at, "mesh.source", "must be finite"));
            }
            MeshSpec::Grid2D { mesh, source }
        }
        other => {
            return Err(ctx.err(
                at,
                "mesh.type",
                format!("unknown mesh type '{other}' (expected bar or grid2d)"),
            ))
        }
    };
    Ok(spec)
}

fn parse_profile<S>(
    ctx: &Ctx,
    at: &Spanned<S>,
    p: &RawProfile,
    field: &str,
) -> Result<Profile, CliError> {
    let profile = match p.kind.as_str() {
        "constant" => {
            reject(
                ctx,
                at,
                &p.duration,
                &format!("{field}.duration"),
                "a constant profile",
            )?;
            reject(
                ctx,
                at,
                &p.frequency,
                &format!("{field}.frequency"),
                "a constant profile",
            )?;
            reject(
                ctx,
                at,
                &p.phase,
                &format!("{field}.phase"),
                "a constant profile",
            )?;
            Profile::Constant
        }
        "ramp" => {
            reject(
                ctx,
                at,
                &p.frequency,
                &format!("{field}.frequency"),
                "a ramp profile",
            )?;
            reject(
                ctx,
                at,
                &p.phase,
                &format!("{field}.phase"),
                "a ramp profile",
            )?;
            Profile::Ramp {
                duration: require(ctx, at, p.duration, &format!("{field}.duration"), "ramp")?,
            }
        }
        "sinusoid" => {
            reject(
                ctx,
                at,
                &p.duration,
                &format!("{field}.duration"),
                "a sinusoid profile",
            )?;
            Profile::Sinusoid {
                frequency: require(
                    ctx,
                    at,
                    p.frequency,
                    &format!("{field}.frequency"),
                    "sinusoid",
                )?,
                phase: p.phase.unwrap_or(0.0),
            }
        }
        other => {
            return Err(ctx.err(
                at,
                format!("{field}.type"),
                format!("unknown profile '{other}' (expected constant, ramp or sinusoid)"),
            ))
        }
    };
    profile
        .validate()
        .map_err(|m| ctx.err(at, field.to_string(), m))?;
    Ok(profile)
}

fn parse_constraint(
    ctx: &Ctx,
    at: &Spanned<RawConstraint>,
    i: usize,
) -> Result<Constraint, CliError> {
    let c = at.get_ref();
    let f = |name: &str| format!("constraints[{i}].{name}");
    if let Some(label) = &c.label {
        if label.is_empty() || label.contains(['\n', '\r', '\t']) {
            return Err(ctx.err(
                at,
                f("label"),
                "labels must be non-empty single-line text without tabs",
            ));
        }
    }
    let kind = c.kind.as_str();
    let context = format!("a {kind} constraint");
    let built = match kind {
        "dirichlet" => {
            reject(ctx, at, &c.rhs, &f("rhs"), &context)?;
            reject(ctx, at, &c.dofs, &f("dofs"), &context)?;
            reject(ctx, at, &c.coefficients, &f("coefficients"), &context)?;
            let dof = require(ctx, at, c.dof, &f("dof"), "dirichlet")?;
            let value = c.value.unwrap_or(0.0);
            Ok(Constraint::dirichlet(dof, value))
        }
        "tie" => {
            reject(ctx, at, &c.dof, &f("dof"), &context)?;
            reject(ctx, at, &c.value, &f("value"), &context)?;
            reject(ctx, at, &c.rhs, &f("rhs"), &context)?;
            reject(ctx, at, &c.coefficients, &f("coefficients"), &context)?;
            let dofs = c
                .dofs
                .as_ref()
                .ok_or_else(|| ctx.err(at, f("dofs"), "dofs required for tie"))?;
            if dofs.len() != 2 {
                return Err(ctx.err(at, f("dofs"), "a tie needs exactly two dofs"));
            }
            Constraint::tie(dofs[0], dofs[1])
        }
        "linear" => {
            reject(ctx, at, &c.dof, &f("dof"), &context)?;
            reject(ctx, at, &c.value, &f("value"), &context)?;
            let dofs = c
                .dofs
                .as_ref()
                .ok_or_else(|| ctx.err(at, f("dofs"), "dofs required for linear"))?;
            let coefficients = c.coefficients.as_ref().ok_or_else(|| {
                ctx.err(at, f("coefficients"), "coefficients required for linear")
            })?;
            if dofs.len() != coefficients.len() {
                return Err(ctx.err(
                    at,
                    f("coefficients"),
                    format!(
                        "{} coefficients for {} dofs",
                        coefficients.len(),
                        dofs.len()
                    ),
                ));
            }
            let terms: Vec<_> = dofs
                .iter()
                .copied()
                .zip(coefficients.iter().copied())
                .collect();
            Constraint::linear(&terms, c.rhs.unwrap_or(0.0))
        }
        other => {
            return Err(ctx.err(
                at,
                f("type"),
                format!("unknown constraint type '{other}' (expected dirichlet, tie or linear)"),
            ))
        }
    };
    let mut constraint =
        built.map_err(|e| ctx.err(at, format!("constraints[{i}]"), e.to_string()))?;
    if let Some(label) = &c.label {
        constraint = constraint.with_label(label.clone());
    }
    if let Some(p) = &c.profile {
        constraint = constraint.with_profile(parse_profile(ctx, at, p, &f("profile"))?);
    }
    Ok(constraint)
}

fn parse_analysis(
    ctx: &Ctx,
    at: &Spanned<RawAnalysis>,
    n: usize,
    mesh: &MeshSpec,
) -> Result<AnalysisSpec, CliError> {
    let a = at.get_ref();
    let kind = match a.kind.as_str() {
        "static" => AnalysisKind::Static,
        "dynamic" => AnalysisKind::Dynamic,
        other => {
            return Err(ctx.err(
                at,
                "analysis.type",
                format!("unknown analysis '{other}' (expected static or dynamic)"),
            ))
        }
    };
    let spec = AnalysisSpec {
        kind,
        beta: a.beta.unwrap_or(DEFAULT_BETA),
        gamma: a.gamma.unwrap_or(DEFAULT_GAMMA),
        dt: a.dt,
        steps: a.steps,
        rayleigh_mass: a.rayleigh_mass.unwrap_or(0.0),
        rayleigh_stiffness: a.rayleigh_stiffness.unwrap_or(0.0),
        initial_displacement: a.initial_displacement.clone(),
        initial_velocity: a.initial_velocity.clone(),
    };
    match kind {
        AnalysisKind::Static => {
            for (v, field) in [
                (&a.dt, "analysis.dt"),
                (&a.beta, "analysis.beta"),
                (&a.gamma, "analysis.gamma"),
                (&a.rayleigh_mass, "analysis.rayleigh_mass"),
                (&a.rayleigh_stiffness, "analysis.rayleigh_stiffness"),
            ] {
                reject(ctx, at, v, field, "a static analysis")?;
            }
            reject(ctx, at, &a.steps, "analysis.steps", "a static analysis")?;
            reject(
                ctx,
                at,
                &a.initial_displacement,
                "analysis.initial_displacement",
                "a static analysis",
            )?;
            reject(
                ctx,
                at,
                &a.initial_velocity,
                "analysis.initial_velocity",
                "a static analysis",
            )?;
        }
        AnalysisKind::Dynamic => {
            if matches!(mesh, MeshSpec::Grid2D { .. }) {
                return Err(ctx.err(
                    at,
                    "analysis.type",
                    "dynamic analysis needs a mass matrix; grid2d meshes have none",
                ));
            }
            let dt = require(ctx, at, a.dt, "analysis.dt", "dynamic")?;
            let steps = require(ctx, at, a.steps, "analysis.steps", "dynamic")?;
            let params = NewmarkParams {
                beta: spec.beta,
                gamma: spec.gamma,
                dt,
                steps,
            };
            params
                .validate()
                .map_err(|e| ctx.err(at, "analysis", e.to_string()))?;
            for (v, field) in [
                (spec.rayleigh_mass, "analysis.rayleigh_mass"),
                (spec.rayleigh_stiffness, "analysis.rayleigh_stiffness"),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(ctx.err(at, field, "must be a finite non-negative number"));
                }
            }
            for (v, field) in [
                (&spec.initial_displacement, "analysis.initial_displacement"),
                (&spec.initial_velocity, "analysis.initial_velocity"),
            ] {
                if let Some(v) = v {
                    if v.len() != n {
                        return Err(ctx.err(
                            at,
                            field,
                            format!("has {} entries, mesh has {n} dofs", v.len()),
                        ));
                    }
                }
            }
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[mesh]
type = "bar"
n_nodes = 3
length = 2.0
area = 1.0
youngs = 1.0

[[constraints]]
type = "dirichlet"
dof = 0

[[loads]]
dof = 2
value = 1.0

[analysis]
type = "static"
"#;

    #[test]
    fn minimal_static_bar_has_defaults() {
        let p = parse_problem_str(MINIMAL).unwrap();
        assert_eq!(p.mesh.n_dofs(), 3);
        assert_eq!(p.analysis.kind, AnalysisKind::Static);
        assert_eq!(p.analysis.beta, 0.25);
        assert_eq!(p.analysis.gamma, 0.5);
        assert_eq!(p.analysis.rayleigh_mass, 0.0);
        let cs = p.constraints.assemble();
        assert_eq!(cs.v_db(), &[0.0]);
        assert!(cs.is_time_invariant());
        assert_eq!(cs.velocities_at(0.0), vec![0.0]);
        assert_eq!(p.loads.len(), 1);
    }

    #[test]
    fn dof_beyond_mesh_names_the_record() {
        let src = MINIMAL.replace("dof = 0", "dof = 7\nlabel = \"far\"");
        let err = parse_problem_str(&src).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("constraints[0].dof"), "{msg}");
        assert!(msg.contains("far"), "{msg}");
        assert!(msg.starts_with("line 9:"), "{msg}");
        assert_eq!(err.exit_code(), crate::error::exit::PARSE);
    }

    #[test]
    fn dynamic_requires_dt() {
        let src = MINIMAL.replace("type = \"static\"", "type = \"dynamic\"\nsteps = 10");
        let err = parse_problem_str(&src).unwrap_err();
        assert!(
            err.to_string().contains("analysis.dt required for dynamic"),
            "{err}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let src = MINIMAL.replace("youngs = 1.0", "youngs = 1.0\nyoung = 2.0");
        let err = parse_problem_str(&src).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("young"), "{msg}");
        assert!(msg.contains("line 8"), "{msg}");
    }

    #[test]
    fn field_not_valid_for_type() {
        let src = MINIMAL.replace("dof = 0", "dof = 0\nrhs = 1.0");
        let msg = parse_problem_str(&src).unwrap_err().to_string();
        assert!(
            msg.contains("constraints[0].rhs is not valid for a dirichlet constraint"),
            "{msg}"
        );
    }

    #[test]
    fn all_record_kinds_and_profiles() {
        let src = r#"
[mesh]
type = "bar"
n_nodes = 4
length = 1.0
area = 1.0
youngs = 1.0
density = 2.0

[[constraints]]
type = "dirichlet"
dof = 0
value = 0.5
profile = { type = "sinusoid", frequency = 2.0 }

[[constraints]]
type = "tie"
dofs = [2, 1]

[[constraints]]
type = "linear"
dofs = [1, 3]
coefficients = [0.5, 0.5]
rhs = 1.0
label = "mid"

[[loads]]
dof = 3
value = 2.0
profile = { type = "ramp", duration = 0.5 }

[analysis]
type = "dynamic"
dt = 0.01
steps = 5
rayleigh_mass = 0.1
"#;
        let p = parse_problem_str(src).unwrap();
        let cs = p.constraints.assemble();
        assert_eq!(cs.labels(), &["dirichlet(0)", "tie(2,1)", "mid"]);
        assert_eq!(
            cs.profiles()[0],
            Profile::Sinusoid {
                frequency: 2.0,
                phase: 0.0
            }
        );
        assert_eq!(cs.b().to_dense()[1], vec![0.0, -1.0, 1.0, 0.0]);
        assert_eq!(p.loads[0].profile, Profile::Ramp { duration: 0.5 });
        let nm = p.analysis.newmark().unwrap();
        assert_eq!((nm.beta, nm.gamma, nm.dt, nm.steps), (0.25, 0.5, 0.01, 5));
    }

    #[test]
    fn static_rejects_time_profiles() {
        let src = MINIMAL.replace(
            "dof = 0",
            "dof = 0\nprofile = { type = \"ramp\", duration = 1.0 }",
        );
        let msg = parse_problem_str(&src).unwrap_err().to_string();
        assert!(msg.contains("require a dynamic analysis"), "{msg}");
    }

    #[test]
    fn duplicate_dirichlet_is_a_parse_error() {
        let src = MINIMAL.replace(
            "[[loads]]",
            "[[constraints]]\ntype = \"dirichlet\"\ndof = 0\nvalue = 1.0\n\n[[loads]]",
        );
        let msg = parse_problem_str(&src).unwrap_err().to_string();
        assert!(msg.contains("already prescribed"), "{msg}");
    }

    #[test]
    fn missing_sections() {
        let src = MINIMAL.replace("[analysis]\ntype = \"static\"", "");
        assert!(parse_problem_str(&src).is_err());
    }
}
