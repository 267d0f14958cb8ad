//! Small finite-element assemblers: a 1D bar with linear elements and a 2D
//! scalar Laplacian on a structured grid of bilinear quadrilaterals.

use crate::linalg::SparseMatrix;
use crate::reduction::{AssembledSystem, ReductionError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MeshError {
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("dof {dof} out of range for {n} dofs")]
    DofOutOfRange { dof: usize, n: usize },
}

fn positive(name: &str, v: f64) -> Result<(), MeshError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(MeshError::Invalid(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// Uniform bar along x with one axial dof per node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    pub n_nodes: usize,
    pub length: f64,
    pub area: f64,
    pub youngs: f64,
    pub density: f64,
}

impl Mesh1D {
    pub fn new(
        n_nodes: usize,
        length: f64,
        area: f64,
        youngs: f64,
        density: f64,
    ) -> Result<Self, MeshError> {
        let m = Self {
            n_nodes,
            length,
            area,
            youngs,
            density,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.n_nodes < 2 {
            return Err(MeshError::Invalid("a bar needs at least 2 nodes".into()));
        }
        positive("length", self.length)?;
        positive("area", self.area)?;
        positive("youngs", self.youngs)?;
        positive("density", self.density)
    }

    pub fn element_length(&self) -> f64 {
        self.length / (self.n_nodes - 1) as f64
    }

    pub fn node_x(&self, i: usize) -> f64 {
        i as f64 * self.element_length()
    }
}

/// Structured `nx × ny` grid on `[0, lx] × [0, ly]`; node `(i, j)` has
/// index `j (nx + 1) + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshGrid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub conductivity: f64,
}

impl MeshGrid2D {
    pub fn new(
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        conductivity: f64,
    ) -> Result<Self, MeshError> {
        let m = Self {
            nx,
            ny,
            lx,
            ly,
            conductivity,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.nx < 1 || self.ny < 1 {
            return Err(MeshError::Invalid(
                "grid needs at least one element per direction".into(),
            ));
        }
        positive("lx", self.lx)?;
        positive("ly", self.ly)?;
        positive("conductivity", self.conductivity)
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_xy(&self, node: usize) -> (f64, f64) {
        let (i, j) = (node % (self.nx + 1), node / (self.nx + 1));
        (
            i as f64 * self.lx / self.nx as f64,
            j as f64 * self.ly / self.ny as f64,
        )
    }

    /// Nodes on the outer boundary, ascending.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| {
                let (i, j) = (n % (self.nx + 1), n / (self.nx + 1));
                i == 0 || j == 0 || i == self.nx || j == self.ny
            })
            .collect()
    }

    // Counter-clockwise corner nodes of element (ex, ey).
    fn element_nodes(&self, ex: usize, ey: usize) -> [usize; 4] {
        [
            self.node(ex, ey),
            self.node(ex + 1, ey),
            self.node(ex + 1, ey + 1),
            self.node(ex, ey + 1),
        ]
    }
}

const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Element Laplacian of an `hx × hy` rectangle, 2×2 Gauss quadrature.
pub fn quad_element_stiffness(hx: f64, hy: f64, conductivity: f64) -> [[f64; 4]; 4] {
    let mut ke = [[0.0; 4]; 4];
    let det = hx * hy / 4.0;
    for &xi in &GAUSS {
        for &eta in &GAUSS {
            let grads: Vec<(f64, f64)> = CORNERS
                .iter()
                .map(|&(a, b)| {
                    (
                        0.25 * a * (1.0 + b * eta) * 2.0 / hx,
                        0.25 * b * (1.0 + a * xi) * 2.0 / hy,
                    )
                })
                .collect();
            for p in 0..4 {
                for q in 0..4 {
                    ke[p][q] +=
                        conductivity * (grads[p].0 * grads[q].0 + grads[p].1 * grads[q].1) * det;
                }
            }
        }
    }
    ke
}

/// Bar stiffness and consistent mass; the load starts at zero.
pub fn assemble_bar(mesh: &Mesh1D) -> Result<AssembledSystem, ReductionError> {
    let n = mesh.n_nodes;
    let h = mesh.element_length();
    let k = mesh.youngs * mesh.area / h;
    let m = mesh.density * mesh.area * h / 6.0;
    let mut kt = Vec::with_capacity(4 * (n - 1));
    let mut mt = Vec::with_capacity(4 * (n - 1));
    for e in 0..n - 1 {
        let dofs = [e, e + 1];
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                let same = a == b;
                kt.push((i, j, if same { k } else { -k }));
                mt.push((i, j, if same { 2.0 * m } else { m }));
            }
        }
    }
    let stiffness = SparseMatrix::from_triplets(n, n, &kt)?;
    let mass = SparseMatrix::from_triplets(n, n, &mt)?;
    AssembledSystem::new(stiffness)?.with_mass(mass)
}

/// Grid Laplacian `K`; no mass, zero load.
pub fn assemble_poisson(mesh: &MeshGrid2D) -> Result<AssembledSystem, ReductionError> {
    let hx = mesh.lx / mesh.nx as f64;
    let hy = mesh.ly / mesh.ny as f64;
    let ke = quad_element_stiffness(hx, hy, mesh.conductivity);
    let mut t = Vec::with_capacity(16 * mesh.nx * mesh.ny);
    for ey in 0..mesh.ny {
        for ex in 0..mesh.nx {
            let nodes = mesh.element_nodes(ex, ey);
            for p in 0..4 {
                for q in 0..4 {
                    t.push((nodes[p], nodes[q], ke[p][q]));
                }
            }
        }
    }
    let n = mesh.n_nodes();
    AssembledSystem::new(SparseMatrix::from_triplets(n, n, &t)?)
}

/// Consistent load vector `∫ f N_i` of a source term, 2×2 Gauss.
pub fn poisson_source_load(mesh: &MeshGrid2D, source: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let hx = mesh.lx / mesh.nx as f64;
    let hy = mesh.ly / mesh.ny as f64;
    let det = hx * hy / 4.0;
    let mut f = vec![0.0; mesh.n_nodes()];
    for ey in 0..mesh.ny {
        for ex in 0..mesh.nx {
            let nodes = mesh.element_nodes(ex, ey);
            let (x0, y0) = mesh.node_xy(nodes[0]);
            for &xi in &GAUSS {
                for &eta in &GAUSS {
                    let x = x0 + (xi + 1.0) * hx / 2.0;
                    let y = y0 + (eta + 1.0) * hy / 2.0;
                    let s = source(x, y) * det;
                    for (p, &(a, b)) in CORNERS.iter().enumerate() {
                        f[nodes[p]] += 0.25 * (1.0 + a * xi) * (1.0 + b * eta) * s;
                    }
                }
            }
        }
    }
    f
}

/// Adds `value` to the constant load at `dof`.
pub fn point_load(
    mut system: AssembledSystem,
    dof: usize,
    value: f64,
) -> Result<AssembledSystem, MeshError> {
    let n = system.n();
    if dof >= n {
        return Err(MeshError::DofOutOfRange { dof, n });
    }
    system.load_mut().constant_mut()[dof] += value;
    Ok(system)
}
