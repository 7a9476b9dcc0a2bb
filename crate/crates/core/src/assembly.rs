//! Dof numbering, problem data and assembly of the stabilized forms
//!
//! ```text
//! a_s(u, v) = Σ_D β_D (∇_w u, ∇_w v)_D + Σ_D h_D⁻¹ ⟨u₀ − u_b, v₀ − v_b⟩_∂D
//! ```
//!
//! and of the load `(f, v₀) + ⟨g, v_b⟩_Γ`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, WgError};
use crate::geometry::{region_census, CurvedPolygonMesh, EdgeTag, Vec2};
use crate::quadrature::edge_rule_for_degree;
use crate::space::WeakSpace;
use crate::sparse::{CooMatrix, CsrMatrix};
use crate::weakgrad::project_edge;

/// Cell dofs come first (element by element), then edge dofs (edge by
/// edge). Dofs on boundary-tagged edges are constrained.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub cell_offsets: Vec<usize>,
    pub edge_offsets: Vec<usize>,
    pub constrained: Vec<bool>,
    /// Position of each dof among the free dofs.
    pub free_index: Vec<Option<usize>>,
    pub free_dofs: Vec<usize>,
}

impl DofMap {
    pub fn total(&self) -> usize {
        self.constrained.len()
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn num_cell_dofs(&self) -> usize {
        *self.cell_offsets.last().unwrap()
    }

    pub fn cell_range(&self, element: usize) -> Range<usize> {
        self.cell_offsets[element]..self.cell_offsets[element + 1]
    }

    pub fn edge_range(&self, edge: usize) -> Range<usize> {
        self.edge_offsets[edge]..self.edge_offsets[edge + 1]
    }
}

pub fn build_dof_map(mesh: &CurvedPolygonMesh, cell_dims: &[usize], edge_dims: &[usize]) -> DofMap {
    assert_eq!(cell_dims.len(), mesh.num_elements());
    assert_eq!(edge_dims.len(), mesh.num_edges());
    let mut cell_offsets = vec![0];
    for d in cell_dims {
        cell_offsets.push(cell_offsets.last().unwrap() + d);
    }
    let mut edge_offsets = vec![*cell_offsets.last().unwrap()];
    for d in edge_dims {
        edge_offsets.push(edge_offsets.last().unwrap() + d);
    }
    let total = *edge_offsets.last().unwrap();
    let mut constrained = vec![false; total];
    for (i, edge) in mesh.edges.iter().enumerate() {
        if edge.tag == EdgeTag::Boundary {
            constrained[edge_offsets[i]..edge_offsets[i + 1]].fill(true);
        }
    }
    let mut free_index = vec![None; total];
    let mut free_dofs = Vec::new();
    for d in 0..total {
        if !constrained[d] {
            free_index[d] = Some(free_dofs.len());
            free_dofs.push(d);
        }
    }
    DofMap {
        cell_offsets,
        edge_offsets,
        constrained,
        free_index,
        free_dofs,
    }
}

pub type ScalarField = Arc<dyn Fn(&Vec2) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Poisson,
    Interface,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Poisson => "poisson",
            Self::Interface => "interface",
        }
    }
}

/// `−∇·(β∇u) = f` with `u` given on `∂Ω` and, for the interface kind, the
/// conormal jump `β₁∇u₁·n − β₂∇u₂·n = g` across Γ with `n` pointing out of
/// region 1.
#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub beta1: f64,
    pub beta2: f64,
    pub source: ScalarField,
    pub flux_jump: Option<ScalarField>,
    pub dirichlet: Option<ScalarField>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("kind", &self.kind)
            .field("beta1", &self.beta1)
            .field("beta2", &self.beta2)
            .field("flux_jump", &self.flux_jump.is_some())
            .field("dirichlet", &self.dirichlet.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn poisson(source: ScalarField) -> Self {
        Self {
            kind: ProblemKind::Poisson,
            beta1: 1.0,
            beta2: 1.0,
            source,
            flux_jump: None,
            dirichlet: None,
        }
    }

    pub fn interface(beta1: f64, beta2: f64, source: ScalarField, flux_jump: ScalarField) -> Self {
        Self {
            kind: ProblemKind::Interface,
            beta1,
            beta2,
            source,
            flux_jump: Some(flux_jump),
            dirichlet: None,
        }
    }

    pub fn with_dirichlet(mut self, data: ScalarField) -> Self {
        self.dirichlet = Some(data);
        self
    }

    pub fn beta(&self, region: i32) -> Result<f64> {
        match (self.kind, region) {
            (ProblemKind::Poisson, _) => Ok(1.0),
            (ProblemKind::Interface, 1) => Ok(self.beta1),
            (ProblemKind::Interface, 2) => Ok(self.beta2),
            (ProblemKind::Interface, r) => Err(WgError::Spec(format!(
                "no diffusion coefficient for region {r}"
            ))),
        }
    }

    pub fn validate(&self, mesh: &CurvedPolygonMesh) -> Result<()> {
        match self.kind {
            ProblemKind::Poisson => {
                if self.flux_jump.is_some() {
                    return Err(WgError::Spec(
                        "interface flux jump supplied for a poisson problem".into(),
                    ));
                }
            }
            ProblemKind::Interface => {
                for b in [self.beta1, self.beta2] {
                    if !(b > 0.0 && b.is_finite()) {
                        return Err(WgError::Spec(format!(
                            "diffusion coefficient {b} is not positive"
                        )));
                    }
                }
                let census = region_census(mesh);
                for r in [1, 2] {
                    if !census.contains_key(&r) {
                        return Err(WgError::Spec(format!(
                            "interface problem needs region {r} in the mesh"
                        )));
                    }
                }
                if let Some(r) = census.keys().find(|&&r| r != 1 && r != 2) {
                    return Err(WgError::Spec(format!(
                        "no diffusion coefficient for region {r}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `β_D Gᵀ M_∇ G` in local ordering.
pub fn local_stiffness(space: &WeakSpace, element: usize, beta: f64) -> DMatrix<f64> {
    let g = &space.operators[element].matrix;
    let m = &space.gradients[element].mass;
    (g.transpose() * m * g) * beta
}

/// `h_D⁻¹ ⟨u₀ − u_b, v₀ − v_b⟩_∂D` in local ordering.
pub fn local_stabilization(space: &WeakSpace, element: usize) -> DMatrix<f64> {
    let cell = &space.cells[element];
    let n0 = cell.dim();
    let op = &space.operators[element];
    let n = op.local_dim();
    let hinv = 1.0 / space.geometry[element].diameter;
    let mut s = DMatrix::zeros(n, n);
    let mut col = n0;
    for le in &space.mesh.elements[element].edges {
        let basis = &space.edges[le.edge];
        let nb = basis.dim();
        let q = edge_rule_for_degree(&space.mesh.edges[le.edge], 2 * space.k);
        for (p, w) in q.points.iter().zip(&q.weights) {
            // v₀ − v_b as a row over local dofs
            let mut diff = vec![0.0; n0 + nb];
            for (i, m) in cell.eval(p).into_iter().enumerate() {
                diff[i] = m;
            }
            for (r, phi) in basis.eval(p).into_iter().enumerate() {
                diff[n0 + r] = -phi;
            }
            let idx = |a: usize| if a < n0 { a } else { col + a - n0 };
            for a in 0..diff.len() {
                if diff[a] == 0.0 {
                    continue;
                }
                for b in 0..diff.len() {
                    s[(idx(a), idx(b))] += hinv * w * diff[a] * diff[b];
                }
            }
        }
        col += nb;
    }
    s
}

fn scatter(space: &WeakSpace, locals: Vec<DMatrix<f64>>) -> CooMatrix {
    let n = space.num_dofs();
    let mut coo = CooMatrix::new(n, n);
    for (e, block) in locals.iter().enumerate() {
        coo.add_block(&space.local_dofs(e), block);
    }
    coo
}

pub fn assemble_stiffness(space: &WeakSpace, spec: &ProblemSpec) -> Result<CooMatrix> {
    let betas: Vec<f64> = space
        .mesh
        .elements
        .iter()
        .map(|el| spec.beta(el.region))
        .collect::<Result<_>>()?;
    let locals: Vec<DMatrix<f64>> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|e| local_stiffness(space, e, betas[e]))
        .collect();
    Ok(scatter(space, locals))
}

pub fn assemble_stabilization(space: &WeakSpace) -> CooMatrix {
    let locals: Vec<DMatrix<f64>> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|e| local_stabilization(space, e))
        .collect();
    scatter(space, locals)
}

/// Full load vector over all dofs, constrained ones included.
pub fn assemble_load(space: &WeakSpace, spec: &ProblemSpec) -> Result<Vec<f64>> {
    if spec.kind == ProblemKind::Poisson && spec.flux_jump.is_some() {
        return Err(WgError::Spec(
            "interface flux jump supplied for a poisson problem".into(),
        ));
    }
    let mut load = vec![0.0; space.num_dofs()];
    let order = 2 * space.k + 4;
    let cells: Vec<Vec<f64>> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let rule = space.fan_rule(e, order)?;
            let cell = &space.cells[e];
            let mut v = vec![0.0; cell.dim()];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let f = (spec.source)(p);
                for (i, m) in cell.eval(p).into_iter().enumerate() {
                    v[i] += w * f * m;
                }
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    for (e, v) in cells.into_iter().enumerate() {
        for (d, x) in space.dofs.cell_range(e).zip(v) {
            load[d] += x;
        }
    }
    if let Some(g) = &spec.flux_jump {
        for (i, edge) in space.mesh.edges.iter().enumerate() {
            if edge.tag != EdgeTag::Interface {
                continue;
            }
            let c = project_edge(&space.edges[i], edge, |p| g(p));
            for (d, x) in space.dofs.edge_range(i).zip(c) {
                load[d] += x;
            }
        }
    }
    Ok(load)
}

/// Full matrix `A_s` (stiffness plus stabilization) and full load.
pub fn assemble_system(space: &WeakSpace, spec: &ProblemSpec) -> Result<(CsrMatrix, Vec<f64>)> {
    spec.validate(&space.mesh)?;
    let betas: Vec<f64> = space
        .mesh
        .elements
        .iter()
        .map(|el| spec.beta(el.region))
        .collect::<Result<_>>()?;
    let locals: Vec<DMatrix<f64>> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|e| local_stiffness(space, e, betas[e]) + local_stabilization(space, e))
        .collect();
    let matrix = scatter(space, locals).to_csr();
    let load = assemble_load(space, spec)?;
    Ok((matrix, load))
}

/// The system over free dofs after eliminating the constrained ones.
#[derive(Clone, Debug)]
pub struct SparseSpdSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub free_dofs: Vec<usize>,
    /// Prescribed values on constrained dofs, zero elsewhere.
    pub constrained_values: Vec<f64>,
}

impl SparseSpdSystem {
    /// Full coefficient vector from a free-dof solution.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = self.constrained_values.clone();
        for (&d, &x) in self.free_dofs.iter().zip(free) {
            full[d] = x;
        }
        full
    }
}

/// Sets boundary-edge dofs to `Qᵇ` of the Dirichlet data and eliminates
/// them, moving their columns to the right-hand side.
pub fn apply_dirichlet(
    space: &WeakSpace,
    matrix: &CsrMatrix,
    load: &[f64],
    spec: &ProblemSpec,
) -> SparseSpdSystem {
    let dofs = &space.dofs;
    let mut values = vec![0.0; dofs.total()];
    if let Some(data) = &spec.dirichlet {
        for (i, edge) in space.mesh.edges.iter().enumerate() {
            if edge.tag == EdgeTag::Boundary {
                let c = project_edge(&space.edges[i], edge, |p| data(p));
                for (d, x) in dofs.edge_range(i).zip(c) {
                    values[d] = x;
                }
            }
        }
    }
    let lifted = matrix.mul_vec(&values);
    let rhs: Vec<f64> = dofs
        .free_dofs
        .iter()
        .map(|&d| load[d] - lifted[d])
        .collect();
    let reduced = matrix.submatrix(&dofs.free_dofs, &dofs.free_index, dofs.num_free());
    SparseSpdSystem {
        matrix: reduced,
        rhs,
        free_dofs: dofs.free_dofs.clone(),
        constrained_values: values,
    }
}

/// Assembly followed by constraint elimination.
pub fn discretize(space: &WeakSpace, spec: &ProblemSpec) -> Result<SparseSpdSystem> {
    let (matrix, load) = assemble_system(space, spec)?;
    Ok(apply_dirichlet(space, &matrix, &load, spec))
}
