//! The weak finite element space `V_h` on one mesh: shape data, bases,
//! weak-gradient operators and the global dof map, built once.

use rayon::prelude::*;

use crate::assembly::{build_dof_map, DofMap};
use crate::basis::{
    build_cell_basis, build_edge_basis, build_gradient_basis, CellBasis, EdgeTraceBasis,
    GradientBasis,
};
use crate::error::{Result, WgError};
use crate::geometry::{element_metrics, CurvedPolygonMesh, ElementGeometry, Vec2};
use crate::quadrature::{interior_rule, InteriorQuadrature};
use crate::weakgrad::{build_weak_gradient, project_cell, project_edge, WeakGradientOperator};

#[derive(Clone, Debug)]
pub struct WeakSpace {
    pub mesh: CurvedPolygonMesh,
    pub k: usize,
    pub gradient_degree: usize,
    pub geometry: Vec<ElementGeometry>,
    pub cells: Vec<CellBasis>,
    pub gradients: Vec<GradientBasis>,
    pub edges: Vec<EdgeTraceBasis>,
    pub operators: Vec<WeakGradientOperator>,
    pub dofs: DofMap,
}

impl WeakSpace {
    /// Space of degree `k ≥ 1` with weak gradients in `[P_{k−1}]²`.
    pub fn new(mesh: CurvedPolygonMesh, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(WgError::Spec(
                "polynomial degree k must satisfy k >= 1".into(),
            ));
        }
        Self::with_gradient_degree(mesh, k, k - 1)
    }

    pub fn with_gradient_degree(
        mesh: CurvedPolygonMesh,
        k: usize,
        gradient_degree: usize,
    ) -> Result<Self> {
        let per_element: Vec<(ElementGeometry, CellBasis, GradientBasis)> = (0..mesh
            .num_elements())
            .into_par_iter()
            .map(|e| {
                let geom = element_metrics(&mesh, e)?;
                let cell = build_cell_basis(&mesh, e, &geom, k)?;
                let grad = build_gradient_basis(&cell, gradient_degree)?;
                Ok((geom, cell, grad))
            })
            .collect::<Result<_>>()?;
        let edges: Vec<EdgeTraceBasis> = mesh
            .edges
            .par_iter()
            .enumerate()
            .map(|(i, edge)| build_edge_basis(edge, i, k))
            .collect::<Result<_>>()?;

        let mut geometry = Vec::with_capacity(per_element.len());
        let mut cells = Vec::with_capacity(per_element.len());
        let mut gradients = Vec::with_capacity(per_element.len());
        for (g, c, q) in per_element {
            geometry.push(g);
            cells.push(c);
            gradients.push(q);
        }

        let operators: Vec<WeakGradientOperator> = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| {
                let bases: Vec<&EdgeTraceBasis> = mesh.elements[e]
                    .edges
                    .iter()
                    .map(|le| &edges[le.edge])
                    .collect();
                build_weak_gradient(&mesh, e, &cells[e], &bases, &gradients[e])
            })
            .collect::<Result<_>>()?;

        let cell_dims: Vec<usize> = cells.iter().map(|c| c.dim()).collect();
        let edge_dims: Vec<usize> = edges.iter().map(|b| b.dim()).collect();
        let dofs = build_dof_map(&mesh, &cell_dims, &edge_dims);
        Ok(Self {
            mesh,
            k,
            gradient_degree,
            geometry,
            cells,
            gradients,
            edges,
            operators,
            dofs,
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs.total()
    }

    /// Mesh size `h = max h_D`.
    pub fn h(&self) -> f64 {
        self.geometry.iter().map(|g| g.diameter).fold(0.0, f64::max)
    }

    /// Global indices of the element's local dofs: cell first, then each
    /// loop edge in order.
    pub fn local_dofs(&self, element: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.dofs.cell_range(element).collect();
        for le in &self.mesh.elements[element].edges {
            out.extend(self.dofs.edge_range(le.edge));
        }
        out
    }

    pub fn gather(&self, element: usize, v: &[f64]) -> Vec<f64> {
        self.local_dofs(element).into_iter().map(|d| v[d]).collect()
    }

    pub fn element_edge_bases(&self, element: usize) -> Vec<&EdgeTraceBasis> {
        self.mesh.elements[element]
            .edges
            .iter()
            .map(|le| &self.edges[le.edge])
            .collect()
    }

    pub fn fan_rule(&self, element: usize, order: usize) -> Result<InteriorQuadrature> {
        interior_rule(
            &self.mesh,
            element,
            self.geometry[element].star_center,
            order,
        )
    }

    /// `Q⁰` of general data on one element with a fan rule of order
    /// `4k + 8`. Debug builds repeat the projection at doubled order and warn
    /// when the two disagree.
    pub fn project_cell(
        &self,
        element: usize,
        f: &(dyn Fn(&Vec2) -> f64 + Sync),
    ) -> Result<Vec<f64>> {
        let order = 4 * self.k + 8;
        let c = project_cell(&self.cells[element], &self.fan_rule(element, order)?, f)?;
        if cfg!(debug_assertions) {
            let fine = project_cell(&self.cells[element], &self.fan_rule(element, 2 * order)?, f)?;
            let scale = fine.iter().fold(1e-300_f64, |m, v| m.max(v.abs()));
            let gap = c
                .iter()
                .zip(&fine)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            if gap > 1e-6 * scale {
                eprintln!("warning: cell projection on element {element} changed by {gap:e} under order doubling");
            }
        }
        Ok(c)
    }

    /// `Q_h u`: cell projections on every element and trace projections on
    /// every edge, as one global coefficient vector.
    pub fn interpolate(&self, u: &(dyn Fn(&Vec2) -> f64 + Sync)) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.num_dofs()];
        let cells: Vec<Vec<f64>> = (0..self.cells.len())
            .into_par_iter()
            .map(|e| self.project_cell(e, u))
            .collect::<Result<_>>()?;
        for (e, c) in cells.into_iter().enumerate() {
            for (d, x) in self.dofs.cell_range(e).zip(c) {
                v[d] = x;
            }
        }
        let edges: Vec<Vec<f64>> = self
            .edges
            .par_iter()
            .enumerate()
            .map(|(i, b)| project_edge(b, &self.mesh.edges[i], u))
            .collect();
        for (i, c) in edges.into_iter().enumerate() {
            for (d, x) in self.dofs.edge_range(i).zip(c) {
                v[d] = x;
            }
        }
        Ok(v)
    }
}
