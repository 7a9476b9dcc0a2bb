//! The discrete weak gradient and the three L² projections it is analysed
//! with.
//!
//! For a weak function `v = (v₀, v_b)` on an element `D`, `∇_w v` is the
//! vector polynomial satisfying, for every test field `q` of the gradient
//! space,
//!
//! ```text
//! (∇_w v, q)_D = −(v₀, ∇·q)_D + ⟨v_b, q·n⟩_∂D
//! ```
//!
//! Coefficient-wise this is `G = M_∇⁻¹ [−B_div | B_bnd]`, with `B_div` read
//! off the exact moment table and `B_bnd` integrated along the edges.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::basis::{CellBasis, EdgeTraceBasis, GradientBasis};
use crate::error::{Result, WgError};
use crate::geometry::{CurvedPolygonMesh, ParametricEdge, Vec2};
use crate::quadrature::{edge_rule_for_degree, InteriorQuadrature};

#[derive(Clone, Debug)]
pub struct WeakGradientOperator {
    pub element: usize,
    /// `dim(gradient space) × (dim P_k + Σ edge dims)`, columns in local
    /// order: cell coefficients, then each loop edge's trace coefficients.
    pub matrix: DMatrix<f64>,
    pub cell_dim: usize,
    pub edge_dims: Vec<usize>,
}

impl WeakGradientOperator {
    pub fn local_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// Gradient-basis coefficients of `∇_w v` for local coefficients `v`.
    pub fn apply(&self, local: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(local))
            .iter()
            .copied()
            .collect()
    }
}

fn cholesky(m: &DMatrix<f64>, element: usize, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| WgError::DegenerateElement {
        element,
        reason: format!("{what} mass matrix is not positive definite"),
    })
}

/// Builds `G` for one element. `edge_bases` must follow the element's loop
/// order.
pub fn build_weak_gradient(
    mesh: &CurvedPolygonMesh,
    element: usize,
    cell: &CellBasis,
    edge_bases: &[&EdgeTraceBasis],
    grad: &GradientBasis,
) -> Result<WeakGradientOperator> {
    let el = &mesh.elements[element];
    assert_eq!(
        el.edges.len(),
        edge_bases.len(),
        "one trace basis per loop edge"
    );
    let ng = grad.scalar_dim();
    let n0 = cell.dim();
    let edge_dims: Vec<usize> = edge_bases.iter().map(|b| b.dim()).collect();
    let ncols = n0 + edge_dims.iter().sum::<usize>();
    let mut rhs = DMatrix::zeros(2 * ng, ncols);
    let h = cell.scale;

    // −(v₀, ∇·q): q = (m_j, 0) has ∇·q = ∂x m_j, q = (0, m_j) has ∂y m_j.
    for (j, &(aj, bj)) in grad.exponents.iter().enumerate() {
        for (i, &(ai, bi)) in cell.exponents.iter().enumerate() {
            if aj > 0 {
                rhs[(j, i)] = -(aj as f64) / h * cell.moments.get(ai + aj - 1, bi + bj);
            }
            if bj > 0 {
                rhs[(ng + j, i)] = -(bj as f64) / h * cell.moments.get(ai + aj, bi + bj - 1);
            }
        }
    }

    // ⟨v_b, q·n⟩ edge by edge.
    let mut col = n0;
    for (le, basis) in el.edges.iter().zip(edge_bases) {
        let edge = &mesh.edges[le.edge];
        let q = edge_rule_for_degree(edge, cell.degree + grad.degree);
        let sign = le.dir.sign();
        for i in 0..q.len() {
            let p = &q.points[i];
            let n = q.normals[i] * sign;
            let w = q.weights[i];
            let phi = basis.eval(p);
            let m = grad.scalar_values(p);
            for (r, phr) in phi.iter().enumerate() {
                for (j, mj) in m.iter().enumerate() {
                    rhs[(j, col + r)] += w * phr * mj * n.x;
                    rhs[(ng + j, col + r)] += w * phr * mj * n.y;
                }
            }
        }
        col += basis.dim();
    }

    let chol = cholesky(&grad.mass, element, "gradient")?;
    let matrix = chol.solve(&rhs);
    Ok(WeakGradientOperator {
        element,
        matrix,
        cell_dim: n0,
        edge_dims,
    })
}

/// `Q⁰`: L² projection of `f` onto `P_k(D)` using an interior rule.
pub fn project_cell(
    cell: &CellBasis,
    rule: &InteriorQuadrature,
    f: impl Fn(&Vec2) -> f64,
) -> Result<Vec<f64>> {
    let mut rhs = DVector::zeros(cell.dim());
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let fv = f(p);
        for (i, m) in cell.eval(p).into_iter().enumerate() {
            rhs[i] += w * fv * m;
        }
    }
    let chol = cholesky(&cell.mass, cell.element, "cell")?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// `Q⁰` of a polynomial given in the cell's own scaled monomials, computed
/// from exact moments. Degree may exceed `k` by up to 2.
pub fn project_cell_polynomial(
    cell: &CellBasis,
    exponents: &[(usize, usize)],
    coeffs: &[f64],
) -> Result<Vec<f64>> {
    let mut rhs = DVector::zeros(cell.dim());
    for (i, &(ai, bi)) in cell.exponents.iter().enumerate() {
        for (&(a, b), c) in exponents.iter().zip(coeffs) {
            if ai + a + bi + b > cell.moments.max_degree {
                return Err(WgError::Spec(format!(
                    "polynomial degree {} too high for the moment table",
                    a + b
                )));
            }
            rhs[i] += c * cell.moments.get(ai + a, bi + b);
        }
    }
    let chol = cholesky(&cell.mass, cell.element, "cell")?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// `Qᵇ`: L² projection onto the trace space of one edge. The basis is
/// orthonormal, so the coefficients are plain moments.
pub fn project_edge(
    basis: &EdgeTraceBasis,
    edge: &ParametricEdge,
    g: impl Fn(&Vec2) -> f64,
) -> Vec<f64> {
    let q = edge_rule_for_degree(edge, 2 * basis.degree + 4);
    let mut c = vec![0.0; basis.dim()];
    for (p, w) in q.points.iter().zip(&q.weights) {
        let gv = g(p);
        for (r, phi) in basis.eval(p).into_iter().enumerate() {
            c[r] += w * gv * phi;
        }
    }
    c
}

/// `Q^∇`: L² projection of a vector field onto the gradient space.
pub fn project_gradient(
    grad: &GradientBasis,
    rule: &InteriorQuadrature,
    w: impl Fn(&Vec2) -> Vec2,
) -> Result<Vec<f64>> {
    let n = grad.scalar_dim();
    let mut rhs = DVector::zeros(2 * n);
    for (p, wt) in rule.points.iter().zip(&rule.weights) {
        let wv = w(p);
        for (j, m) in grad.scalar_values(p).into_iter().enumerate() {
            rhs[j] += wt * wv.x * m;
            rhs[n + j] += wt * wv.y * m;
        }
    }
    let chol = cholesky(&grad.mass, grad.element, "gradient")?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}
