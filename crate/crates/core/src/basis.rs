//! Scaled monomial bases for `P_k(D)`, orthonormal trace bases on (possibly
//! curved) edges, and the vector basis of the weak-gradient space.
//!
//! Cell monomials are `m_{a,b} = X^a Y^b` with `X = (x - c_x)/h_D`,
//! `Y = (y - c_y)/h_D`, centered at the element's star center and ordered
//! graded-lexicographically: `1, X, Y, X², XY, Y², ...`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Result, WgError};
use crate::geometry::{CurvedPolygonMesh, ElementGeometry, ParametricEdge, Vec2};
use crate::quadrature::{edge_length, edge_rule_for_degree, monomial_moments, MomentTable};

/// Relative eigenvalue cutoff for the edge trace space.
pub const TRACE_RANK_CUTOFF: f64 = 1e-10;

/// Conditioning above which the cell mass matrix is flagged in reports.
pub const CONDITION_WARNING: f64 = 1e8;

pub fn dim_p(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponents `(a, b)` with `a + b ≤ k` in graded-lex order.
pub fn monomial_exponents(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_p(k));
    for d in 0..=k {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Values of all monomials with the given exponents at scaled point `(x, y)`.
fn monomial_values(exps: &[(usize, usize)], max_degree: usize, x: f64, y: f64) -> Vec<f64> {
    let xp = powers(x, max_degree);
    let yp = powers(y, max_degree);
    exps.iter().map(|&(a, b)| xp[a] * yp[b]).collect()
}

fn powers(x: f64, n: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    let mut acc = 1.0;
    for _ in 0..=n {
        p.push(acc);
        acc *= x;
    }
    p
}

#[derive(Clone, Debug)]
pub struct CellBasis {
    pub element: usize,
    pub degree: usize,
    pub center: Vec2,
    pub scale: f64,
    pub exponents: Vec<(usize, usize)>,
    /// Scaled moments to degree `2k + 2`.
    pub moments: MomentTable,
    pub mass: DMatrix<f64>,
    pub condition: f64,
}

impl CellBasis {
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    #[inline]
    pub fn scaled(&self, p: &Vec2) -> Vec2 {
        (p - self.center) / self.scale
    }

    pub fn eval(&self, p: &Vec2) -> Vec<f64> {
        let s = self.scaled(p);
        monomial_values(&self.exponents, self.degree, s.x, s.y)
    }

    /// Gradients, including the `1/h_D` chain-rule factor.
    pub fn eval_grad(&self, p: &Vec2) -> Vec<Vec2> {
        let s = self.scaled(p);
        let xp = powers(s.x, self.degree);
        let yp = powers(s.y, self.degree);
        self.exponents
            .iter()
            .map(|&(a, b)| {
                let gx = if a > 0 {
                    a as f64 * xp[a - 1] * yp[b]
                } else {
                    0.0
                };
                let gy = if b > 0 {
                    b as f64 * xp[a] * yp[b - 1]
                } else {
                    0.0
                };
                Vec2::new(gx, gy) / self.scale
            })
            .collect()
    }

    /// Scaled moment `∫_D X^a Y^b`.
    pub fn moment(&self, a: usize, b: usize) -> f64 {
        self.moments.get(a, b)
    }

    /// Evaluates `Σ c_i m_i` at `p`.
    pub fn eval_combination(&self, coeffs: &[f64], p: &Vec2) -> f64 {
        self.eval(p).iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }

    pub fn eval_combination_grad(&self, coeffs: &[f64], p: &Vec2) -> Vec2 {
        self.eval_grad(p)
            .iter()
            .zip(coeffs)
            .map(|(g, c)| g * *c)
            .sum()
    }
}

/// Values of every basis monomial at each point: rows are points.
pub fn eval_cell(basis: &CellBasis, points: &[Vec2]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(points.len(), basis.dim());
    for (r, p) in points.iter().enumerate() {
        for (c, v) in basis.eval(p).into_iter().enumerate() {
            out[(r, c)] = v;
        }
    }
    out
}

/// `(∂x, ∂y)` matrices of every basis monomial at each point.
pub fn eval_cell_grad(basis: &CellBasis, points: &[Vec2]) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut gx = DMatrix::zeros(points.len(), basis.dim());
    let mut gy = DMatrix::zeros(points.len(), basis.dim());
    for (r, p) in points.iter().enumerate() {
        for (c, g) in basis.eval_grad(p).into_iter().enumerate() {
            gx[(r, c)] = g.x;
            gy[(r, c)] = g.y;
        }
    }
    (gx, gy)
}

fn mass_from_moments(exps: &[(usize, usize)], moments: &MomentTable) -> DMatrix<f64> {
    let n = exps.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (exps[i].0 + exps[j].0, exps[i].1 + exps[j].1);
        moments.get(a, b)
    })
}

/// Eigenvalue ratio of a symmetric matrix, `None` when not positive definite
/// to the relative threshold.
fn spd_condition(m: &DMatrix<f64>, threshold: f64) -> Option<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    (max > 0.0 && min > threshold * max).then(|| max / min)
}

pub fn build_cell_basis(
    mesh: &CurvedPolygonMesh,
    element: usize,
    geometry: &ElementGeometry,
    k: usize,
) -> Result<CellBasis> {
    let center = geometry.star_center;
    let scale = geometry.diameter;
    let moments = monomial_moments(mesh, element, center, scale, 2 * k + 2)?;
    let exponents = monomial_exponents(k);
    let mass = mass_from_moments(&exponents, &moments);
    let condition = spd_condition(&mass, 1e-13).ok_or_else(|| WgError::DegenerateElement {
        element,
        reason: "cell mass matrix numerically singular".into(),
    })?;
    Ok(CellBasis {
        element,
        degree: k,
        center,
        scale,
        exponents,
        moments,
        mass,
        condition,
    })
}

/// Orthonormal basis of the restrictions of degree-`k` polynomials to one
/// edge. The first function is the normalized constant; the rest span the
/// complement from a truncated eigen-factorization of the Gram matrix.
#[derive(Clone, Debug)]
pub struct EdgeTraceBasis {
    pub edge: usize,
    pub degree: usize,
    /// Scaling of the ambient monomial generators: the curve midpoint and
    /// the edge length.
    pub center: Vec2,
    pub scale: f64,
    pub length: f64,
    pub exponents: Vec<(usize, usize)>,
    /// Generator-to-basis coefficients, `generators × dim`.
    pub coefficients: DMatrix<f64>,
}

impl EdgeTraceBasis {
    pub fn dim(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn generator_values(&self, p: &Vec2) -> Vec<f64> {
        let s = (p - self.center) / self.scale;
        monomial_values(&self.exponents, self.degree, s.x, s.y)
    }

    pub fn eval(&self, p: &Vec2) -> Vec<f64> {
        let g = self.generator_values(p);
        (0..self.dim())
            .map(|r| {
                self.coefficients
                    .column(r)
                    .iter()
                    .zip(&g)
                    .map(|(c, v)| c * v)
                    .sum()
            })
            .collect()
    }

    pub fn eval_combination(&self, coeffs: &[f64], p: &Vec2) -> f64 {
        self.eval(p).iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }
}

pub fn build_edge_basis(
    edge: &ParametricEdge,
    edge_index: usize,
    k: usize,
) -> Result<EdgeTraceBasis> {
    let length = edge_length(edge);
    if !(length > 0.0) || !length.is_finite() {
        return Err(WgError::DegenerateEdge(edge_index));
    }
    let center = edge.curve.eval(0.5);
    let scale = length;
    let exponents = monomial_exponents(k);
    let ngen = exponents.len();
    let q = edge_rule_for_degree(edge, 2 * k);
    let qlen = q.length();

    let values: Vec<Vec<f64>> = q
        .points
        .iter()
        .map(|p| {
            let s = (p - center) / scale;
            monomial_values(&exponents, k, s.x, s.y)
        })
        .collect();

    // Means of the non-constant generators, then the centered Gram matrix.
    let mean: Vec<f64> = (1..ngen)
        .map(|i| {
            values
                .iter()
                .zip(&q.weights)
                .map(|(v, w)| w * v[i])
                .sum::<f64>()
                / qlen
        })
        .collect();
    let m = ngen - 1;
    let mut gram = DMatrix::zeros(m, m);
    for (v, w) in values.iter().zip(&q.weights) {
        for i in 0..m {
            let gi = v[i + 1] - mean[i];
            for j in 0..=i {
                gram[(i, j)] += w * gi * (v[j + 1] - mean[j]);
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }

    let mut kept: Vec<(f64, Vec<f64>)> = Vec::new();
    if m > 0 {
        let eig = SymmetricEigen::new(gram);
        let lmax = eig.eigenvalues.max();
        for (r, &lam) in eig.eigenvalues.iter().enumerate() {
            if lmax > 0.0 && lam >= TRACE_RANK_CUTOFF * lmax {
                let mut vec: Vec<f64> = eig.eigenvectors.column(r).iter().copied().collect();
                // fix the sign so the basis is reproducible
                let lead = vec
                    .iter()
                    .copied()
                    .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
                if lead < 0.0 {
                    vec.iter_mut().for_each(|v| *v = -*v);
                }
                kept.push((lam, vec));
            }
        }
        kept.sort_by(|a, b| b.0.total_cmp(&a.0));
    }

    let dim = 1 + kept.len();
    let mut coefficients = DMatrix::zeros(ngen, dim);
    coefficients[(0, 0)] = 1.0 / qlen.sqrt();
    for (r, (lam, vec)) in kept.iter().enumerate() {
        let s = 1.0 / lam.sqrt();
        let mut c0 = 0.0;
        for i in 0..m {
            coefficients[(i + 1, r + 1)] = vec[i] * s;
            c0 -= vec[i] * s * mean[i];
        }
        coefficients[(0, r + 1)] = c0;
    }

    // Second pass: restore orthonormality lost to cancellation in the
    // small-eigenvalue directions.
    let gen = DMatrix::from_fn(values.len(), ngen, |i, j| values[i][j]);
    let phi = &gen * &coefficients;
    let mut gram_phi = DMatrix::zeros(dim, dim);
    for (i, w) in q.weights.iter().enumerate() {
        let row = phi.row(i);
        gram_phi += row.transpose() * row * *w;
    }
    if let Some(chol) = Cholesky::new(gram_phi) {
        let linv_t = chol
            .l()
            .transpose()
            .try_inverse()
            .ok_or(WgError::DegenerateEdge(edge_index))?;
        coefficients *= linv_t;
    }
    Ok(EdgeTraceBasis {
        edge: edge_index,
        degree: k,
        center,
        scale,
        length,
        exponents,
        coefficients,
    })
}

/// Vector monomials `(m, 0)` then `(0, m)` for the scalar monomials of the
/// given degree, in the cell scaling.
#[derive(Clone, Debug)]
pub struct GradientBasis {
    pub element: usize,
    pub degree: usize,
    pub center: Vec2,
    pub scale: f64,
    pub exponents: Vec<(usize, usize)>,
    /// Scalar mass matrix of the degree-`degree` monomials.
    pub scalar_mass: DMatrix<f64>,
    /// Block-diagonal vector mass matrix.
    pub mass: DMatrix<f64>,
}

impl GradientBasis {
    pub fn dim(&self) -> usize {
        2 * self.exponents.len()
    }

    pub fn scalar_dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn scalar_values(&self, p: &Vec2) -> Vec<f64> {
        let s = (p - self.center) / self.scale;
        monomial_values(&self.exponents, self.degree, s.x, s.y)
    }

    /// Evaluates the vector field with the given coefficients.
    pub fn eval_field(&self, coeffs: &[f64], p: &Vec2) -> Vec2 {
        let n = self.scalar_dim();
        let v = self.scalar_values(p);
        let x: f64 = v.iter().zip(&coeffs[..n]).map(|(a, b)| a * b).sum();
        let y: f64 = v.iter().zip(&coeffs[n..]).map(|(a, b)| a * b).sum();
        Vec2::new(x, y)
    }
}

pub fn build_gradient_basis(cell: &CellBasis, degree: usize) -> Result<GradientBasis> {
    if 2 * degree > cell.moments.max_degree {
        return Err(WgError::Spec(format!(
            "gradient degree {degree} exceeds what cell degree {} supports",
            cell.degree
        )));
    }
    let exponents = monomial_exponents(degree);
    let scalar_mass = mass_from_moments(&exponents, &cell.moments);
    let n = exponents.len();
    let mut mass = DMatrix::zeros(2 * n, 2 * n);
    mass.view_mut((0, 0), (n, n)).copy_from(&scalar_mass);
    mass.view_mut((n, n), (n, n)).copy_from(&scalar_mass);
    if spd_condition(&scalar_mass, 1e-13).is_none() {
        return Err(WgError::DegenerateElement {
            element: cell.element,
            reason: "gradient mass matrix numerically singular".into(),
        });
    }
    Ok(GradientBasis {
        element: cell.element,
        degree,
        center: cell.center,
        scale: cell.scale,
        exponents,
        scalar_mass,
        mass,
    })
}
