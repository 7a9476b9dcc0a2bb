//! Manufactured solutions, error norms, weak norms, observed orders and the
//! sampled stability constants.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{
    assemble_system, local_stabilization, local_stiffness, ProblemSpec, ScalarField,
};
use crate::basis::monomial_exponents;
use crate::error::{Result, WgError};
use crate::geometry::Vec2;
use crate::quadrature::edge_rule_for_degree;
use crate::solver::{solve_spd, SolveOptions};
use crate::space::WeakSpace;
use crate::sparse::{dot, CooMatrix};
use crate::weakgrad::project_edge;

pub type VectorField = Arc<dyn Fn(&Vec2) -> Vec2 + Send + Sync>;

/// Names accepted by [`catalog`].
pub const CATALOG: &[&str] = &[
    "sinsin",
    "paraboloid",
    "linear",
    "quadratic",
    "cubic",
    "interface_r3",
];

/// Interface radius of the `interface_r3` entry.
pub const INTERFACE_RADIUS: f64 = 0.5;

#[derive(Clone)]
pub struct ManufacturedSolution {
    pub name: String,
    pub u: ScalarField,
    pub grad: VectorField,
    /// `−∇·(β∇u)`.
    pub f: ScalarField,
    /// Conormal jump on Γ, interface entries only.
    pub g: Option<ScalarField>,
    pub beta1: f64,
    pub beta2: f64,
    /// Γ is the circle of this radius about the origin; region 1 inside.
    pub interface_radius: Option<f64>,
}

impl fmt::Debug for ManufacturedSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedSolution")
            .field("name", &self.name)
            .field("beta1", &self.beta1)
            .field("beta2", &self.beta2)
            .field("interface_radius", &self.interface_radius)
            .finish()
    }
}

fn poisson_entry(
    name: &str,
    u: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    grad: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
    f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
) -> ManufacturedSolution {
    ManufacturedSolution {
        name: name.into(),
        u: Arc::new(move |p| u(p.x, p.y)),
        grad: Arc::new(move |p| {
            let (gx, gy) = grad(p.x, p.y);
            Vec2::new(gx, gy)
        }),
        f: Arc::new(move |p| f(p.x, p.y)),
        g: None,
        beta1: 1.0,
        beta2: 1.0,
        interface_radius: None,
    }
}

/// Looks up a catalog entry. `beta1`, `beta2` only affect interface entries.
pub fn catalog(name: &str, beta1: f64, beta2: f64) -> Result<ManufacturedSolution> {
    let s = match name {
        "sinsin" => poisson_entry(
            name,
            |x, y| (PI * x).sin() * (PI * y).sin(),
            |x, y| {
                (
                    PI * (PI * x).cos() * (PI * y).sin(),
                    PI * (PI * x).sin() * (PI * y).cos(),
                )
            },
            |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin(),
        ),
        "paraboloid" => poisson_entry(
            name,
            |x, y| 1.0 - x * x - y * y,
            |x, y| (-2.0 * x, -2.0 * y),
            |_, _| 4.0,
        ),
        "linear" => poisson_entry(
            name,
            |x, y| 1.0 + 2.0 * x - y,
            |_, _| (2.0, -1.0),
            |_, _| 0.0,
        ),
        "quadratic" => poisson_entry(
            name,
            |x, y| x * x + x * y - 2.0 * y * y + x - y + 1.0,
            |x, y| (2.0 * x + y + 1.0, x - 4.0 * y - 1.0),
            |_, _| 2.0,
        ),
        "cubic" => poisson_entry(
            name,
            |x, y| x.powi(3) - 2.0 * x * x * y + y.powi(3) + x * y - x + 0.5,
            |x, y| {
                (
                    3.0 * x * x - 4.0 * x * y + y - 1.0,
                    -2.0 * x * x + 3.0 * y * y + x,
                )
            },
            |x, y| -(6.0 * x + 2.0 * y),
        ),
        "interface_r3" => {
            for b in [beta1, beta2] {
                if !(b > 0.0 && b.is_finite()) {
                    return Err(WgError::Spec(format!(
                        "diffusion coefficient {b} is not positive"
                    )));
                }
            }
            let r0 = INTERFACE_RADIUS;
            let shift = r0.powi(3) * (1.0 / beta1 - 1.0 / beta2);
            let beta = move |r: f64| if r < r0 { beta1 } else { beta2 };
            ManufacturedSolution {
                name: name.into(),
                u: Arc::new(move |p| {
                    let r = p.norm();
                    if r < r0 {
                        r.powi(3) / beta1
                    } else {
                        r.powi(3) / beta2 + shift
                    }
                }),
                grad: Arc::new(move |p| {
                    let r = p.norm();
                    p * (3.0 * r / beta(r))
                }),
                f: Arc::new(|p| -9.0 * p.norm()),
                g: Some(Arc::new(|_| 0.0)),
                beta1,
                beta2,
                interface_radius: Some(r0),
            }
        }
        other => {
            return Err(WgError::Spec(format!(
                "unknown manufactured solution '{other}' (known: {})",
                CATALOG.join(", ")
            )))
        }
    };
    Ok(s)
}

/// Largest discrepancies found by [`ManufacturedSolution::self_check`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SelfCheck {
    pub source: f64,
    pub gradient: f64,
    pub jump: f64,
}

impl SelfCheck {
    pub fn passed(&self) -> bool {
        self.source <= 1e-4 && self.gradient <= 1e-6 && self.jump <= 1e-6
    }
}

impl ManufacturedSolution {
    pub fn is_interface(&self) -> bool {
        self.interface_radius.is_some()
    }

    pub fn beta_at(&self, p: &Vec2) -> f64 {
        match self.interface_radius {
            Some(r0) if p.norm() >= r0 => self.beta2,
            Some(_) => self.beta1,
            None => 1.0,
        }
    }

    /// The boundary value problem this solution satisfies, with `u` as
    /// Dirichlet data.
    pub fn problem(&self) -> ProblemSpec {
        let spec = match &self.g {
            Some(g) => ProblemSpec::interface(self.beta1, self.beta2, self.f.clone(), g.clone()),
            None => ProblemSpec::poisson(self.f.clone()),
        };
        spec.with_dirichlet(self.u.clone())
    }

    /// Compares `f` and `∇u` with central differences of `u` at `samples`
    /// random points of the box `[lo, hi]` (step `1e-4·h`, `h` the box
    /// diameter), and for interface entries checks continuity of `u` and the
    /// flux jump against `g` on Γ. Gaps are relative to `max(1, |value|)`.
    pub fn self_check(&self, lo: Vec2, hi: Vec2, samples: usize, seed: u64) -> SelfCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = (hi - lo).norm();
        let step = 1e-4 * h;
        let u = &self.u;
        let mut out = SelfCheck::default();
        let mut taken = 0;
        while taken < samples {
            let p = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            let near_edge = p.x - lo.x < 2.0 * step
                || hi.x - p.x < 2.0 * step
                || p.y - lo.y < 2.0 * step
                || hi.y - p.y < 2.0 * step;
            let near_gamma = self
                .interface_radius
                .is_some_and(|r0| (p.norm() - r0).abs() < 10.0 * step);
            if near_edge || near_gamma {
                continue;
            }
            taken += 1;
            let ex = Vec2::new(step, 0.0);
            let ey = Vec2::new(0.0, step);
            let u0 = u(&p);
            let lap = (u(&(p + ex)) + u(&(p - ex)) + u(&(p + ey)) + u(&(p - ey)) - 4.0 * u0)
                / (step * step);
            let f_fd = -self.beta_at(&p) * lap;
            let f = (self.f)(&p);
            out.source = out.source.max((f - f_fd).abs() / f.abs().max(1.0));
            let g_fd =
                Vec2::new(u(&(p + ex)) - u(&(p - ex)), u(&(p + ey)) - u(&(p - ey))) / (2.0 * step);
            let g = (self.grad)(&p);
            out.gradient = out.gradient.max((g - g_fd).norm() / g.norm().max(1.0));
        }
        if let (Some(r0), Some(jump)) = (self.interface_radius, &self.g) {
            for i in 0..64 {
                let theta = 2.0 * PI * (i as f64 + 0.5) / 64.0;
                let n = Vec2::new(theta.cos(), theta.sin());
                let inside = n * (r0 * (1.0 - 1e-12));
                let outside = n * (r0 * (1.0 + 1e-12));
                let du = u(&inside) - u(&outside);
                let flux = self.beta_at(&inside) * (self.grad)(&inside).dot(&n)
                    - self.beta_at(&outside) * (self.grad)(&outside).dot(&n);
                let gv = jump(&(n * r0));
                out.jump = out
                    .jump
                    .max(du.abs())
                    .max((flux - gv).abs() / gv.abs().max(1.0));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    /// `‖∇u − ∇_w u_h‖`, β-weighted for interface problems.
    pub e_grad_weak: f64,
    /// `‖∇u − ∇u₀‖`, β-weighted for interface problems.
    pub e_grad_interior: f64,
    /// `‖u − u₀‖_{L²(Ω)}`.
    pub e_l2: f64,
    pub h: f64,
    pub dofs: usize,
}

/// Broken norms of the discretization error, integrated element by element
/// with fan rules of order `2k + 6`.
pub fn error_norms(
    space: &WeakSpace,
    solution: &ManufacturedSolution,
    uh: &[f64],
    spec: &ProblemSpec,
) -> Result<ErrorReport> {
    assert_eq!(uh.len(), space.num_dofs());
    let order = 2 * space.k + 6;
    let parts: Vec<[f64; 3]> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let beta = spec.beta(space.mesh.elements[e].region)?;
            let rule = space.fan_rule(e, order)?;
            let local = space.gather(e, uh);
            let cell = &space.cells[e];
            let u0 = &local[..cell.dim()];
            let gw = space.operators[e].apply(&local);
            let grad = &space.gradients[e];
            let mut acc = [0.0; 3];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let du = (solution.grad)(p);
                acc[0] += w * beta * (du - grad.eval_field(&gw, p)).norm_squared();
                acc[1] += w * beta * (du - cell.eval_combination_grad(u0, p)).norm_squared();
                acc[2] += w * ((solution.u)(p) - cell.eval_combination(u0, p)).powi(2);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = [0.0; 3];
    for p in parts {
        for i in 0..3 {
            total[i] += p[i];
        }
    }
    Ok(ErrorReport {
        e_grad_weak: total[0].sqrt(),
        e_grad_interior: total[1].sqrt(),
        e_l2: total[2].sqrt(),
        h: space.h(),
        dofs: space.num_dofs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakNorms {
    /// `|v|_{k−1,w}`.
    pub seminorm: f64,
    /// `|||v||| = b_s(v, v)^{1/2}`, the β-weighted version.
    pub energy: f64,
}

/// Evaluates both norms pointwise by quadrature, independently of the
/// assembled matrix.
pub fn weak_norms(space: &WeakSpace, v: &[f64], spec: &ProblemSpec) -> Result<WeakNorms> {
    let parts: Vec<[f64; 3]> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let beta = spec.beta(space.mesh.elements[e].region)?;
            let local = space.gather(e, v);
            let grad = &space.gradients[e];
            let gw = space.operators[e].apply(&local);
            let rule = space.fan_rule(e, 2 * space.gradient_degree + 2)?;
            let grad_sq: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| w * grad.eval_field(&gw, p).norm_squared())
                .sum();

            let cell = &space.cells[e];
            let u0 = &local[..cell.dim()];
            let mut offset = cell.dim();
            let mut stab = 0.0;
            for le in &space.mesh.elements[e].edges {
                let basis = &space.edges[le.edge];
                let ub = &local[offset..offset + basis.dim()];
                let q = edge_rule_for_degree(&space.mesh.edges[le.edge], 2 * space.k + 2);
                for (p, w) in q.points.iter().zip(&q.weights) {
                    stab +=
                        w * (cell.eval_combination(u0, p) - basis.eval_combination(ub, p)).powi(2);
                }
                offset += basis.dim();
            }
            stab /= space.geometry[e].diameter;
            Ok([grad_sq + stab, beta * grad_sq + stab, 0.0])
        })
        .collect::<Result<_>>()?;
    let (mut semi, mut energy) = (0.0, 0.0);
    for p in parts {
        semi += p[0];
        energy += p[1];
    }
    Ok(WeakNorms {
        seminorm: semi.sqrt(),
        energy: energy.sqrt(),
    })
}

/// Observed orders between consecutive levels; `None` where an error is
/// zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservedOrders {
    pub grad_weak: Vec<Option<f64>>,
    pub grad_interior: Vec<Option<f64>>,
    pub l2: Vec<Option<f64>>,
}

fn eoc(e0: f64, e1: f64, h0: f64, h1: f64) -> Option<f64> {
    (e0 > 0.0 && e1 > 0.0).then(|| (e0 / e1).ln() / (h0 / h1).ln())
}

pub fn observed_orders(reports: &[ErrorReport]) -> Result<ObservedOrders> {
    if reports.len() < 2 {
        return Err(WgError::Sequence("at least two levels are needed".into()));
    }
    let mut out = ObservedOrders::default();
    for (i, w) in reports.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        if !(b.h < a.h) {
            return Err(WgError::Sequence(format!(
                "mesh size does not decrease between levels {i} and {} ({} then {})",
                i + 1,
                a.h,
                b.h
            )));
        }
        out.grad_weak
            .push(eoc(a.e_grad_weak, b.e_grad_weak, a.h, b.h));
        out.grad_interior
            .push(eoc(a.e_grad_interior, b.e_grad_interior, a.h, b.h));
        out.l2.push(eoc(a.e_l2, b.e_l2, a.h, b.h));
    }
    Ok(out)
}

/// `∫_D ∇m_i·∇m_j` over the cell monomials, from exact moments.
fn cell_gradient_gram(space: &WeakSpace, element: usize) -> DMatrix<f64> {
    let cell = &space.cells[element];
    let n = cell.dim();
    let h2 = cell.scale * cell.scale;
    DMatrix::from_fn(n, n, |i, j| {
        let (ai, bi) = cell.exponents[i];
        let (aj, bj) = cell.exponents[j];
        let mut v = 0.0;
        if ai > 0 && aj > 0 {
            v += (ai * aj) as f64 * cell.moment(ai + aj - 2, bi + bj);
        }
        if bi > 0 && bj > 0 {
            v += (bi * bj) as f64 * cell.moment(ai + aj, bi + bj - 2);
        }
        v / h2
    })
}

/// Largest observed ratio
/// `‖∇v₀‖²_D / (‖∇_w v‖²_D + h_D⁻¹‖v_b − v₀‖²_∂D)` over `samples` random
/// local weak functions on every element.
pub fn k_bound_ratio(space: &WeakSpace, samples: usize, seed: u64) -> f64 {
    let ratios: Vec<f64> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let lhs = cell_gradient_gram(space, e);
            let rhs = local_stiffness(space, e, 1.0) + local_stabilization(space, e);
            let n0 = lhs.nrows();
            let n = rhs.nrows();
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (e as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut worst: f64 = 0.0;
            for _ in 0..samples {
                let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                let v0 = v.rows(0, n0);
                let num = (v0.transpose() * &lhs * v0)[(0, 0)];
                let den = (v.transpose() * &rhs * &v)[(0, 0)];
                if den > 0.0 {
                    worst = worst.max(num / den);
                }
            }
            worst
        })
        .collect();
    ratios.into_iter().fold(0.0, f64::max)
}

/// Exact `sup` of the ratio in [`k_bound_ratio`] over all local weak
/// functions that are not constant, from a generalized eigenproblem on each
/// element.
pub fn k_bound_sup(space: &WeakSpace) -> f64 {
    let sups: Vec<f64> = (0..space.mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let lhs = cell_gradient_gram(space, e);
            let rhs = local_stiffness(space, e, 1.0) + local_stabilization(space, e);
            let n0 = lhs.nrows();
            let n = rhs.nrows();
            let eig = nalgebra::SymmetricEigen::new(rhs);
            let max = eig.eigenvalues.max();
            let keep: Vec<usize> = (0..n)
                .filter(|&i| eig.eigenvalues[i] > 1e-12 * max)
                .collect();
            // W = Q Λ^{-1/2} on the range of the right-hand side
            let w = DMatrix::from_fn(n, keep.len(), |r, c| {
                eig.eigenvectors[(r, keep[c])] / eig.eigenvalues[keep[c]].sqrt()
            });
            let w0 = w.rows(0, n0);
            let reduced = w0.transpose() * &lhs * w0;
            nalgebra::SymmetricEigen::new(reduced).eigenvalues.max()
        })
        .collect();
    sups.into_iter().fold(0.0, f64::max)
}

/// Estimate of `sup ‖v₀‖_{L²(Ω)} / |v|_{k−1,w}` over `V_h⁰`, by inverse
/// power iteration `v ← A⁻¹ M v` from `starts` random starting vectors. `M`
/// is the cell mass matrix and `A` the stabilized stiffness, both on free
/// dofs.
pub fn poincare_ratio(
    space: &WeakSpace,
    starts: usize,
    iterations: usize,
    seed: u64,
) -> Result<f64> {
    let spec = ProblemSpec::poisson(Arc::new(|_| 0.0));
    let (full, _) = assemble_system(space, &spec)?;
    let dofs = &space.dofs;
    let a = full.submatrix(&dofs.free_dofs, &dofs.free_index, dofs.num_free());
    let mut coo = CooMatrix::new(dofs.total(), dofs.total());
    for (e, cell) in space.cells.iter().enumerate() {
        coo.add_block(&dofs.cell_range(e).collect::<Vec<_>>(), &cell.mass);
    }
    let m = coo
        .to_csr()
        .submatrix(&dofs.free_dofs, &dofs.free_index, dofs.num_free());
    let n = a.nrows;
    if n == 0 {
        return Ok(0.0);
    }
    let opts = SolveOptions {
        rel_tol: 1e-10,
        max_iter: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..starts {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut ratio = 0.0;
        for _ in 0..iterations {
            let mv = m.mul_vec(&v);
            if mv.iter().all(|&x| x == 0.0) {
                break;
            }
            let (w, _) = solve_spd(&a, &mv, opts)?;
            let scale = dot(&w, &w).sqrt();
            v = w.into_iter().map(|x| x / scale).collect();
            let next = (m.quadratic_form(&v) / a.quadratic_form(&v)).sqrt();
            let settled = (next - ratio).abs() <= 1e-8 * next;
            ratio = next;
            if settled {
                break;
            }
        }
        best = best.max(ratio);
    }
    Ok(best)
}

/// Residuals of the projection identity
/// `(∇_w Q_h ξ, q) = (Q^∇∇ξ, q) + ⟨Qᵇξ − ξ, q·n⟩_∂D` over all gradient
/// test fields `q`, and of the straight-edge statement
/// `⟨Qᵇξ − ξ, q·n⟩_e = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityResiduals {
    /// Largest residual relative to the largest of the three terms.
    pub identity: f64,
    /// Largest edge term relative to `max_q ∫_e |ξ q|`, for elements whose
    /// edges are all straight.
    pub straight_edges: Option<f64>,
}

/// `xi` holds coefficients of a polynomial of degree `k + 1` in the
/// element's own scaled monomials, in graded-lex order.
pub fn identity_residuals(
    space: &WeakSpace,
    element: usize,
    xi: &[f64],
) -> Result<IdentityResiduals> {
    let cell = &space.cells[element];
    let grad = &space.gradients[element];
    let k = space.k;
    let exps = monomial_exponents(k + 1);
    assert_eq!(xi.len(), exps.len(), "ξ must have degree k + 1");
    let h = cell.scale;
    let xi_at = |p: &Vec2| {
        let s = cell.scaled(p);
        exps.iter()
            .zip(xi)
            .map(|(&(a, b), c)| c * s.x.powi(a as i32) * s.y.powi(b as i32))
            .sum::<f64>()
    };

    // Q_h ξ on the element
    let mut local = crate::weakgrad::project_cell_polynomial(cell, &exps, xi)?;
    let mut edge_coeffs = Vec::new();
    for le in &space.mesh.elements[element].edges {
        let c = project_edge(&space.edges[le.edge], &space.mesh.edges[le.edge], xi_at);
        local.extend_from_slice(&c);
        edge_coeffs.push(c);
    }
    let gw = DVector::from_vec(space.operators[element].apply(&local));
    let lhs = &grad.mass * gw;

    // (∇ξ, q) from exact moments
    let ng = grad.scalar_dim();
    let mut grad_term = DVector::zeros(2 * ng);
    for (j, &(aj, bj)) in grad.exponents.iter().enumerate() {
        for (&(a, b), c) in exps.iter().zip(xi) {
            if a > 0 {
                grad_term[j] += c * a as f64 / h * cell.moment(a - 1 + aj, b + bj);
            }
            if b > 0 {
                grad_term[ng + j] += c * b as f64 / h * cell.moment(a + aj, b - 1 + bj);
            }
        }
    }

    let mut bnd = DVector::zeros(2 * ng);
    let mut straight = true;
    let mut remark: f64 = 0.0;
    for (le, c) in space.mesh.elements[element].edges.iter().zip(&edge_coeffs) {
        let edge = &space.mesh.edges[le.edge];
        straight &= edge.is_straight();
        let basis = &space.edges[le.edge];
        let q = edge_rule_for_degree(edge, 2 * k + 4);
        let mut on_edge = DVector::zeros(2 * ng);
        let mut size: DVector<f64> = DVector::zeros(2 * ng);
        for i in 0..q.len() {
            let p = &q.points[i];
            let n = q.normals[i] * le.dir.sign();
            let xv = xi_at(p);
            let diff = basis.eval_combination(c, p) - xv;
            for (j, m) in grad.scalar_values(p).into_iter().enumerate() {
                on_edge[j] += q.weights[i] * diff * m * n.x;
                on_edge[ng + j] += q.weights[i] * diff * m * n.y;
                size[j] += q.weights[i] * (xv * m).abs();
                size[ng + j] += q.weights[i] * (xv * m).abs();
            }
        }
        let size = size.amax();
        if size > 0.0 {
            remark = remark.max(on_edge.amax() / size);
        }
        bnd += on_edge;
    }

    let scale = lhs.amax().max(grad_term.amax()).max(bnd.amax());
    let residual = (&lhs - &grad_term - &bnd).amax();
    let identity = if scale > 0.0 {
        residual / scale
    } else {
        residual
    };
    Ok(IdentityResiduals {
        identity,
        straight_edges: straight.then_some(remark),
    })
}
