//! Edge rules, exact monomial moments over curved elements, and a fan rule
//! for integrands that are not polynomial.
//!
//! Moments use the divergence theorem,
//! `∫_D X^a Y^b dx = s/(a+1) ∮ X^{a+1} Y^b n_x ds` with scaled coordinates
//! `X = (x - c_x)/s`, `Y = (y - c_y)/s`. Since `n_x ds = ±y'(t) dt`, the
//! boundary integrand is a polynomial in `t` for segments and polynomial
//! curves, so Gauss–Legendre integrates it exactly.

use std::f64::consts::PI;

use crate::error::{Result, WgError};
use crate::geometry::{cross, Curve, CurvedPolygonMesh, Orientation, ParametricEdge, Vec2};

/// Gauss–Legendre nodes and weights on [0, 1], ascending nodes.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Polynomial order in the edge parameter needed to integrate a degree-`d`
/// polynomial in `(x, y)` along the curve, Jacobian factors included.
/// For arcs the integrand is trigonometric and the order carries a margin
/// proportional to the angular frequency.
pub fn parameter_order(curve: &Curve, d: usize) -> usize {
    match curve {
        Curve::Segment { .. } => d,
        Curve::Polynomial { .. } => {
            let p = curve.polynomial_degree().unwrap_or(1);
            if curve.is_straight() && p == 1 {
                d
            } else {
                d * p + 2 * p
            }
        }
        Curve::Arc { .. } => {
            let span = curve.arc_span();
            d + 2 * ((d as f64 + 2.0) * span).ceil() as usize + 8
        }
    }
}

/// Quadrature along one edge in its own parametrization.
#[derive(Clone, Debug)]
pub struct EdgeQuadrature {
    pub t: Vec<f64>,
    pub points: Vec<Vec2>,
    /// Arclength weights, `gauss_weight · speed(t)`.
    pub weights: Vec<f64>,
    /// Unit normals for a `Forward` traversal; negate for `Reverse`.
    pub normals: Vec<Vec2>,
}

impl EdgeQuadrature {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss–Legendre rule with `⌈(order+1)/2⌉ + 2` nodes mapped through the
/// parametrization.
pub fn edge_rule(edge: &ParametricEdge, order: usize) -> EdgeQuadrature {
    rule_with_nodes(edge, (order + 1).div_ceil(2) + 2)
}

fn rule_with_nodes(edge: &ParametricEdge, n: usize) -> EdgeQuadrature {
    let (ts, ws) = gauss_legendre(n);
    let mut q = EdgeQuadrature {
        t: ts.clone(),
        points: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
    };
    for (t, w) in ts.into_iter().zip(ws) {
        let d = edge.curve.derivative(t);
        let speed = d.norm();
        q.points.push(edge.curve.eval(t));
        q.weights.push(w * speed);
        q.normals.push(if speed > 0.0 {
            Vec2::new(d.y, -d.x) / speed
        } else {
            Vec2::zeros()
        });
    }
    q
}

/// Edge rule accurate to roundoff for `∫_e p ds` with `p` of total degree
/// `d` in `(x, y)`.
pub fn edge_rule_for_degree(edge: &ParametricEdge, d: usize) -> EdgeQuadrature {
    let mut order = parameter_order(&edge.curve, d);
    if matches!(edge.curve, Curve::Polynomial { .. }) && !edge.curve.is_straight() {
        // The speed is not polynomial on a genuinely curved polynomial edge.
        order += 16;
    }
    edge_rule(edge, order)
}

pub fn edge_length(edge: &ParametricEdge) -> f64 {
    match &edge.curve {
        Curve::Segment { start, end } => (end - start).norm(),
        Curve::Arc { radius, .. } => radius * edge.curve.arc_span(),
        Curve::Polynomial { .. } => edge_rule_for_degree(edge, 0).length(),
    }
}

/// `∫_D X^a Y^b dx` for all `a + b ≤ max_degree`, graded layout.
#[derive(Clone, Debug)]
pub struct MomentTable {
    pub element: usize,
    pub max_degree: usize,
    pub center: Vec2,
    pub scale: f64,
    values: Vec<f64>,
}

#[inline]
fn moment_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

impl MomentTable {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        assert!(
            a + b <= self.max_degree,
            "moment ({a},{b}) beyond table degree {}",
            self.max_degree
        );
        self.values[moment_index(a, b)]
    }

    pub fn area(&self) -> f64 {
        self.values[0]
    }

    fn zeros(element: usize, max_degree: usize, center: Vec2, scale: f64) -> Self {
        let len = (max_degree + 1) * (max_degree + 2) / 2;
        Self {
            element,
            max_degree,
            center,
            scale,
            values: vec![0.0; len],
        }
    }
}

/// Adds one oriented edge's divergence-theorem contribution to `table`.
fn accumulate_edge_moments(
    table: &mut MomentTable,
    edge: &ParametricEdge,
    dir: Orientation,
    order: usize,
) {
    let q = edge_rule(edge, order);
    let m = table.max_degree;
    let mut xpow = vec![0.0; m + 2];
    let mut ypow = vec![0.0; m + 1];
    for i in 0..q.len() {
        let nx_ds = q.normals[i].x * dir.sign() * q.weights[i];
        let p = (q.points[i] - table.center) / table.scale;
        xpow[0] = 1.0;
        ypow[0] = 1.0;
        for j in 1..m + 2 {
            xpow[j] = xpow[j - 1] * p.x;
        }
        for j in 1..m + 1 {
            ypow[j] = ypow[j - 1] * p.y;
        }
        for d in 0..=m {
            for (b, yb) in ypow.iter().enumerate().take(d + 1) {
                let a = d - b;
                table.values[moment_index(a, b)] +=
                    table.scale / (a as f64 + 1.0) * xpow[a + 1] * yb * nx_ds;
            }
        }
    }
}

/// Exact (to roundoff) monomial moments in the coordinates
/// `((x - center)/scale, (y - center)/scale)`.
pub fn monomial_moments(
    mesh: &CurvedPolygonMesh,
    element: usize,
    center: Vec2,
    scale: f64,
    max_degree: usize,
) -> Result<MomentTable> {
    let el = &mesh.elements[element];
    let mut table = MomentTable::zeros(element, max_degree, center, scale);
    let m = max_degree;
    let mut arcs = Vec::new();
    for le in &el.edges {
        let edge = &mesh.edges[le.edge];
        match edge.curve.polynomial_degree() {
            Some(p) => accumulate_edge_moments(&mut table, edge, le.dir, m + 1 + p * (m + 2)),
            None => arcs.push((edge, le.dir)),
        }
    }
    if arcs.is_empty() {
        return Ok(table);
    }

    let straight = table.values.clone();
    let with_arcs = |order: usize| {
        let mut t = table.clone();
        t.values.copy_from_slice(&straight);
        for (edge, dir) in &arcs {
            accumulate_edge_moments(&mut t, edge, *dir, order);
        }
        t
    };
    let mut order = arcs
        .iter()
        .map(|(e, _)| parameter_order(&e.curve, m + 2))
        .max()
        .unwrap_or(m + 2);
    let mut prev = with_arcs(order);
    for _ in 0..8 {
        order *= 2;
        let next = with_arcs(order);
        let floor = next.values[0].abs();
        let agreed = prev
            .values
            .iter()
            .zip(&next.values)
            .all(|(a, b)| (a - b).abs() <= 1e-13 * b.abs().max(floor));
        if agreed {
            return Ok(next);
        }
        prev = next;
    }
    Err(WgError::QuadratureConvergence(element))
}

#[derive(Clone, Debug, Default)]
pub struct InteriorQuadrature {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl InteriorQuadrature {
    pub fn integrate(&self, f: impl Fn(&Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Fan rule: one curved triangle per boundary edge with apex at the star
/// center, mapped by `x(s, τ) = c + s (γ(τ) − c)` and integrated with a
/// tensor Gauss rule. Exact for polynomials of degree `order` on elements
/// with straight or polynomial edges.
pub fn interior_rule(
    mesh: &CurvedPolygonMesh,
    element: usize,
    star_center: Vec2,
    order: usize,
) -> Result<InteriorQuadrature> {
    let (sn, sw) = gauss_legendre((order + 2).div_ceil(2));
    let mut q = InteriorQuadrature::default();
    for le in &mesh.elements[element].edges {
        let edge = &mesh.edges[le.edge];
        let t_order = match &edge.curve {
            Curve::Segment { .. } => order,
            // Jacobian cross(γ − c, γ') adds degree 2p − 1 for polynomial curves.
            _ => parameter_order(&edge.curve, order) + 1,
        };
        let (tn, tw) = gauss_legendre((t_order + 1).div_ceil(2) + 1);
        for (tau, wt) in tn.iter().zip(&tw) {
            let t = le.dir.edge_parameter(*tau);
            let g = edge.curve.eval(t);
            let dg = edge.curve.derivative(t) * le.dir.sign();
            let base = cross(&(g - star_center), &dg);
            for (s, ws) in sn.iter().zip(&sw) {
                let jac = s * base;
                if !(jac > 0.0) {
                    return Err(WgError::FanDegeneracy(element));
                }
                q.points.push(star_center + (g - star_center) * *s);
                q.weights.push(ws * wt * jac);
            }
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EdgeTag, Element, LoopEdge};
    use std::f64::consts::FRAC_PI_2;

    fn polygon(pts: &[(f64, f64)]) -> CurvedPolygonMesh {
        let v: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let n = v.len();
        let edges = (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                ParametricEdge::new([i, j], Curve::segment(v[i], v[j]), EdgeTag::Boundary)
            })
            .collect();
        let lp = (0..n)
            .map(|i| LoopEdge {
                edge: i,
                dir: Orientation::Forward,
            })
            .collect();
        CurvedPolygonMesh::new(v, edges, vec![Element::new(lp, 0)])
    }

    fn disc() -> CurvedPolygonMesh {
        let v: Vec<Vec2> = (0..4)
            .map(|i| Vec2::new((i as f64 * FRAC_PI_2).cos(), (i as f64 * FRAC_PI_2).sin()))
            .collect();
        let edges = (0..4)
            .map(|i| {
                let a = i as f64 * FRAC_PI_2;
                ParametricEdge::new(
                    [i, (i + 1) % 4],
                    Curve::arc(Vec2::zeros(), 1.0, a, a + FRAC_PI_2).unwrap(),
                    EdgeTag::Boundary,
                )
            })
            .collect();
        let lp = (0..4)
            .map(|i| LoopEdge {
                edge: i,
                dir: Orientation::Forward,
            })
            .collect();
        CurvedPolygonMesh::new(v, edges, vec![Element::new(lp, 0)])
    }

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..40 {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn edge_rule_examples() {
        let e = ParametricEdge::new(
            [0, 1],
            Curve::segment(Vec2::zeros(), Vec2::new(1.0, 0.0)),
            EdgeTag::Boundary,
        );
        for order in 1..6 {
            let q = edge_rule(&e, order);
            assert!((q.length() - 1.0).abs() < 1e-15);
            assert!((q.integrate(|p| p.x) - 0.5).abs() < 1e-15);
        }
        let arc = ParametricEdge::new(
            [0, 1],
            Curve::arc(Vec2::zeros(), 1.0, 0.0, FRAC_PI_2).unwrap(),
            EdgeTag::Boundary,
        );
        assert!((edge_rule(&arc, 1).length() - FRAC_PI_2).abs() < 1e-12);
        assert!(edge_rule(&arc, 1).weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn moment_examples() {
        let sq = polygon(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let m = monomial_moments(&sq, 0, Vec2::zeros(), 1.0, 2).unwrap();
        assert!((m.get(1, 0) - 0.5).abs() < 1e-15);
        assert!((m.get(1, 1) - 0.25).abs() < 1e-15);
        let tri = polygon(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let m = monomial_moments(&tri, 0, Vec2::zeros(), 1.0, 1).unwrap();
        assert!((m.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((m.get(1, 0) - 1.0 / 6.0).abs() < 1e-15);
        let m = monomial_moments(&disc(), 0, Vec2::zeros(), 1.0, 4).unwrap();
        assert!((m.get(0, 0) - PI).abs() < 1e-10);
        assert!((m.get(2, 0) - PI / 4.0).abs() < 1e-10);
        // polar closed forms: ∫ x^4 = π/8, ∫ x²y² = π/24
        assert!((m.get(4, 0) - PI / 8.0).abs() < 1e-10);
        assert!((m.get(2, 2) - PI / 24.0).abs() < 1e-10);
        assert!(m.get(1, 0).abs() < 1e-14 && m.get(1, 1).abs() < 1e-14);
    }

    #[test]
    fn fan_rule_examples() {
        let sq = polygon(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let c = Vec2::new(0.5, 0.5);
        let q = interior_rule(&sq, 0, c, 2).unwrap();
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(q.weights.iter().all(|&w| w >= 0.0));
        let q = interior_rule(&sq, 0, c, 4).unwrap();
        assert!((q.integrate(|p| p.x * p.x * p.y * p.y) - 1.0 / 9.0).abs() < 1e-12);
        let q = interior_rule(&disc(), 0, Vec2::zeros(), 8).unwrap();
        assert!((q.integrate(|p| 1.0 - p.x * p.x - p.y * p.y) - FRAC_PI_2).abs() < 1e-8);
    }

    #[test]
    fn fan_outside_kernel_is_degenerate() {
        let sq = polygon(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert!(matches!(
            interior_rule(&sq, 0, Vec2::new(2.0, 0.5), 2),
            Err(WgError::FanDegeneracy(0))
        ));
    }
}
