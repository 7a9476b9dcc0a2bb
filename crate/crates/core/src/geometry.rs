//! Curvilinear polygonal meshes and their shape-regularity audit.
//!
//! Elements are counter-clockwise loops of parametrized edges. Each edge is
//! stored once; an element references it with a direction flag telling
//! whether the loop runs along the parametrization (`Forward`) or against it.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::Vector2;

use crate::error::{Result, WgError};
use crate::quadrature;

pub type Vec2 = Vector2<f64>;

/// Number of uniform parameter samples used for the per-edge injectivity
/// and speed checks.
pub const EDGE_CHECK_SAMPLES: usize = 64;

/// Samples per curved edge when a loop is flattened to a polyline.
const CURVE_POLYLINE_SAMPLES: usize = 32;

/// Grid resolution (per axis) of the inscribed-disc search.
const STAR_GRID: usize = 32;
const FINE_POLYLINE_SAMPLES: usize = 256;

const MAX_CURVE_DEGREE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeTag {
    Interior,
    Boundary,
    Interface,
}

impl EdgeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeTag::Interior => "interior",
            EdgeTag::Boundary => "boundary",
            EdgeTag::Interface => "interface",
        }
    }
}

/// How an element loop traverses an edge relative to its parametrization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Forward,
    Reverse,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Forward => 1.0,
            Orientation::Reverse => -1.0,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Orientation::Forward),
            -1 => Some(Orientation::Reverse),
            _ => None,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Orientation::Forward => Orientation::Reverse,
            Orientation::Reverse => Orientation::Forward,
        }
    }

    /// Maps a traversal parameter to the edge parameter.
    #[inline]
    pub fn edge_parameter(self, s: f64) -> f64 {
        match self {
            Orientation::Forward => s,
            Orientation::Reverse => 1.0 - s,
        }
    }
}

/// Geometry of an edge on t in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub enum Curve {
    Segment {
        start: Vec2,
        end: Vec2,
    },
    /// `center + radius (cos θ, sin θ)` with θ running linearly from
    /// `start_angle` to `end_angle`.
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
    /// `x(t) = Σ x[i] t^i`, `y(t) = Σ y[i] t^i`, degree at most 4.
    Polynomial {
        x: Vec<f64>,
        y: Vec<f64>,
    },
}

impl Curve {
    pub fn segment(start: Vec2, end: Vec2) -> Self {
        Curve::Segment { start, end }
    }

    pub fn arc(center: Vec2, radius: f64, start_angle: f64, end_angle: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(WgError::InvalidCurve(format!(
                "arc radius {radius} must be positive"
            )));
        }
        if start_angle == end_angle || !start_angle.is_finite() || !end_angle.is_finite() {
            return Err(WgError::InvalidCurve(
                "arc must span a nonzero angle".into(),
            ));
        }
        Ok(Curve::Arc {
            center,
            radius,
            start_angle,
            end_angle,
        })
    }

    pub fn polynomial(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || y.is_empty() {
            return Err(WgError::InvalidCurve(
                "empty polynomial coefficient list".into(),
            ));
        }
        if x.len() > MAX_CURVE_DEGREE + 1 || y.len() > MAX_CURVE_DEGREE + 1 {
            return Err(WgError::InvalidCurve(format!(
                "polynomial curves are limited to degree {MAX_CURVE_DEGREE}"
            )));
        }
        Ok(Curve::Polynomial { x, y })
    }

    #[inline]
    pub fn eval(&self, t: f64) -> Vec2 {
        match self {
            Curve::Segment { start, end } => start + (end - start) * t,
            Curve::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => {
                let theta = start_angle + (end_angle - start_angle) * t;
                center + Vec2::new(theta.cos(), theta.sin()) * *radius
            }
            Curve::Polynomial { x, y } => Vec2::new(horner(x, t), horner(y, t)),
        }
    }

    /// d/dt of the parametrization.
    #[inline]
    pub fn derivative(&self, t: f64) -> Vec2 {
        match self {
            Curve::Segment { start, end } => end - start,
            Curve::Arc {
                radius,
                start_angle,
                end_angle,
                ..
            } => {
                let span = end_angle - start_angle;
                let theta = start_angle + span * t;
                Vec2::new(-theta.sin(), theta.cos()) * (radius * span)
            }
            Curve::Polynomial { x, y } => {
                Vec2::new(horner_derivative(x, t), horner_derivative(y, t))
            }
        }
    }

    /// Polynomial degree of the parametrization, `None` for arcs.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Curve::Segment { .. } => Some(1),
            Curve::Arc { .. } => None,
            Curve::Polynomial { x, y } => {
                let deg = |c: &[f64]| c.iter().rposition(|&v| v != 0.0).unwrap_or(0);
                Some(deg(x).max(deg(y)).max(1))
            }
        }
    }

    /// Absolute angle swept by an arc, zero otherwise.
    pub fn arc_span(&self) -> f64 {
        match self {
            Curve::Arc {
                start_angle,
                end_angle,
                ..
            } => (end_angle - start_angle).abs(),
            _ => 0.0,
        }
    }

    /// True when the image lies on a straight line.
    pub fn is_straight(&self) -> bool {
        match self {
            Curve::Segment { .. } => true,
            Curve::Arc { .. } => false,
            Curve::Polynomial { x, y } => {
                let n = x.len().max(y.len());
                let coef = |c: &[f64], i: usize| c.get(i).copied().unwrap_or(0.0);
                let dirs: Vec<Vec2> = (1..n).map(|i| Vec2::new(coef(x, i), coef(y, i))).collect();
                let scale = dirs.iter().map(|d| d.norm()).fold(0.0, f64::max);
                let Some(lead) = dirs.iter().find(|d| d.norm() > 1e-14 * scale) else {
                    return true;
                };
                dirs.iter()
                    .all(|d| cross(lead, d).abs() <= 1e-13 * scale * scale)
            }
        }
    }
}

#[inline]
fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

#[inline]
fn horner_derivative(c: &[f64], t: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &a)| acc * t + i as f64 * a)
}

#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricEdge {
    pub vertices: [usize; 2],
    pub curve: Curve,
    pub tag: EdgeTag,
}

impl ParametricEdge {
    pub fn new(vertices: [usize; 2], curve: Curve, tag: EdgeTag) -> Self {
        Self {
            vertices,
            curve,
            tag,
        }
    }

    pub fn point(&self, t: f64) -> Result<Vec2> {
        check_parameter(t)?;
        Ok(self.curve.eval(t))
    }

    /// Unit normal at `t` pointing out of the element that traverses the
    /// edge with the given orientation (tangent rotated by −90°).
    pub fn normal(&self, t: f64, orientation: Orientation) -> Result<Vec2> {
        check_parameter(t)?;
        let d = self.curve.derivative(t);
        let speed = d.norm();
        if !(speed > 0.0) {
            return Err(WgError::DegenerateParametrization(t));
        }
        Ok(Vec2::new(d.y, -d.x) * (orientation.sign() / speed))
    }

    #[inline]
    pub fn speed(&self, t: f64) -> f64 {
        self.curve.derivative(t).norm()
    }

    pub fn start(&self) -> Vec2 {
        self.curve.eval(0.0)
    }

    pub fn end(&self) -> Vec2 {
        self.curve.eval(1.0)
    }

    pub fn is_straight(&self) -> bool {
        self.curve.is_straight()
    }

    pub fn length(&self) -> f64 {
        quadrature::edge_length(self)
    }

    /// `n` points at uniform parameters `j / (n - 1)`.
    pub fn samples(&self, n: usize) -> Vec<Vec2> {
        let denom = (n.max(2) - 1) as f64;
        (0..n).map(|j| self.curve.eval(j as f64 / denom)).collect()
    }
}

fn check_parameter(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(WgError::Domain(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoopEdge {
    pub edge: usize,
    pub dir: Orientation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub edges: Vec<LoopEdge>,
    /// Diffusion region: 1 or 2 for interface problems, 0 otherwise.
    pub region: i32,
}

impl Element {
    pub fn new(edges: Vec<LoopEdge>, region: i32) -> Self {
        Self { edges, region }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurvedPolygonMesh {
    pub vertices: Vec<Vec2>,
    pub edges: Vec<ParametricEdge>,
    pub elements: Vec<Element>,
}

impl CurvedPolygonMesh {
    pub fn new(vertices: Vec<Vec2>, edges: Vec<ParametricEdge>, elements: Vec<Element>) -> Self {
        Self {
            vertices,
            edges,
            elements,
        }
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Largest absolute vertex coordinate, floored at 1.
    pub fn coordinate_scale(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(1.0, f64::max)
    }

    /// For every edge, the `(element, orientation)` pairs referencing it,
    /// in element order.
    pub fn edge_uses(&self) -> Vec<Vec<(usize, Orientation)>> {
        let mut uses = vec![Vec::new(); self.edges.len()];
        for (e, el) in self.elements.iter().enumerate() {
            for le in &el.edges {
                if let Some(u) = uses.get_mut(le.edge) {
                    u.push((e, le.dir));
                }
            }
        }
        uses
    }

    /// Closed polyline approximating the element boundary in loop order.
    /// Straight edges contribute their traversal start point only, curved
    /// edges `samples_per_curve` points.
    pub fn boundary_polyline(&self, element: usize, samples_per_curve: usize) -> Vec<Vec2> {
        let mut pts = Vec::new();
        for le in &self.elements[element].edges {
            let edge = &self.edges[le.edge];
            if edge.is_straight() {
                pts.push(edge.curve.eval(le.dir.edge_parameter(0.0)));
            } else {
                for j in 0..samples_per_curve {
                    let s = j as f64 / samples_per_curve as f64;
                    pts.push(edge.curve.eval(le.dir.edge_parameter(s)));
                }
            }
        }
        pts
    }

    /// Maximum element diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| element_diameter(self, e))
            .fold(0.0, f64::max)
    }
}

/// Shape-regularity data of one element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementGeometry {
    /// Center of the inscribed disc the element is star shaped about.
    pub star_center: Vec2,
    /// Inscribed-disc radius over diameter.
    pub rho: f64,
    pub diameter: f64,
    pub area: f64,
    pub orientation: i8,
}

impl ElementGeometry {
    pub fn inscribed_radius(&self) -> f64 {
        self.rho * self.diameter
    }
}

fn element_diameter(mesh: &CurvedPolygonMesh, element: usize) -> f64 {
    let pts = mesh.boundary_polyline(element, CURVE_POLYLINE_SAMPLES);
    let mut d2: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d2 = d2.max((pts[i] - pts[j]).norm_squared());
        }
    }
    d2.sqrt()
}

pub fn element_metrics(mesh: &CurvedPolygonMesh, element: usize) -> Result<ElementGeometry> {
    let el = mesh
        .elements
        .get(element)
        .ok_or_else(|| WgError::DegenerateElement {
            element,
            reason: "no such element".into(),
        })?;
    if el.edges.is_empty() {
        return Err(WgError::DegenerateElement {
            element,
            reason: "empty edge loop".into(),
        });
    }
    let diameter = element_diameter(mesh, element);
    if !(diameter > 0.0) {
        return Err(WgError::DegenerateElement {
            element,
            reason: "zero diameter".into(),
        });
    }
    let area = quadrature::monomial_moments(mesh, element, Vec2::zeros(), 1.0, 0)?.get(0, 0);
    if !(area > 0.0) {
        return Err(WgError::DegenerateElement {
            element,
            reason: format!("nonpositive area {area:e} (loop must be counter-clockwise)"),
        });
    }
    let poly = mesh.boundary_polyline(element, CURVE_POLYLINE_SAMPLES);
    let (star_center, _) = inscribed_disc(&poly).ok_or(WgError::NotStarShaped(element))?;
    let fine = mesh.boundary_polyline(element, FINE_POLYLINE_SAMPLES);
    let radius = kernel_clearance(&fine, &star_center).ok_or(WgError::NotStarShaped(element))?
        - chord_deviation(mesh, element, FINE_POLYLINE_SAMPLES);
    if !(radius > 0.0) {
        return Err(WgError::NotStarShaped(element));
    }
    Ok(ElementGeometry {
        star_center,
        rho: radius / diameter,
        diameter,
        area,
        orientation: 1,
    })
}

/// Largest gap between a curved edge and its sampled chords.
fn chord_deviation(mesh: &CurvedPolygonMesh, element: usize, samples: usize) -> f64 {
    let mut dev: f64 = 0.0;
    for le in &mesh.elements[element].edges {
        let curve = &mesh.edges[le.edge].curve;
        if mesh.edges[le.edge].is_straight() {
            continue;
        }
        for j in 0..samples {
            let (t0, t1) = (j as f64 / samples as f64, (j + 1) as f64 / samples as f64);
            let (a, b) = (curve.eval(t0), curve.eval(t1));
            for s in [0.25, 0.5, 0.75] {
                let p = curve.eval(t0 + s * (t1 - t0));
                dev = dev.max((p - (a + (b - a) * s)).norm());
            }
        }
    }
    dev
}

/// Distance from `p` to the closed polyline when `p` lies strictly inside
/// its kernel (sees every segment from the left), `None` otherwise.
fn kernel_clearance(poly: &[Vec2], p: &Vec2) -> Option<f64> {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let ab = b - a;
        let len2 = ab.norm_squared();
        if len2 == 0.0 {
            continue;
        }
        if cross(&ab, &(p - a)) <= 0.0 {
            return None;
        }
        let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
        best = best.min((a + ab * s - p).norm());
    }
    (best > 0.0 && best.is_finite()).then_some(best)
}

/// Grid search for the largest disc centered in the polyline's kernel,
/// followed by one local refinement pass around the best candidate.
fn inscribed_disc(poly: &[Vec2]) -> Option<(Vec2, f64)> {
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for p in poly {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let cell = (hi - lo) / STAR_GRID as f64;
    let mut best: Option<(Vec2, f64)> = None;
    let consider = |c: Vec2, best: &mut Option<(Vec2, f64)>| {
        if let Some(r) = kernel_clearance(poly, &c) {
            if best.is_none_or(|(_, br)| r > br) {
                *best = Some((c, r));
            }
        }
    };
    for i in 0..STAR_GRID {
        for j in 0..STAR_GRID {
            let c = lo + Vec2::new((i as f64 + 0.5) * cell.x, (j as f64 + 0.5) * cell.y);
            consider(c, &mut best);
        }
    }
    let (center, _) = best?;
    for i in 0..=STAR_GRID {
        for j in 0..=STAR_GRID {
            let off = Vec2::new(
                (2.0 * i as f64 / STAR_GRID as f64 - 1.0) * cell.x,
                (2.0 * j as f64 / STAR_GRID as f64 - 1.0) * cell.y,
            );
            consider(center + off, &mut best);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    VertexIndex {
        edge: usize,
    },
    EndpointMismatch {
        edge: usize,
        gap: f64,
    },
    NonInjective {
        edge: usize,
    },
    ZeroSpeed {
        edge: usize,
        t: f64,
    },
    EmptyLoop {
        element: usize,
    },
    UnknownEdge {
        element: usize,
        edge: usize,
    },
    OpenLoop {
        element: usize,
        position: usize,
        gap: f64,
    },
    SelfIntersection {
        element: usize,
    },
    UseCount {
        edge: usize,
        tag: EdgeTag,
        count: usize,
    },
    SameOrientation {
        edge: usize,
    },
    InterfaceAlignment {
        edge: usize,
        regions: (i32, i32),
    },
    UntaggedInterface {
        edge: usize,
        regions: (i32, i32),
    },
    Metrics {
        element: usize,
        message: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VertexIndex { edge } => write!(f, "edge {edge}: vertex index out of range"),
            Violation::EndpointMismatch { edge, gap } => {
                write!(f, "edge {edge}: curve endpoints miss their vertices by {gap:e}")
            }
            Violation::NonInjective { edge } => {
                write!(f, "edge {edge}: parametrization revisits a point")
            }
            Violation::ZeroSpeed { edge, t } => write!(f, "edge {edge}: zero speed at t = {t}"),
            Violation::EmptyLoop { element } => write!(f, "element {element}: empty edge loop"),
            Violation::UnknownEdge { element, edge } => {
                write!(f, "element {element}: references missing edge {edge}")
            }
            Violation::OpenLoop { element, position, gap } => write!(
                f,
                "element {element}: loop not closed after position {position} (gap {gap:e})"
            ),
            Violation::SelfIntersection { element } => {
                write!(f, "element {element}: boundary loop self-intersects")
            }
            Violation::UseCount { edge, tag, count } => write!(
                f,
                "edge {edge}: {} edge referenced by {count} element(s)",
                tag.as_str()
            ),
            Violation::SameOrientation { edge } => write!(
                f,
                "edge {edge}: orientation violation, both elements traverse it in the same direction"
            ),
            Violation::InterfaceAlignment { edge, regions } => write!(
                f,
                "edge {edge}: interface-alignment violation, neighbors share region {}",
                regions.0
            ),
            Violation::UntaggedInterface { edge, regions } => write!(
                f,
                "edge {edge}: separates regions {} and {} but is not tagged interface",
                regions.0, regions.1
            ),
            Violation::Metrics { element, message } => write!(f, "element {element}: {message}"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Per-element shape data, `None` where it could not be computed.
    pub metrics: Vec<Option<ElementGeometry>>,
    pub min_rho: f64,
    pub max_rho: f64,
    /// Mesh size, the maximum element diameter.
    pub h: f64,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_mesh(mesh: &CurvedPolygonMesh) -> ValidationReport {
    let mut violations = Vec::new();
    let tol = 1e-12 * mesh.coordinate_scale();

    for (i, edge) in mesh.edges.iter().enumerate() {
        check_edge(mesh, i, edge, tol, &mut violations);
    }

    let mut loops_ok = vec![true; mesh.elements.len()];
    for (e, el) in mesh.elements.iter().enumerate() {
        if el.edges.is_empty() {
            violations.push(Violation::EmptyLoop { element: e });
            loops_ok[e] = false;
            continue;
        }
        if let Some(le) = el.edges.iter().find(|le| le.edge >= mesh.edges.len()) {
            violations.push(Violation::UnknownEdge {
                element: e,
                edge: le.edge,
            });
            loops_ok[e] = false;
            continue;
        }
        let n = el.edges.len();
        for pos in 0..n {
            let a = &el.edges[pos];
            let b = &el.edges[(pos + 1) % n];
            let end = mesh.edges[a.edge].curve.eval(a.dir.edge_parameter(1.0));
            let start = mesh.edges[b.edge].curve.eval(b.dir.edge_parameter(0.0));
            let gap = (end - start).norm();
            if gap > tol {
                violations.push(Violation::OpenLoop {
                    element: e,
                    position: pos,
                    gap,
                });
                loops_ok[e] = false;
            }
        }
        if loops_ok[e] && polyline_self_intersects(&mesh.boundary_polyline(e, 16)) {
            violations.push(Violation::SelfIntersection { element: e });
            loops_ok[e] = false;
        }
    }

    for (i, uses) in mesh.edge_uses().iter().enumerate() {
        let tag = mesh.edges[i].tag;
        let expected = match tag {
            EdgeTag::Boundary => 1,
            EdgeTag::Interior | EdgeTag::Interface => 2,
        };
        if uses.len() != expected {
            violations.push(Violation::UseCount {
                edge: i,
                tag,
                count: uses.len(),
            });
            continue;
        }
        if expected == 2 {
            let (e0, d0) = uses[0];
            let (e1, d1) = uses[1];
            if d0 == d1 {
                violations.push(Violation::SameOrientation { edge: i });
            }
            let regions = (mesh.elements[e0].region, mesh.elements[e1].region);
            match tag {
                EdgeTag::Interface if regions.0 == regions.1 => {
                    violations.push(Violation::InterfaceAlignment { edge: i, regions })
                }
                EdgeTag::Interior if regions.0 != regions.1 => {
                    violations.push(Violation::UntaggedInterface { edge: i, regions })
                }
                _ => {}
            }
        }
    }

    let mut metrics = Vec::with_capacity(mesh.elements.len());
    for (e, ok) in loops_ok.iter().enumerate() {
        if !ok {
            metrics.push(None);
            continue;
        }
        match element_metrics(mesh, e) {
            Ok(g) => metrics.push(Some(g)),
            Err(err) => {
                violations.push(Violation::Metrics {
                    element: e,
                    message: err.to_string(),
                });
                metrics.push(None);
            }
        }
    }

    let rhos = metrics.iter().flatten().map(|g| g.rho);
    let min_rho = rhos.clone().fold(f64::INFINITY, f64::min);
    let max_rho = rhos.fold(0.0, f64::max);
    let h = metrics
        .iter()
        .flatten()
        .map(|g| g.diameter)
        .fold(0.0, f64::max);
    ValidationReport {
        violations,
        metrics,
        min_rho: if min_rho.is_finite() { min_rho } else { 0.0 },
        max_rho,
        h,
    }
}

fn check_edge(
    mesh: &CurvedPolygonMesh,
    i: usize,
    edge: &ParametricEdge,
    tol: f64,
    out: &mut Vec<Violation>,
) {
    let [a, b] = edge.vertices;
    if a >= mesh.vertices.len() || b >= mesh.vertices.len() {
        out.push(Violation::VertexIndex { edge: i });
    } else {
        let gap = (edge.start() - mesh.vertices[a])
            .norm()
            .max((edge.end() - mesh.vertices[b]).norm());
        if gap > tol {
            out.push(Violation::EndpointMismatch { edge: i, gap });
        }
    }

    let n = EDGE_CHECK_SAMPLES;
    for j in 0..n {
        let t = j as f64 / (n - 1) as f64;
        if !(edge.speed(t) > 0.0) {
            out.push(Violation::ZeroSpeed { edge: i, t });
            return;
        }
    }
    let pts = edge.samples(n);
    let closed = (pts[0] - pts[n - 1]).norm() <= tol;
    let min_sep = 1e-10 * mesh.coordinate_scale();
    for p in 0..n {
        for q in p + 1..n {
            if closed && p == 0 && q == n - 1 {
                continue;
            }
            if (pts[p] - pts[q]).norm() <= min_sep {
                out.push(Violation::NonInjective { edge: i });
                return;
            }
        }
    }
}

fn orient(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    cross(&(b - a), &(c - a))
}

fn segments_cross(p1: &Vec2, p2: &Vec2, q1: &Vec2, q2: &Vec2) -> bool {
    let scale = (p2 - p1).norm().max((q2 - q1).norm());
    let eps = 1e-12 * scale * scale;
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
        && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

fn polyline_self_intersects(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 4 {
        return false;
    }
    for i in 0..n {
        let (a1, a2) = (poly[i], poly[(i + 1) % n]);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(&a1, &a2, &poly[j], &poly[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Regions present in the mesh with their element counts.
pub fn region_census(mesh: &CurvedPolygonMesh) -> BTreeMap<i32, usize> {
    let mut census = BTreeMap::new();
    for el in &mesh.elements {
        *census.entry(el.region).or_insert(0) += 1;
    }
    census
}
