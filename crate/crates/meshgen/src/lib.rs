//! Mesh families used by the tests, the acceptance suite and the examples.
//!
//! Meshes are assembled from vertex loops by [`MeshBuilder`], which shares
//! edges between neighbours and tags them from their use counts.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use wgfem::geometry::{
    validate_mesh, Curve, CurvedPolygonMesh, EdgeTag, Element, LoopEdge, Orientation,
    ParametricEdge, Vec2,
};

/// Collects vertices, optional curved edges and counter-clockwise vertex
/// loops. Edges without a registered curve become segments.
#[derive(Default)]
pub struct MeshBuilder {
    vertices: Vec<Vec2>,
    curves: HashMap<(usize, usize), ([usize; 2], Curve)>,
    loops: Vec<(Vec<usize>, i32)>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl MeshBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(&mut self, p: Vec2) -> usize {
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    pub fn point(&self, v: usize) -> Vec2 {
        self.vertices[v]
    }

    /// Registers the curve between `from` and `to`, parametrized from `from`.
    pub fn curve(&mut self, from: usize, to: usize, curve: Curve) {
        self.curves.insert(key(from, to), ([from, to], curve));
    }

    /// Arc of the circle about `center` from vertex `from` to vertex `to`,
    /// counter-clockwise when `ccw`.
    pub fn arc(&mut self, from: usize, to: usize, center: Vec2, ccw: bool) {
        let (a, b) = (self.vertices[from] - center, self.vertices[to] - center);
        let radius = 0.5 * (a.norm() + b.norm());
        let t0 = a.y.atan2(a.x);
        let mut t1 = b.y.atan2(b.x);
        if ccw {
            while t1 <= t0 {
                t1 += 2.0 * PI;
            }
        } else {
            while t1 >= t0 {
                t1 -= 2.0 * PI;
            }
        }
        self.curve(
            from,
            to,
            Curve::arc(center, radius, t0, t1).expect("valid arc"),
        );
    }

    pub fn element(&mut self, vertices: Vec<usize>, region: i32) {
        self.loops.push((vertices, region));
    }

    /// Edges are numbered in order of first use. Single-use edges are
    /// boundary; shared edges are interface when the regions differ.
    pub fn build(self) -> CurvedPolygonMesh {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<ParametricEdge> = Vec::new();
        let mut regions: Vec<Vec<i32>> = Vec::new();
        let mut elements = Vec::with_capacity(self.loops.len());
        for (vs, region) in &self.loops {
            let mut loop_edges = Vec::with_capacity(vs.len());
            for i in 0..vs.len() {
                let (a, b) = (vs[i], vs[(i + 1) % vs.len()]);
                let id = *index.entry(key(a, b)).or_insert_with(|| {
                    let (ends, curve) = match self.curves.get(&key(a, b)) {
                        Some((ends, c)) => (*ends, c.clone()),
                        None => ([a, b], Curve::segment(self.vertices[a], self.vertices[b])),
                    };
                    edges.push(ParametricEdge::new(ends, curve, EdgeTag::Boundary));
                    regions.push(Vec::new());
                    edges.len() - 1
                });
                regions[id].push(*region);
                let dir = if edges[id].vertices == [a, b] {
                    Orientation::Forward
                } else {
                    Orientation::Reverse
                };
                loop_edges.push(LoopEdge { edge: id, dir });
            }
            elements.push(Element::new(loop_edges, *region));
        }
        for (edge, regs) in edges.iter_mut().zip(&regions) {
            edge.tag = match regs.as_slice() {
                [_] => EdgeTag::Boundary,
                [a, b] if a != b => EdgeTag::Interface,
                _ => EdgeTag::Interior,
            };
        }
        CurvedPolygonMesh::new(self.vertices, edges, elements)
    }
}

/// Structured grid of `n × n` quads over `[x0, x1] × [y0, y1]`, returning the
/// vertex index table (`(n+1)²`, row-major in `y`).
fn grid_vertices(
    b: &mut MeshBuilder,
    n: usize,
    lo: Vec2,
    hi: Vec2,
    map: impl Fn(Vec2) -> Vec2,
) -> Vec<usize> {
    let mut ids = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let s = Vec2::new(i as f64 / n as f64, j as f64 / n as f64);
            ids.push(b.vertex(map(Vec2::new(
                lo.x + s.x * (hi.x - lo.x),
                lo.y + s.y * (hi.y - lo.y),
            ))));
        }
    }
    ids
}

fn grid_quads(b: &mut MeshBuilder, n: usize, ids: &[usize], region: i32) {
    for j in 0..n {
        for i in 0..n {
            let v = |i: usize, j: usize| ids[j * (n + 1) + i];
            b.element(
                vec![v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)],
                region,
            );
        }
    }
}

pub fn unit_square() -> CurvedPolygonMesh {
    square_grid(1)
}

/// `[0, 2] × [0, 1]` as two unit squares.
pub fn two_squares() -> CurvedPolygonMesh {
    let mut b = MeshBuilder::new();
    let p: Vec<usize> = [(0., 0.), (1., 0.), (2., 0.), (2., 1.), (1., 1.), (0., 1.)]
        .iter()
        .map(|&(x, y)| b.vertex(Vec2::new(x, y)))
        .collect();
    b.element(vec![p[0], p[1], p[4], p[5]], 0);
    b.element(vec![p[1], p[2], p[3], p[4]], 0);
    b.build()
}

/// Uniform `n × n` squares on the unit square.
pub fn square_grid(n: usize) -> CurvedPolygonMesh {
    distorted_quads(n, 0.0)
}

/// `n × n` quads on the unit square with interior vertices moved by
/// `x += a sin 2πξ sin 2πη`, `y += a sin 2πξ sin 2πη`.
pub fn distorted_quads(n: usize, amplitude: f64) -> CurvedPolygonMesh {
    let mut b = MeshBuilder::new();
    let ids = grid_vertices(&mut b, n, Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), |p| {
        let d = amplitude * (2.0 * PI * p.x).sin() * (2.0 * PI * p.y).sin();
        Vec2::new(p.x + d, p.y + d)
    });
    grid_quads(&mut b, n, &ids, 0);
    b.build()
}

/// Criterion-one family: distorted quads with amplitude 0.1.
pub fn distorted_family(levels: usize) -> Vec<CurvedPolygonMesh> {
    (0..levels).map(|l| distorted_quads(4 << l, 0.1)).collect()
}

/// Running-bond brick pattern on the unit square: `n` rows of `n` cells,
/// odd rows shifted by half a cell. Cells carry the neighbouring rows'
/// vertices on their top and bottom sides, so interior cells are hexagons
/// with two straight angles.
pub fn bricks(n: usize) -> CurvedPolygonMesh {
    let row_breaks = |j: usize| -> Vec<f64> {
        if j.is_multiple_of(2) {
            (0..=n).map(|i| i as f64 / n as f64).collect()
        } else {
            let mut v = vec![0.0];
            v.extend((0..n).map(|i| (i as f64 + 0.5) / n as f64));
            v.push(1.0);
            v
        }
    };
    let mut b = MeshBuilder::new();
    // vertices of horizontal line j, keyed by x
    let mut lines: Vec<Vec<(f64, usize)>> = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let mut xs: Vec<f64> = Vec::new();
        if j > 0 {
            xs.extend(row_breaks(j - 1));
        }
        if j < n {
            xs.extend(row_breaks(j));
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let y = j as f64 / n as f64;
        lines.push(
            xs.into_iter()
                .map(|x| (x, b.vertex(Vec2::new(x, y))))
                .collect(),
        );
    }
    for j in 0..n {
        let br = row_breaks(j);
        for w in br.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let mut vs: Vec<usize> = lines[j]
                .iter()
                .filter(|(x, _)| *x >= x0 && *x <= x1)
                .map(|&(_, v)| v)
                .collect();
            vs.extend(
                lines[j + 1]
                    .iter()
                    .rev()
                    .filter(|(x, _)| *x >= x0 && *x <= x1)
                    .map(|&(_, v)| v),
            );
            b.element(vs, 0);
        }
    }
    b.build()
}

/// Unit disc cut into `slices` sectors meeting at the origin, outer edges
/// exact circular arcs.
pub fn disc(slices: usize) -> CurvedPolygonMesh {
    let mut b = MeshBuilder::new();
    let c = b.vertex(Vec2::zeros());
    let rim: Vec<usize> = (0..slices)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / slices as f64;
            b.vertex(Vec2::new(t.cos(), t.sin()))
        })
        .collect();
    for i in 0..slices {
        let (p, q) = (rim[i], rim[(i + 1) % slices]);
        b.arc(p, q, Vec2::zeros(), true);
        b.element(vec![c, p, q], 0);
    }
    b.build()
}

/// Unit disc as a single element bounded by four quarter arcs.
pub fn disc_single() -> CurvedPolygonMesh {
    let mut b = MeshBuilder::new();
    let rim: Vec<usize> = (0..4)
        .map(|i| {
            let t = FRAC_PI_2 * i as f64;
            b.vertex(Vec2::new(t.cos(), t.sin()))
        })
        .collect();
    for i in 0..4 {
        b.arc(rim[i], rim[(i + 1) % 4], Vec2::zeros(), true);
    }
    b.element(rim, 0);
    b.build()
}

/// Point at perimeter position `a` (of `4m` equal steps, counter-clockwise
/// from `(s, 0)`) on the square `[−s, s]²`.
fn square_perimeter(s: f64, m: usize, a: usize) -> Vec2 {
    let step = 2.0 * s / m as f64;
    let a = a % (4 * m);
    let half = m / 2;
    // walk: right side upper half, top, left, bottom, right side lower half
    let d = a as f64 * step;
    let seg = 2.0 * s;
    let d0 = half as f64 * step;
    if a < half {
        Vec2::new(s, d)
    } else if a < half + m {
        Vec2::new(s - (d - d0), s)
    } else if a < half + 2 * m {
        Vec2::new(-s, s - (d - d0 - seg))
    } else if a < half + 3 * m {
        Vec2::new(-s + (d - d0 - 2.0 * seg), -s)
    } else {
        Vec2::new(s, -s + (d - d0 - 3.0 * seg))
    }
}

/// Interface-fitted mesh of `(−1, 1)²` with Γ the circle of radius `r0`
/// about the origin. Γ is resolved by `4m` exact arcs (`m` even). Inside,
/// an `m × m` core square of half-width `r0/2` is joined to Γ by `m/2`
/// blended layers; outside, `m` blended layers reach the outer square.
/// Region 1 is inside Γ, region 2 outside.
pub fn interface_ogrid(m: usize, r0: f64) -> CurvedPolygonMesh {
    assert!(m >= 2 && m.is_multiple_of(2), "m must be even");
    let s = 0.5 * r0;
    let mut b = MeshBuilder::new();

    // core square
    let core = grid_vertices(&mut b, m, Vec2::new(-s, -s), Vec2::new(s, s), |p| p);
    grid_quads(&mut b, m, &core, 1);
    let core_at = |p: Vec2| -> usize {
        let i = ((p.x + s) / (2.0 * s) * m as f64).round() as usize;
        let j = ((p.y + s) / (2.0 * s) * m as f64).round() as usize;
        core[j * (m + 1) + i]
    };

    let na = 4 * m;
    let angle = |a: usize| 2.0 * PI * a as f64 / na as f64;
    let circle = |a: usize| Vec2::new(angle(a).cos(), angle(a).sin()) * r0;

    // ring layers: index [layer][a]
    let inner_layers = m / 2;
    let mut inner: Vec<Vec<usize>> = Vec::new();
    inner.push(
        (0..na)
            .map(|a| core_at(square_perimeter(s, m, a)))
            .collect(),
    );
    for l in 1..=inner_layers {
        let t = l as f64 / inner_layers as f64;
        inner.push(
            (0..na)
                .map(|a| {
                    let p = if l == inner_layers {
                        circle(a)
                    } else {
                        square_perimeter(s, m, a) * (1.0 - t) + circle(a) * t
                    };
                    b.vertex(p)
                })
                .collect(),
        );
    }
    let gamma = inner[inner_layers].clone();
    for a in 0..na {
        b.arc(gamma[a], gamma[(a + 1) % na], Vec2::zeros(), true);
    }
    for l in 0..inner_layers {
        for a in 0..na {
            let a1 = (a + 1) % na;
            b.element(
                vec![inner[l][a], inner[l + 1][a], inner[l + 1][a1], inner[l][a1]],
                1,
            );
        }
    }

    let outer_layers = m;
    let mut outer: Vec<Vec<usize>> = vec![gamma];
    for l in 1..=outer_layers {
        let t = l as f64 / outer_layers as f64;
        outer.push(
            (0..na)
                .map(|a| b.vertex(circle(a) * (1.0 - t) + square_perimeter(1.0, m, a) * t))
                .collect(),
        );
    }
    for l in 0..outer_layers {
        for a in 0..na {
            let a1 = (a + 1) % na;
            b.element(
                vec![outer[l][a], outer[l + 1][a], outer[l + 1][a1], outer[l][a1]],
                2,
            );
        }
    }
    b.build()
}

/// Criterion-four family: `m = 4, 8, 16, ...` with Γ of radius 0.5.
pub fn interface_family(levels: usize) -> Vec<CurvedPolygonMesh> {
    (0..levels).map(|l| interface_ogrid(4 << l, 0.5)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Segment,
    Arc,
    Quadratic,
}

/// Single star-shaped element around the origin with `3..=7` vertices at
/// jittered angles and radii in `[0.6, 1]`, scaled by `size` and shifted by
/// `offset`. Each edge is a segment, a shallow arc or a shallow quadratic
/// curve; `curved` gives the probability of a curved edge. Candidates that
/// fail validation are redrawn.
pub fn random_element(
    rng: &mut impl Rng,
    curved: f64,
    size: f64,
    offset: Vec2,
) -> CurvedPolygonMesh {
    loop {
        let mesh = random_candidate(rng, curved, size, offset);
        if validate_mesh(&mesh).accepted() {
            return mesh;
        }
    }
}

fn random_candidate(rng: &mut impl Rng, curved: f64, size: f64, offset: Vec2) -> CurvedPolygonMesh {
    let n = rng.gen_range(3..=7);
    let mut angles: Vec<f64> = (0..n)
        .map(|i| 2.0 * PI * (i as f64 + rng.gen_range(-0.3..0.3)) / n as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    let mut b = MeshBuilder::new();
    let vs: Vec<usize> = angles
        .iter()
        .map(|t| {
            let r = rng.gen_range(0.6..1.0) * size;
            b.vertex(offset + Vec2::new(t.cos(), t.sin()) * r)
        })
        .collect();
    for i in 0..n {
        let (a, c) = (vs[i], vs[(i + 1) % n]);
        let kind = if rng.gen_bool(curved) {
            if rng.gen_bool(0.5) {
                EdgeKind::Arc
            } else {
                EdgeKind::Quadratic
            }
        } else {
            EdgeKind::Segment
        };
        let (p, q) = (b.point(a), b.point(c));
        let chord = q - p;
        let outward = Vec2::new(chord.y, -chord.x).normalize();
        let bulge = rng.gen_range(-0.12..0.12) * chord.norm();
        match kind {
            EdgeKind::Segment => {}
            EdgeKind::Quadratic => {
                // p + chord t + 4 bulge n t (1 − t)
                let w = outward * (4.0 * bulge);
                b.curve(
                    a,
                    c,
                    Curve::polynomial(
                        vec![p.x, chord.x + w.x, -w.x],
                        vec![p.y, chord.y + w.y, -w.y],
                    )
                    .unwrap(),
                );
            }
            EdgeKind::Arc => {
                let s = if bulge.abs() < 1e-3 * chord.norm() {
                    0.05 * chord.norm()
                } else {
                    bulge
                };
                let half = 0.5 * chord.norm();
                let radius = (half * half + s * s) / (2.0 * s.abs());
                let apex = (p + q) * 0.5 + outward * s;
                let center = apex - outward * (radius * s.signum());
                let t0 = (p - center).y.atan2((p - center).x);
                let t1 = (q - center).y.atan2((q - center).x);
                let mut span = t1 - t0;
                while span > PI {
                    span -= 2.0 * PI;
                }
                while span <= -PI {
                    span += 2.0 * PI;
                }
                b.curve(a, c, Curve::arc(center, radius, t0, t0 + span).unwrap());
            }
        }
    }
    b.element(vs, 0);
    b.build()
}
