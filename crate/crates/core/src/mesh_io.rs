//! Reading and writing the WGPM-1 mesh format, a JSON document:
//!
//! ```text
//! { "version": 1,
//!   "vertices": [[x, y], ...],
//!   "edges": [{"v": [i, j], "kind": "segment" | "arc" | "poly",
//!              "params": {...}, "tag": "interior" | "boundary" | "interface"}],
//!   "elements": [{"loop": [e, ...], "dirs": [1 | -1, ...], "region": r}] }
//! ```
//!
//! Arc params are `{"center": [x, y], "radius": r, "start": θ₀, "end": θ₁}`,
//! polynomial params `{"x": [c₀, ...], "y": [c₀, ...]}` in increasing powers
//! of `t`. Segments take their endpoints from the vertex list.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Result, WgError};
use crate::geometry::{
    Curve, CurvedPolygonMesh, EdgeTag, Element, LoopEdge, Orientation, ParametricEdge, Vec2,
};

pub const FORMAT_VERSION: i64 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[allow(dead_code)]
    version: i64,
    vertices: Vec<[f64; 2]>,
    edges: Vec<EdgeRecord>,
    elements: Vec<ElementRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    v: [usize; 2],
    kind: String,
    #[serde(default)]
    params: Value,
    tag: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementRecord {
    #[serde(rename = "loop")]
    edges: Vec<usize>,
    dirs: Vec<i64>,
    #[serde(default)]
    region: i32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ArcParams {
    center: [f64; 2],
    radius: f64,
    start: f64,
    end: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyParams {
    x: Vec<f64>,
    y: Vec<f64>,
}

fn format_err(msg: impl Into<String>) -> WgError {
    WgError::Format(msg.into())
}

fn params<T: for<'de> Deserialize<'de>>(value: &Value, edge: usize) -> Result<T> {
    serde_json::from_value(value.clone())
        .map_err(|e| format_err(format!("edge {edge} params: {e}")))
}

pub fn parse_mesh(text: &str) -> Result<CurvedPolygonMesh> {
    let value: Value = serde_json::from_str(text).map_err(|e| format_err(e.to_string()))?;
    let version = value
        .get("version")
        .ok_or_else(|| format_err("missing version field"))?
        .as_i64()
        .ok_or_else(|| format_err("version must be an integer"))?;
    if version != FORMAT_VERSION {
        return Err(WgError::UnsupportedVersion(version));
    }
    let doc: Document = serde_json::from_value(value).map_err(|e| format_err(e.to_string()))?;

    let vertices: Vec<Vec2> = doc.vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
    let mut edges = Vec::with_capacity(doc.edges.len());
    for (i, rec) in doc.edges.iter().enumerate() {
        for &v in &rec.v {
            if v >= vertices.len() {
                return Err(format_err(format!(
                    "edge {i} references missing vertex {v}"
                )));
            }
        }
        let curve = match rec.kind.as_str() {
            "segment" => Curve::segment(vertices[rec.v[0]], vertices[rec.v[1]]),
            "arc" => {
                let p: ArcParams = params(&rec.params, i)?;
                Curve::arc(
                    Vec2::new(p.center[0], p.center[1]),
                    p.radius,
                    p.start,
                    p.end,
                )?
            }
            "poly" => {
                let p: PolyParams = params(&rec.params, i)?;
                Curve::polynomial(p.x, p.y)?
            }
            other => return Err(format_err(format!("edge {i} has unknown kind '{other}'"))),
        };
        let tag = match rec.tag.as_str() {
            "interior" => EdgeTag::Interior,
            "boundary" => EdgeTag::Boundary,
            "interface" => EdgeTag::Interface,
            other => return Err(format_err(format!("edge {i} has unknown tag '{other}'"))),
        };
        edges.push(ParametricEdge::new(rec.v, curve, tag));
    }

    let mut elements = Vec::with_capacity(doc.elements.len());
    for (i, rec) in doc.elements.iter().enumerate() {
        if rec.edges.len() != rec.dirs.len() {
            return Err(format_err(format!(
                "element {i}: loop and dirs differ in length"
            )));
        }
        let mut loop_edges = Vec::with_capacity(rec.edges.len());
        for (&edge, &d) in rec.edges.iter().zip(&rec.dirs) {
            if edge >= edges.len() {
                return Err(format_err(format!(
                    "element {i} references missing edge {edge}"
                )));
            }
            let dir = Orientation::from_sign(d).ok_or_else(|| {
                format_err(format!("element {i}: direction flag {d} is not +1 or -1"))
            })?;
            loop_edges.push(LoopEdge { edge, dir });
        }
        elements.push(Element::new(loop_edges, rec.region));
    }
    Ok(CurvedPolygonMesh::new(vertices, edges, elements))
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<CurvedPolygonMesh> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn num_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ")
}

/// Serializes with 17 significant digits, so reading the text back gives
/// the same mesh bit for bit.
pub fn mesh_to_string(mesh: &CurvedPolygonMesh) -> String {
    let mut s = String::new();
    s.push_str("{\n  \"version\": 1,\n  \"vertices\": [");
    for (i, v) in mesh.vertices.iter().enumerate() {
        let sep = if i == 0 { "\n    " } else { ",\n    " };
        let _ = write!(s, "{sep}[{}, {}]", num(v.x), num(v.y));
    }
    s.push_str("\n  ],\n  \"edges\": [");
    for (i, e) in mesh.edges.iter().enumerate() {
        let sep = if i == 0 { "\n    " } else { ",\n    " };
        let (kind, params) = match &e.curve {
            Curve::Segment { .. } => ("segment", "{}".to_string()),
            Curve::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => (
                "arc",
                format!(
                    "{{\"center\": [{}, {}], \"radius\": {}, \"start\": {}, \"end\": {}}}",
                    num(center.x),
                    num(center.y),
                    num(*radius),
                    num(*start_angle),
                    num(*end_angle)
                ),
            ),
            Curve::Polynomial { x, y } => (
                "poly",
                format!("{{\"x\": [{}], \"y\": [{}]}}", num_list(x), num_list(y)),
            ),
        };
        let _ = write!(
            s,
            "{sep}{{\"v\": [{}, {}], \"kind\": \"{kind}\", \"params\": {params}, \"tag\": \"{}\"}}",
            e.vertices[0],
            e.vertices[1],
            e.tag.as_str()
        );
    }
    s.push_str("\n  ],\n  \"elements\": [");
    for (i, el) in mesh.elements.iter().enumerate() {
        let sep = if i == 0 { "\n    " } else { ",\n    " };
        let loop_: Vec<String> = el.edges.iter().map(|le| le.edge.to_string()).collect();
        let dirs: Vec<&str> = el
            .edges
            .iter()
            .map(|le| {
                if le.dir == Orientation::Forward {
                    "1"
                } else {
                    "-1"
                }
            })
            .collect();
        let _ = write!(
            s,
            "{sep}{{\"loop\": [{}], \"dirs\": [{}], \"region\": {}}}",
            loop_.join(", "),
            dirs.join(", "),
            el.region
        );
    }
    s.push_str("\n  ]\n}\n");
    s
}

pub fn write_mesh(mesh: &CurvedPolygonMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}
