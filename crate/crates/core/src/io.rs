//! Graph and condition files, point specifications, number formatting and CSV.

use crate::conditions::{BoundaryProblem, ExtReal, VertexCondition};
use crate::error::{Error, Result};
use crate::flow::CurveRow;
use crate::graph::{Edge, MetricGraph, PointOnGraph, VertexId};
use crate::robin::subdivide_at;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Write;

/// `x` with 12 significant digits, trailing zeros removed (like C's `%.12g`).
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mant), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Orientation policy of a graph file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Orient {
    /// Re-orient so that every degree-two vertex has one incoming and one outgoing edge.
    #[default]
    Auto,
    /// Keep the edge directions as written.
    Declared,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    vertices: Vec<Value>,
    edges: Vec<EdgeDoc>,
    #[serde(default)]
    orient: Orient,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    from: Value,
    to: Value,
    length: Value,
}

fn id_string(v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::Parse(format!("vertex id must be a string or number, got {other}"))),
    }
}

fn length_value(v: &Value) -> Result<f64> {
    let x = match v {
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad length {s:?}")))?,
        Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("bad length {n}")))?,
        other => return Err(Error::Parse(format!("length must be a number or string, got {other}"))),
    };
    Ok(x)
}

/// Parse a graph document.
pub fn parse_graph(text: &str) -> Result<MetricGraph> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let names = doc.vertices.iter().map(id_string).collect::<Result<Vec<_>>>()?;
    let lookup = |v: &Value| -> Result<VertexId> {
        let id = id_string(v)?;
        names
            .iter()
            .position(|n| *n == id)
            .ok_or_else(|| Error::Graph(format!("edge refers to unknown vertex {id:?}")))
    };
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in &doc.edges {
        edges.push(Edge::new(lookup(&e.from)?, lookup(&e.to)?, length_value(&e.length)?));
    }
    let g = MetricGraph::new(names, edges)?;
    Ok(match doc.orient {
        Orient::Auto => g.orient_for_degree_two(),
        Orient::Declared => g,
    })
}

pub fn read_graph(path: &std::path::Path) -> Result<MetricGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_graph(&text)
}

/// Serialize a graph; lengths are written as shortest round-trip decimal strings.
pub fn graph_to_json(g: &MetricGraph) -> String {
    let edges: Vec<Value> = g
        .edges()
        .iter()
        .map(|e| {
            serde_json::json!({
                "from": g.name(e.from),
                "to": g.name(e.to),
                "length": format!("{}", e.length),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "vertices": g.names(),
        "edges": edges,
        "orient": "declared",
    });
    serde_json::to_string_pretty(&doc).expect("serializable")
}

/// A location on a graph: a vertex, or `edge:fraction` of an edge.
#[derive(Clone, Debug, PartialEq)]
pub enum PointSpec {
    Vertex(String),
    EdgeFraction(usize, f64),
}

pub fn parse_point(s: &str) -> Result<PointSpec> {
    let s = s.trim();
    if let Some((e, f)) = s.split_once(':') {
        let edge = e.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad edge index in {s:?}")))?;
        let frac = f.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad fraction in {s:?}")))?;
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::Parse(format!("fraction in {s:?} must lie in (0, 1)")));
        }
        Ok(PointSpec::EdgeFraction(edge, frac))
    } else if s.is_empty() {
        Err(Error::Parse("empty point".into()))
    } else {
        Ok(PointSpec::Vertex(s.to_string()))
    }
}

/// Comma-separated list of points.
pub fn parse_point_list(s: &str) -> Result<Vec<PointSpec>> {
    s.split(',').map(parse_point).collect()
}

fn resolve(g: &MetricGraph, p: &PointSpec) -> Result<PointOnGraph> {
    match p {
        PointSpec::Vertex(name) => {
            let v = g
                .vertex_by_name(name)
                .ok_or_else(|| Error::Graph(format!("no vertex {name:?}")))?;
            let end = g.incident(v).first().ok_or_else(|| Error::Graph(format!("vertex {name:?} is isolated")))?;
            let x = match end.end {
                crate::graph::End::Tail => 0.0,
                crate::graph::End::Head => g.length(end.edge),
            };
            g.point(end.edge, x)
        }
        PointSpec::EdgeFraction(e, f) => {
            if *e >= g.edge_count() {
                return Err(Error::Graph(format!("no edge {e}")));
            }
            g.point(*e, f * g.length(*e))
        }
    }
}

/// Subdivide `g` so that every point is a vertex; returns the new graph and the vertex ids.
pub fn place_points(g: &MetricGraph, pts: &[PointSpec]) -> Result<(MetricGraph, Vec<VertexId>)> {
    let resolved = pts.iter().map(|p| resolve(g, p)).collect::<Result<Vec<_>>>()?;
    let (sub, ids) = subdivide_at(g, &resolved)?;
    Ok((sub.graph, ids))
}

/// Like `place_points`, requiring every point to be a degree-two vertex afterwards.
pub fn place_degree_two(g: &MetricGraph, pts: &[PointSpec]) -> Result<(MetricGraph, Vec<VertexId>)> {
    let (sub, ids) = place_points(g, pts)?;
    for &v in &ids {
        if sub.degree(v) != 2 {
            return Err(Error::Graph(format!(
                "vertex {} has degree {}, expected 2",
                sub.name(v),
                sub.degree(v)
            )));
        }
    }
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != ids.len() {
        return Err(Error::Graph("repeated point in set".into()));
    }
    if !sub.is_oriented() {
        return Err(Error::Graph(
            "degree-two vertices are not consistently oriented (use orient: auto)".into(),
        ));
    }
    Ok((sub, ids))
}

/// Parse an extended real: a number, or `inf`, `-inf`, `infinity`.
pub fn parse_ext(s: &str) -> Result<ExtReal> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "inf" | "+inf" | "-inf" | "infinity" | "+infinity" | "-infinity" | "∞" => Ok(ExtReal::Infinity),
        _ => t
            .parse::<f64>()
            .map(ExtReal::Finite)
            .map_err(|_| Error::Parse(format!("bad number {s:?}"))),
    }
}

/// Parse a real number, accepting `inf` and `-inf`.
pub fn parse_real(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {s:?}"))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionsDoc {
    conditions: Vec<ConditionDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionDoc {
    at: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    t: Option<Value>,
}

fn ext_value(v: &Option<Value>) -> Result<ExtReal> {
    match v {
        None => Err(Error::Parse("condition needs a coupling value t".into())),
        Some(Value::Number(n)) => Ok(ExtReal::Finite(n.as_f64().unwrap_or(f64::NAN))),
        Some(Value::String(s)) => parse_ext(s),
        Some(other) => Err(Error::Parse(format!("bad coupling value {other}"))),
    }
}

/// Overlay a conditions document on the Neumann-Kirchhoff problem of `g`.
///
/// Entries are `{"at": point, "type": kind, "alpha": a, "t": t}` with kind one
/// of `nk`, `dirichlet`, `robin` (fixed α at every end), `delta` (δ(t)) and
/// `delta_alpha` (δ_α(t), degree-two points only). Points given as
/// `edge:fraction` are inserted as new vertices.
pub fn parse_conditions(g: &MetricGraph, text: &str) -> Result<BoundaryProblem> {
    let doc: ConditionsDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let specs = doc.conditions.iter().map(|c| parse_point(&c.at)).collect::<Result<Vec<_>>>()?;
    let (sub, ids) = place_points(g, &specs)?;
    let mut p = BoundaryProblem::neumann_kirchhoff(&sub);
    for (c, &v) in doc.conditions.iter().zip(&ids) {
        let cond = match c.kind.as_str() {
            "nk" | "neumann-kirchhoff" => VertexCondition::NeumannKirchhoff,
            "dirichlet" => VertexCondition::RobinFixed { alpha: 0.0 },
            "robin" => VertexCondition::RobinFixed {
                alpha: c.alpha.ok_or_else(|| Error::Parse("robin condition needs alpha".into()))?,
            },
            "delta" => VertexCondition::Delta { t: ext_value(&c.t)? },
            "delta_alpha" => VertexCondition::DeltaAlpha {
                alpha: c.alpha.unwrap_or(0.0),
                t: ext_value(&c.t)?,
            },
            other => return Err(Error::Parse(format!("unknown condition type {other:?}"))),
        };
        p = p.with(v, cond)?;
    }
    Ok(p)
}

/// Curve samples as CSV with header `t,branch,lambda`.
pub fn write_curves_csv<W: Write>(rows: &[CurveRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,branch,lambda")?;
    for r in rows {
        writeln!(w, "{},{},{}", fmt_num(r.t), r.branch, fmt_num(r.lambda))?;
    }
    Ok(())
}
