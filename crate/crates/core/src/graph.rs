//! Metric graphs: edges with lengths and an orientation, plus the
//! combinatorial operations used everywhere else (subdivision, cutting,
//! components, Betti numbers).

use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Tolerance (relative to the edge length) under which two points on one edge coincide.
pub const POINT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    /// x = 0, the `from` vertex.
    Tail,
    /// x = length, the `to` vertex.
    Head,
}

impl End {
    pub fn opposite(self) -> End {
        match self {
            End::Tail => End::Head,
            End::Head => End::Tail,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeEnd {
    pub edge: EdgeId,
    pub end: End,
}

impl EdgeEnd {
    pub fn tail(edge: EdgeId) -> Self {
        EdgeEnd { edge, end: End::Tail }
    }

    pub fn head(edge: EdgeId) -> Self {
        EdgeEnd { edge, end: End::Head }
    }

    /// Global position among the 2|E| edge-ends: tail of e is 2e, head is 2e+1.
    pub fn index(self) -> usize {
        2 * self.edge + usize::from(self.end == End::Head)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub length: f64,
}

impl Edge {
    pub fn new(from: VertexId, to: VertexId, length: f64) -> Self {
        Edge { from, to, length }
    }

    pub fn vertex_at(&self, end: End) -> VertexId {
        match end {
            End::Tail => self.from,
            End::Head => self.to,
        }
    }

    pub fn is_loop(&self) -> bool {
        self.from == self.to
    }
}

#[derive(Clone, Debug)]
pub struct MetricGraph {
    names: Vec<String>,
    edges: Vec<Edge>,
    incident: Vec<Vec<EdgeEnd>>,
    component: Vec<usize>,
    n_components: usize,
    oriented: bool,
}

impl PartialEq for MetricGraph {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.edges == other.edges
    }
}

impl MetricGraph {
    /// Build and validate a graph. Vertex names must be unique.
    pub fn new(names: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Graph("graph has no edges".into()));
        }
        for i in 0..names.len() {
            for j in 0..i {
                if names[i] == names[j] {
                    return Err(Error::Graph(format!("duplicate vertex id {:?}", names[i])));
                }
            }
        }
        let n = names.len();
        for (k, e) in edges.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(Error::Graph(format!("edge {k} has a dangling endpoint")));
            }
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(Error::Graph(format!(
                    "edge {k} has non-positive length {}",
                    e.length
                )));
            }
        }
        let mut g = MetricGraph {
            names,
            edges,
            incident: Vec::new(),
            component: Vec::new(),
            n_components: 0,
            oriented: false,
        };
        g.rebuild();
        g.oriented = g.degree_two_consistent();
        Ok(g)
    }

    /// Vertices named "0", "1", ... and edges given as (from, to, length).
    pub fn from_edges(n_vertices: usize, edges: &[(VertexId, VertexId, f64)]) -> Result<Self> {
        let names = (0..n_vertices).map(|i| i.to_string()).collect();
        let edges = edges.iter().map(|&(a, b, l)| Edge::new(a, b, l)).collect();
        MetricGraph::new(names, edges)
    }

    fn rebuild(&mut self) {
        let n = self.names.len();
        let mut incident = vec![Vec::new(); n];
        for (k, e) in self.edges.iter().enumerate() {
            incident[e.from].push(EdgeEnd::tail(k));
            incident[e.to].push(EdgeEnd::head(k));
        }
        for list in &mut incident {
            list.sort();
        }
        self.incident = incident;

        let mut uf = UnionFind::new(n);
        for e in &self.edges {
            uf.union(e.from, e.to);
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut component = vec![0; n];
        for v in 0..n {
            let r = uf.find(v);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            component[v] = label[r];
        }
        self.component = component;
        self.n_components = next;
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn length(&self, e: EdgeId) -> f64 {
        self.edges[e].length
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: VertexId) -> &str {
        &self.names[v]
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.names.iter().position(|n| n == name)
    }

    /// Edge-ends at v; a loop contributes both of its ends.
    pub fn incident(&self, v: VertexId) -> &[EdgeEnd] {
        &self.incident[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incident[v].len()
    }

    pub fn vertex_of(&self, end: EdgeEnd) -> VertexId {
        self.edges[end.edge].vertex_at(end.end)
    }

    pub fn l_min(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn component_of(&self, v: VertexId) -> usize {
        self.component[v]
    }

    pub fn components(&self) -> &[usize] {
        &self.component
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn is_connected(&self) -> bool {
        self.n_components == 1
    }

    /// First Betti number |E| - |V| + |components|.
    pub fn betti(&self) -> i64 {
        self.edges.len() as i64 - self.names.len() as i64 + self.n_components as i64
    }

    pub fn is_oriented(&self) -> bool {
        self.oriented
    }

    /// For a degree-two vertex with one incoming and one outgoing end,
    /// returns (v-, v+): the head end of the incoming edge and the tail end
    /// of the outgoing edge.
    pub fn sides(&self, v: VertexId) -> Option<(EdgeEnd, EdgeEnd)> {
        let inc = &self.incident[v];
        if inc.len() != 2 {
            return None;
        }
        let heads: Vec<_> = inc.iter().filter(|x| x.end == End::Head).collect();
        let tails: Vec<_> = inc.iter().filter(|x| x.end == End::Tail).collect();
        if heads.len() == 1 && tails.len() == 1 {
            Some((*heads[0], *tails[0]))
        } else {
            None
        }
    }

    fn degree_two_consistent(&self) -> bool {
        (0..self.vertex_count()).all(|v| self.degree(v) != 2 || self.sides(v).is_some())
    }

    /// Re-orient edges so that every degree-two vertex has one incoming and
    /// one outgoing end. Each maximal chain of degree-two vertices follows the
    /// direction of its first edge, so an already consistent graph is returned
    /// unchanged.
    pub fn orient_for_degree_two(&self) -> MetricGraph {
        let mut edges = self.edges.clone();
        let mut visited = vec![false; edges.len()];
        let deg2 = |v: VertexId| self.incident[v].len() == 2;

        for start in 0..edges.len() {
            if visited[start] {
                continue;
            }
            let e0 = &edges[start];
            if !deg2(e0.from) && !deg2(e0.to) {
                continue;
            }
            visited[start] = true;
            // forward from the head of `start`
            let mut cur = start;
            loop {
                let w = edges[cur].to;
                if !deg2(w) {
                    break;
                }
                let Some(next) = self.other_edge_at(w, cur, &edges, End::Head) else {
                    break;
                };
                if visited[next] {
                    break;
                }
                if edges[next].from != w {
                    flip(&mut edges[next]);
                }
                visited[next] = true;
                cur = next;
            }
            // backward from the tail of `start`
            let mut cur = start;
            loop {
                let w = edges[cur].from;
                if !deg2(w) {
                    break;
                }
                let Some(prev) = self.other_edge_at(w, cur, &edges, End::Tail) else {
                    break;
                };
                if visited[prev] {
                    break;
                }
                if edges[prev].to != w {
                    flip(&mut edges[prev]);
                }
                visited[prev] = true;
                cur = prev;
            }
        }
        let mut g = MetricGraph {
            names: self.names.clone(),
            edges,
            incident: Vec::new(),
            component: Vec::new(),
            n_components: 0,
            oriented: false,
        };
        g.rebuild();
        g.oriented = g.degree_two_consistent();
        debug_assert!(g.oriented);
        g
    }

    /// The edge at degree-two vertex `w` other than the end (`cur`, `arrive`).
    fn other_edge_at(&self, w: VertexId, cur: EdgeId, edges: &[Edge], arrive: End) -> Option<EdgeId> {
        if edges[cur].is_loop() {
            return None;
        }
        // the two ends at w, described through the current orientation
        let mut others = Vec::new();
        for (k, e) in edges.iter().enumerate() {
            if e.from == w {
                others.push((k, End::Tail));
            }
            if e.to == w {
                others.push((k, End::Head));
            }
        }
        debug_assert_eq!(others.len(), 2);
        others
            .into_iter()
            .find(|&(k, end)| !(k == cur && end == arrive))
            .map(|(k, _)| k)
    }

    /// Same graph with every edge reversed.
    pub fn reversed(&self) -> MetricGraph {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(e.to, e.from, e.length))
            .collect();
        MetricGraph::new(self.names.clone(), edges).expect("reversal keeps validity")
    }

    /// Classify a coordinate on an edge. Coordinates within `POINT_TOL`·ℓ of an
    /// end refer to the vertex there.
    pub fn point(&self, edge: EdgeId, x: f64) -> Result<PointOnGraph> {
        let l = self.length(edge);
        if x < -POINT_TOL * l || x > l * (1.0 + POINT_TOL) {
            return Err(Error::Graph(format!("coordinate {x} outside edge {edge}")));
        }
        let vertex = if x.abs() <= POINT_TOL * l {
            Some(self.edges[edge].from)
        } else if (l - x).abs() <= POINT_TOL * l {
            Some(self.edges[edge].to)
        } else {
            None
        };
        let x = x.clamp(0.0, l);
        Ok(PointOnGraph { edge, x, len: l, vertex })
    }

    /// Split edges at interior points. Returns the subdivided graph together
    /// with the id of the vertex created for each input point.
    pub fn insert_degree_two(&self, pts: &[PointOnGraph]) -> Result<Subdivision> {
        for p in pts {
            if p.vertex.is_some() {
                return Err(Error::Graph(format!(
                    "point at x={} on edge {} is already a vertex",
                    p.x, p.edge
                )));
            }
            if p.edge >= self.edge_count() {
                return Err(Error::Graph(format!("no edge {}", p.edge)));
            }
        }
        let mut names = self.names.clone();
        let mut edges = self.edges.clone();
        let mut origin: Vec<(EdgeId, f64)> = (0..edges.len()).map(|e| (e, 0.0)).collect();
        let mut created = vec![usize::MAX; pts.len()];

        for e in 0..self.edge_count() {
            let mut on_edge: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .filter(|(_, p)| p.edge == e)
                .map(|(i, p)| (p.x, i))
                .collect();
            if on_edge.is_empty() {
                continue;
            }
            on_edge.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in on_edge.windows(2) {
                if (w[1].0 - w[0].0).abs() <= POINT_TOL * self.length(e) {
                    return Err(Error::Graph(format!("repeated point on edge {e}")));
                }
            }
            let orig = self.edges[e].clone();
            let mut prev_x = 0.0;
            let mut prev_v = orig.from;
            let mut piece = e;
            for &(x, i) in &on_edge {
                let v = names.len();
                names.push(format!("{}@{}", e, fmt_coord(x)));
                created[i] = v;
                edges[piece] = Edge::new(prev_v, v, x - prev_x);
                origin[piece] = (e, prev_x);
                piece = edges.len();
                edges.push(Edge::new(v, orig.to, 1.0));
                origin.push((e, x));
                prev_x = x;
                prev_v = v;
            }
            edges[piece] = Edge::new(prev_v, orig.to, orig.length - prev_x);
            origin[piece] = (e, prev_x);
        }
        let graph = MetricGraph::new(names, edges)?;
        Ok(Subdivision { graph, created, origin })
    }

    /// Cut at degree-two vertices. Each cut vertex v keeps its id as v- (the
    /// incoming side) and gains a new vertex v+ on the outgoing side. For a
    /// loop edge the tail side is v+.
    pub fn cut_at(&self, cut: &[VertexId]) -> Result<CutResult> {
        let mut names = self.names.clone();
        let mut edges = self.edges.clone();
        let mut daughters = Vec::with_capacity(cut.len());
        for (i, &v) in cut.iter().enumerate() {
            if cut[..i].contains(&v) {
                return Err(Error::Graph(format!("vertex {v} listed twice in cut set")));
            }
            if self.degree(v) != 2 {
                return Err(Error::Graph(format!(
                    "cut point {} has degree {} (expected 2)",
                    self.names[v],
                    self.degree(v)
                )));
            }
            let (_minus, plus) = self.sides(v).ok_or_else(|| {
                Error::Graph(format!("vertex {} is not consistently oriented", self.names[v]))
            })?;
            let vp = names.len();
            names.push(format!("{}+", self.names[v]));
            names[v] = format!("{}-", self.names[v]);
            edges[plus.edge].from = vp;
            daughters.push((v, vp));
        }
        let graph = MetricGraph::new(names, edges)?;
        Ok(CutResult { graph, daughters })
    }
}

fn flip(e: &mut Edge) {
    std::mem::swap(&mut e.from, &mut e.to);
}

fn fmt_coord(x: f64) -> String {
    format!("{:.6}", x)
}

/// A point on a metric graph: interior to an edge, or a vertex (then
/// representable on any incident edge).
#[derive(Clone, Copy, Debug)]
pub struct PointOnGraph {
    pub edge: EdgeId,
    pub x: f64,
    len: f64,
    pub vertex: Option<VertexId>,
}

impl PointOnGraph {
    pub fn is_interior(&self) -> bool {
        self.vertex.is_none()
    }
}

impl PartialEq for PointOnGraph {
    fn eq(&self, other: &Self) -> bool {
        match (self.vertex, other.vertex) {
            (Some(a), Some(b)) => a == b,
            (None, None) => {
                self.edge == other.edge && (self.x - other.x).abs() <= POINT_TOL * self.len
            }
            _ => false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Subdivision {
    pub graph: MetricGraph,
    /// New vertex for each requested point, in input order.
    pub created: Vec<VertexId>,
    /// For each edge of the new graph: (edge of the old graph, offset of its tail).
    pub origin: Vec<(EdgeId, f64)>,
}

#[derive(Clone, Debug)]
pub struct CutResult {
    pub graph: MetricGraph,
    /// (v-, v+) for each cut vertex, in input order.
    pub daughters: Vec<(VertexId, VertexId)>,
}

impl CutResult {
    pub fn n_components(&self) -> usize {
        self.graph.n_components()
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_edge_degrees() {
        let g = MetricGraph::from_edges(2, &[(0, 1, PI)]).unwrap();
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(1), 1);
        assert_eq!(g.l_min(), PI);
        assert_eq!(g.betti(), 0);
    }

    #[test]
    fn loop_counts_twice() {
        let g = MetricGraph::from_edges(1, &[(0, 0, 1.0)]).unwrap();
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.betti(), 1);
        assert!(g.is_oriented());
        assert_eq!(g.sides(0), Some((EdgeEnd::head(0), EdgeEnd::tail(0))));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MetricGraph::from_edges(2, &[(0, 1, 0.0)]).is_err());
        assert!(MetricGraph::from_edges(2, &[(0, 2, 1.0)]).is_err());
        assert!(MetricGraph::from_edges(2, &[]).is_err());
    }

    #[test]
    fn chain_orientation() {
        // 0 -> 1 <- 2 -> 3 : vertices 1, 2 have degree two
        let g = MetricGraph::from_edges(4, &[(0, 1, 1.0), (2, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(!g.is_oriented());
        let o = g.orient_for_degree_two();
        assert!(o.is_oriented());
        for e in o.edges() {
            assert_eq!(e.to, e.from + 1);
        }
        assert_eq!(o.orient_for_degree_two(), o);
    }

    #[test]
    fn cycle_orientation() {
        let g =
            MetricGraph::from_edges(3, &[(0, 1, 1.0), (2, 1, 1.0), (0, 2, 1.0)]).unwrap();
        let o = g.orient_for_degree_two();
        assert!(o.is_oriented());
        for v in 0..3 {
            assert!(o.sides(v).is_some());
        }
    }

    #[test]
    fn star_keeps_orientation() {
        let g = MetricGraph::from_edges(4, &[(0, 1, 1.0), (2, 0, 1.3), (0, 3, 1.7)]).unwrap();
        assert_eq!(g.orient_for_degree_two(), g);
    }

    #[test]
    fn split_edge() {
        let g = MetricGraph::from_edges(2, &[(0, 1, PI)]).unwrap();
        let p = g.point(0, PI / 4.0).unwrap();
        let s = g.insert_degree_two(&[p]).unwrap();
        assert_eq!(s.graph.edge_count(), 2);
        assert!((s.graph.length(0) - PI / 4.0).abs() < 1e-15);
        assert!((s.graph.length(1) - 3.0 * PI / 4.0).abs() < 1e-15);
        assert_eq!(s.graph.degree(s.created[0]), 2);
        assert!(s.graph.is_oriented());
    }

    #[test]
    fn split_twice() {
        let g = MetricGraph::from_edges(2, &[(0, 1, 3.0)]).unwrap();
        let pts = [g.point(0, 2.0).unwrap(), g.point(0, 1.0).unwrap()];
        let s = g.insert_degree_two(&pts).unwrap();
        assert_eq!(s.graph.edge_count(), 3);
        assert_eq!(s.graph.degree(s.created[0]), 2);
        assert_eq!(s.graph.degree(s.created[1]), 2);
        assert!((s.graph.total_length() - 3.0).abs() < 1e-15);
        assert_eq!(s.origin, vec![(0, 0.0), (0, 1.0), (0, 2.0)]);
    }

    #[test]
    fn split_at_vertex_rejected() {
        let g = MetricGraph::from_edges(2, &[(0, 1, 3.0)]).unwrap();
        let p = g.point(0, 3.0).unwrap();
        assert_eq!(p.vertex, Some(1));
        assert!(g.insert_degree_two(&[p]).is_err());
    }

    #[test]
    fn cut_interval_and_cycle() {
        let g = MetricGraph::from_edges(2, &[(0, 1, 2.0)]).unwrap();
        let s = g.insert_degree_two(&[g.point(0, 1.0).unwrap()]).unwrap();
        let c = s.graph.cut_at(&s.created).unwrap();
        assert_eq!(c.n_components(), 2);
        assert_eq!(c.graph.vertex_count(), s.graph.vertex_count() + 1);

        let cyc = MetricGraph::from_edges(1, &[(0, 0, 1.0)]).unwrap();
        let c = cyc.cut_at(&[0]).unwrap();
        assert_eq!(cyc.betti(), 1);
        assert_eq!(c.graph.betti(), 0);
        assert_eq!(c.n_components(), 1);
        let (vm, vp) = c.daughters[0];
        assert_eq!(c.graph.edge(0).from, vp);
        assert_eq!(c.graph.edge(0).to, vm);
    }

    #[test]
    fn cut_requires_degree_two() {
        let g = MetricGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        assert!(g.cut_at(&[0]).is_err());
    }

    #[test]
    fn point_equality() {
        let g = MetricGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let a = g.point(0, 1.0).unwrap();
        let b = g.point(1, 0.0).unwrap();
        assert_eq!(a, b);
        let c = g.point(0, 0.5).unwrap();
        let d = g.point(0, 0.5 + 1e-14).unwrap();
        assert_eq!(c, d);
        assert_ne!(c, g.point(0, 0.6).unwrap());
    }
}
