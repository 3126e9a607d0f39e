//! Vertex conditions and boundary problems.
//!
//! Every condition at a vertex v of degree d is stored in the real form
//! A F + B ∇F = 0, where F and ∇F are the values and outgoing derivatives
//! at the d edge-ends of v (in the order of `MetricGraph::incident`).

use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, VertexId};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

/// A point of the extended real line ℝ ∪ {∞}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinity,
}

impl ExtReal {
    /// Chart θ = 2 atan t on the circle, θ ∈ (-π, π]; ∞ maps to π.
    pub fn theta(self) -> f64 {
        match self {
            ExtReal::Finite(t) => 2.0 * t.atan(),
            ExtReal::Infinity => PI,
        }
    }

    pub fn from_theta(theta: f64) -> ExtReal {
        let r = (theta + PI).rem_euclid(2.0 * PI) - PI;
        if r.abs() >= PI - 1e-15 || (r + PI).abs() < 1e-15 {
            ExtReal::Infinity
        } else {
            ExtReal::Finite((r / 2.0).tan())
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::Infinity)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(t) => Some(t),
            ExtReal::Infinity => None,
        }
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::Finite(t) => write!(f, "{t}"),
            ExtReal::Infinity => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum VertexCondition {
    NeumannKirchhoff,
    /// Rotated delta coupling at an oriented degree-two vertex.
    DeltaAlpha { alpha: f64, t: ExtReal },
    /// Continuity plus Σ∇f = t f(v), any degree; t = ∞ is Dirichlet.
    Delta { t: ExtReal },
    /// τ_α f(v) = 0 at a degree-one vertex (derivative along the edge).
    RobinFixed { alpha: f64 },
    /// i(U - 1)F + (U + 1)∇F = 0 for a unitary U of size deg(v).
    Unitary(DMatrix<Complex64>),
}

/// Real pair (A, B) of a vertex condition.
#[derive(Clone, Debug)]
pub struct RealForm {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl VertexCondition {
    pub fn real_form(&self, g: &MetricGraph, v: VertexId) -> Result<RealForm> {
        let inc = g.incident(v);
        let d = inc.len();
        let mut a = DMatrix::zeros(d, d);
        let mut b = DMatrix::zeros(d, d);
        match self {
            VertexCondition::NeumannKirchhoff => {
                for r in 1..d {
                    a[(r - 1, 0)] = 1.0;
                    a[(r - 1, r)] = -1.0;
                }
                for j in 0..d {
                    b[(d - 1, j)] = 1.0;
                }
            }
            VertexCondition::Delta { t } => match t {
                ExtReal::Infinity => {
                    for j in 0..d {
                        a[(j, j)] = 1.0;
                    }
                }
                ExtReal::Finite(t) => {
                    for r in 1..d {
                        a[(r - 1, 0)] = 1.0;
                        a[(r - 1, r)] = -1.0;
                    }
                    for j in 0..d {
                        b[(d - 1, j)] = 1.0;
                    }
                    a[(d - 1, 0)] = -t;
                }
            },
            VertexCondition::DeltaAlpha { alpha, t } => {
                let (minus, plus) = g.sides(v).ok_or_else(|| {
                    Error::Solver(format!(
                        "delta_alpha condition at vertex {} needs degree two with one incoming and one outgoing edge",
                        g.name(v)
                    ))
                })?;
                let ip = inc.iter().position(|&x| x == plus).expect("incident");
                let im = inc.iter().position(|&x| x == minus).expect("incident");
                let (s, c) = alpha.sin_cos();
                match t {
                    ExtReal::Finite(t) => {
                        // τ(v+) - τ(v-) = 0
                        a[(0, ip)] = c;
                        a[(0, im)] = -c;
                        b[(0, ip)] = -s;
                        b[(0, im)] = -s;
                        // τ'(v+) - τ'(v-) - t τ(v-) = 0
                        a[(1, ip)] = s;
                        a[(1, im)] = -s - t * c;
                        b[(1, ip)] = c;
                        b[(1, im)] = c - t * s;
                    }
                    ExtReal::Infinity => {
                        // τ(v+) = 0, τ(v-) = 0
                        a[(0, ip)] = c;
                        b[(0, ip)] = -s;
                        a[(1, im)] = c;
                        b[(1, im)] = s;
                    }
                }
            }
            VertexCondition::RobinFixed { alpha } => {
                if d != 1 {
                    return Err(Error::Solver(format!(
                        "Robin condition at vertex {} of degree {d}",
                        g.name(v)
                    )));
                }
                let (s, c) = alpha.sin_cos();
                let along = if inc[0].end == End::Tail { 1.0 } else { -1.0 };
                a[(0, 0)] = c;
                b[(0, 0)] = -s * along;
            }
            VertexCondition::Unitary(u) => return unitary_real_form(u, d),
        }
        Ok(RealForm { a, b })
    }

    /// Number of rows this condition contributes that carry boundary data when
    /// the coupling is infinite (used by the Robin map).
    pub fn is_infinite_coupling(&self) -> bool {
        matches!(
            self,
            VertexCondition::DeltaAlpha { t: ExtReal::Infinity, .. }
                | VertexCondition::Delta { t: ExtReal::Infinity }
        )
    }
}

fn unitary_real_form(u: &DMatrix<Complex64>, d: usize) -> Result<RealForm> {
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::Solver(format!("unitary of size {} at a degree-{d} vertex", u.nrows())));
    }
    let eye = DMatrix::<Complex64>::identity(d, d);
    let dev = (u.adjoint() * u - &eye).norm();
    if dev > 1e-10 {
        return Err(Error::Solver(format!("matrix is not unitary (deviation {dev:e})")));
    }
    let i = Complex64::new(0.0, 1.0);
    let ca = (u - &eye) * i;
    let cb = u + &eye;
    // Real rows spanning the same space: stack real and imaginary parts.
    let mut m = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for r in 0..d {
        for j in 0..d {
            m[(r, j)] = ca[(r, j)].re;
            m[(r, d + j)] = cb[(r, j)].re;
            m[(d + r, j)] = ca[(r, j)].im;
            m[(d + r, d + j)] = cb[(r, j)].im;
        }
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..2 * d).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let smax = svd.singular_values[order[0]];
    let rank = order
        .iter()
        .filter(|&&k| svd.singular_values[k] > 1e-10 * smax)
        .count();
    if rank != d {
        return Err(Error::Solver(
            "unitary condition does not have a real form (complex coupling)".into(),
        ));
    }
    let mut a = DMatrix::zeros(d, d);
    let mut b = DMatrix::zeros(d, d);
    for (r, &k) in order.iter().take(d).enumerate() {
        for j in 0..d {
            a[(r, j)] = vt[(k, j)];
            b[(r, j)] = vt[(k, d + j)];
        }
    }
    Ok(RealForm { a, b })
}

/// U = -(A - iB)^{-1}(A + iB) for a condition in real form.
pub fn unitary_from_real(form: &RealForm) -> Result<DMatrix<Complex64>> {
    let i = Complex64::new(0.0, 1.0);
    let a = form.a.map(|x| Complex64::new(x, 0.0));
    let b = form.b.map(|x| Complex64::new(x, 0.0));
    let minus = &a - &b * i;
    let plus = &a + &b * i;
    let inv = minus
        .try_inverse()
        .ok_or_else(|| Error::Solver("A - iB is singular: condition is not self-adjoint".into()))?;
    Ok(-(inv * plus))
}

/// The unitary matrix of the condition at v.
pub fn vertex_unitary(cond: &VertexCondition, g: &MetricGraph, v: VertexId) -> Result<DMatrix<Complex64>> {
    if let VertexCondition::Unitary(u) = cond {
        return Ok(u.clone());
    }
    unitary_from_real(&cond.real_form(g, v)?)
}

/// A metric graph together with one condition per vertex.
#[derive(Clone, Debug)]
pub struct BoundaryProblem {
    graph: MetricGraph,
    conditions: Vec<VertexCondition>,
    forms: Vec<RealForm>,
}

impl BoundaryProblem {
    pub fn new(graph: MetricGraph, conditions: Vec<VertexCondition>) -> Result<Self> {
        if conditions.len() != graph.vertex_count() {
            return Err(Error::Solver(format!(
                "{} conditions for {} vertices",
                conditions.len(),
                graph.vertex_count()
            )));
        }
        let forms = conditions
            .iter()
            .enumerate()
            .map(|(v, c)| c.real_form(&graph, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundaryProblem { graph, conditions, forms })
    }

    /// Neumann-Kirchhoff conditions at every vertex.
    pub fn neumann_kirchhoff(graph: &MetricGraph) -> Self {
        let n = graph.vertex_count();
        BoundaryProblem::new(graph.clone(), vec![VertexCondition::NeumannKirchhoff; n])
            .expect("NK is valid everywhere")
    }

    /// Dirichlet (f = 0) at every degree-one vertex, NK elsewhere.
    pub fn dirichlet_ends(graph: &MetricGraph) -> Self {
        let conds = (0..graph.vertex_count())
            .map(|v| {
                if graph.degree(v) == 1 {
                    VertexCondition::RobinFixed { alpha: 0.0 }
                } else {
                    VertexCondition::NeumannKirchhoff
                }
            })
            .collect();
        BoundaryProblem::new(graph.clone(), conds).expect("valid")
    }

    /// H_α^B(t): δ_α(t) at every vertex of `b`, NK elsewhere.
    pub fn delta_alpha(graph: &MetricGraph, b: &[VertexId], alpha: f64, t: ExtReal) -> Result<Self> {
        let mut conds = vec![VertexCondition::NeumannKirchhoff; graph.vertex_count()];
        for &v in b {
            conds[v] = VertexCondition::DeltaAlpha { alpha, t };
        }
        BoundaryProblem::new(graph.clone(), conds)
    }

    /// Replace the condition at one vertex.
    pub fn with(&self, v: VertexId, cond: VertexCondition) -> Result<Self> {
        let mut conds = self.conditions.clone();
        conds[v] = cond;
        BoundaryProblem::new(self.graph.clone(), conds)
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn conditions(&self) -> &[VertexCondition] {
        &self.conditions
    }

    pub fn condition(&self, v: VertexId) -> &VertexCondition {
        &self.conditions[v]
    }

    pub fn form(&self, v: VertexId) -> &RealForm {
        &self.forms[v]
    }

    pub fn dimension(&self) -> usize {
        2 * self.graph.edge_count()
    }

    /// Global (A, B), rows grouped by vertex, columns indexed by edge-end.
    /// Each row is scaled to unit Euclidean norm.
    pub(crate) fn global_form(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dimension();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        let mut row = 0;
        for v in 0..self.graph.vertex_count() {
            let f = &self.forms[v];
            let inc = self.graph.incident(v);
            for r in 0..inc.len() {
                let mut norm = 0.0;
                for j in 0..inc.len() {
                    norm += f.a[(r, j)].powi(2) + f.b[(r, j)].powi(2);
                }
                let norm = norm.sqrt();
                for (j, end) in inc.iter().enumerate() {
                    a[(row, end.index())] = f.a[(r, j)] / norm;
                    b[(row, end.index())] = f.b[(r, j)] / norm;
                }
                row += 1;
            }
        }
        (a, b)
    }

    /// Residual of every condition row for given endpoint values/derivatives.
    pub(crate) fn condition_residual(&self, values: &DVector<f64>, outgoing: &DVector<f64>) -> f64 {
        let (a, b) = self.global_form();
        (a * values + b * outgoing).amax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MetricGraph;

    #[test]
    fn delta_zero_matches_standard_form() {
        let g = MetricGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        for t in [-2.0, 0.0, 0.7] {
            let da = VertexCondition::DeltaAlpha { alpha: 0.0, t: ExtReal::Finite(t) }
                .real_form(&g, 1)
                .unwrap();
            let d = VertexCondition::Delta { t: ExtReal::Finite(t) }.real_form(&g, 1).unwrap();
            let u1 = unitary_from_real(&da).unwrap();
            let u2 = unitary_from_real(&d).unwrap();
            assert!((u1 - u2).norm() < 1e-12);
        }
    }

    #[test]
    fn real_form_is_lagrangian() {
        let g = MetricGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        for alpha in [0.0, 0.4, 1.3, 2.9] {
            for t in [ExtReal::Finite(-1.5), ExtReal::Finite(3.0), ExtReal::Infinity] {
                let f = VertexCondition::DeltaAlpha { alpha, t }.real_form(&g, 1).unwrap();
                let m = &f.a * f.b.transpose();
                assert!((&m - m.transpose()).amax() < 1e-14);
            }
        }
    }

    #[test]
    fn nk_unitary() {
        let g = MetricGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let u = vertex_unitary(&VertexCondition::NeumannKirchhoff, &g, 0).unwrap();
        let d = 3.0;
        for r in 0..3 {
            for c in 0..3 {
                let want = 2.0 / d - if r == c { 1.0 } else { 0.0 };
                assert!((u[(r, c)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn unitary_round_trip() {
        let g = MetricGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.3)]).unwrap();
        let cond = VertexCondition::DeltaAlpha { alpha: 0.9, t: ExtReal::Finite(1.7) };
        let u = vertex_unitary(&cond, &g, 1).unwrap();
        let back = VertexCondition::Unitary(u.clone());
        let u2 = vertex_unitary(&back, &g, 1).unwrap();
        assert!((u.clone() - u2).norm() < 1e-12);
        let f = back.real_form(&g, 1).unwrap();
        let u3 = unitary_from_real(&f).unwrap();
        assert!((u - u3).norm() < 1e-10);
    }

    #[test]
    fn theta_chart() {
        assert_eq!(ExtReal::Infinity.theta(), PI);
        assert_eq!(ExtReal::Finite(0.0).theta(), 0.0);
        assert_eq!(ExtReal::from_theta(PI), ExtReal::Infinity);
        assert_eq!(ExtReal::from_theta(-PI), ExtReal::Infinity);
        match ExtReal::from_theta(ExtReal::Finite(-3.0).theta() + 2.0 * PI) {
            ExtReal::Finite(t) => assert!((t + 3.0).abs() < 1e-12),
            _ => panic!(),
        }
    }
}
