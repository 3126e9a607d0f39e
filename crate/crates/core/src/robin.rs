//! Robin points and Robin domains of eigenfunctions.

use crate::basis::{mixed_trace, reduce_angle};
use crate::error::{Error, Result};
use crate::graph::{CutResult, End, MetricGraph, PointOnGraph, Subdivision, VertexId};
use crate::solver::EigenFunction;
use std::f64::consts::PI;

/// Roots closer than this fraction of ℓ_e to an edge end are placed at the vertex.
pub const SNAP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct RobinPointSet {
    pub alpha: f64,
    pub lambda: f64,
    /// Canonical order: by edge, then coordinate.
    pub points: Vec<PointOnGraph>,
}

impl RobinPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Zeros of τ_α f in the interior of Γ (including degree-two vertices).
pub fn robin_points(g: &MetricGraph, f: &EigenFunction, alpha: f64) -> Result<RobinPointSet> {
    let alpha = reduce_angle(alpha);
    let lambda = f.lambda;
    let roots: Vec<Vec<f64>> = if lambda > 0.0 {
        closed_form_roots(g, f, alpha)?
    } else {
        (0..g.edge_count()).map(|e| bisection_roots(g, f, alpha, e)).collect()
    };
    let mut points: Vec<PointOnGraph> = Vec::new();
    for (e, xs) in roots.into_iter().enumerate() {
        let l = g.length(e);
        for x in xs {
            let end = if x <= SNAP_TOL * l {
                Some(End::Tail)
            } else if x >= l * (1.0 - SNAP_TOL) {
                Some(End::Head)
            } else {
                None
            };
            let pt = match end {
                None => g.point(e, x)?,
                Some(end) => {
                    let v = g.edge(e).vertex_at(end);
                    match g.degree(v) {
                        1 => continue,
                        2 => g.point(e, if end == End::Tail { 0.0 } else { l })?,
                        d => {
                            return Err(Error::Genericity(format!(
                                "Robin point (α = {alpha}) at vertex {} of degree {d}",
                                g.name(v)
                            )))
                        }
                    }
                }
            };
            if !points.contains(&pt) {
                points.push(pt);
            }
        }
    }
    points.sort_by(|a, b| a.edge.cmp(&b.edge).then(a.x.total_cmp(&b.x)));
    Ok(RobinPointSet { alpha, lambda, points })
}

/// τ_α f_e(x) = P cos kx + Q sin kx; zeros at (atan2(P, -Q) mod π + mπ)/k.
fn closed_form_roots(g: &MetricGraph, f: &EigenFunction, alpha: f64) -> Result<Vec<Vec<f64>>> {
    let k = f.lambda.sqrt();
    let (sa, ca) = alpha.sin_cos();
    let pq: Vec<(f64, f64)> = f
        .coeffs
        .iter()
        .map(|&(a, b)| {
            let (a_, b_) = (a, b / k);
            (a_ * ca - k * b_ * sa, b_ * ca + k * a_ * sa)
        })
        .collect();
    let amp = pq.iter().fold(0.0f64, |m, &(p, q)| m.max(p.hypot(q)));
    let mut out = Vec::with_capacity(pq.len());
    for (e, &(p, q)) in pq.iter().enumerate() {
        if p.hypot(q) <= 1e-10 * amp {
            return Err(Error::Genericity(format!(
                "τ_α f vanishes identically on edge {e} (α = {alpha})"
            )));
        }
        let l = g.length(e);
        let theta0 = p.atan2(-q).rem_euclid(PI);
        let mut xs = Vec::new();
        let mut m = 0.0;
        loop {
            let x = (theta0 + m * PI) / k;
            if x > l * (1.0 + SNAP_TOL) {
                break;
            }
            xs.push(x.min(l));
            m += 1.0;
        }
        // θ0 just below π can also represent a root at x = 0.
        if (PI - theta0) / k <= SNAP_TOL * l {
            xs.insert(0, 0.0);
        }
        out.push(xs);
    }
    Ok(out)
}

fn tau(g: &MetricGraph, f: &EigenFunction, alpha: f64, e: usize, x: f64) -> f64 {
    mixed_trace(alpha, f.trace(g, e, x.clamp(0.0, g.length(e))).expect("clamped")).tau
}

fn bisection_roots(g: &MetricGraph, f: &EigenFunction, alpha: f64, e: usize) -> Vec<f64> {
    const SAMPLES: usize = 64;
    let l = g.length(e);
    let xs: Vec<f64> = (0..=SAMPLES).map(|i| l * i as f64 / SAMPLES as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| tau(g, f, alpha, e, x)).collect();
    let mut roots = Vec::new();
    for i in 0..SAMPLES {
        if vals[i] == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if vals[i] * vals[i + 1] < 0.0 {
            let (mut a, mut b) = (xs[i], xs[i + 1]);
            let sa = vals[i].signum();
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let v = tau(g, f, alpha, e, m);
                if v == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if v.signum() == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    if vals[SAMPLES] == 0.0 {
        roots.push(l);
    }
    roots
}

#[derive(Clone, Debug)]
pub struct RobinDomainPartition {
    /// Γ with every interior Robin point turned into a degree-two vertex.
    pub subdivision: Subdivision,
    /// The Robin points as vertices of the subdivided graph.
    pub cut_set: Vec<VertexId>,
    pub cut: CutResult,
    /// Number of Robin domains ν_α(f).
    pub nu: usize,
}

impl RobinDomainPartition {
    /// Edge sets of the Robin domains (edges of the cut graph).
    pub fn domains(&self) -> Vec<Vec<usize>> {
        let g = &self.cut.graph;
        let mut out = vec![Vec::new(); g.n_components()];
        for (e, edge) in g.edges().iter().enumerate() {
            out[g.component_of(edge.from)].push(e);
        }
        out
    }

    /// Whether every domain is a tree.
    pub fn all_trees(&self) -> bool {
        self.cut.graph.betti() == 0
    }
}

/// Subdivide at interior Robin points and cut at all of them.
pub fn robin_domains(g: &MetricGraph, pts: &RobinPointSet) -> Result<RobinDomainPartition> {
    let (sub, cut_set) = subdivide_at(g, &pts.points)?;
    let cut = sub.graph.cut_at(&cut_set)?;
    let nu = cut.n_components();
    Ok(RobinDomainPartition { subdivision: sub, cut_set, cut, nu })
}

/// Turn a list of points into degree-two vertices; returns the subdivision and the vertex ids.
pub fn subdivide_at(g: &MetricGraph, points: &[PointOnGraph]) -> Result<(Subdivision, Vec<VertexId>)> {
    let interior: Vec<PointOnGraph> = points.iter().copied().filter(|p| p.is_interior()).collect();
    let sub = g.insert_degree_two(&interior)?;
    let mut k = 0;
    let mut ids = Vec::with_capacity(points.len());
    for p in points {
        match p.vertex {
            Some(v) => ids.push(v),
            None => {
                ids.push(sub.created[k]);
                k += 1;
            }
        }
    }
    Ok((sub, ids))
}

/// Both sides of β(Γ) = |P_α(f)| - ν_α(f) + 1.
pub fn euler_identity_check(g: &MetricGraph, pts: &RobinPointSet, part: &RobinDomainPartition) -> (i64, i64) {
    (g.betti(), pts.len() as i64 - part.nu as i64 + 1)
}

/// The same function on a subdivided graph.
pub fn transfer(f: &EigenFunction, old: &MetricGraph, sub: &Subdivision) -> EigenFunction {
    let coeffs = sub
        .origin
        .iter()
        .map(|&(e, offset)| {
            let t = f.trace(old, e, offset.min(old.length(e))).expect("in range");
            (t.value, t.deriv)
        })
        .collect();
    EigenFunction { lambda: f.lambda, coeffs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn cos2x() -> (MetricGraph, EigenFunction) {
        let g = MetricGraph::from_edges(2, &[(0, 1, PI)]).unwrap();
        let f = EigenFunction { lambda: 4.0, coeffs: vec![(1.0, 0.0)] };
        (g, f)
    }

    #[test]
    fn nodal_points_of_cos2x() {
        let (g, f) = cos2x();
        let p = robin_points(&g, &f, 0.0).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p.points[0].x - FRAC_PI_4).abs() < 1e-12);
        assert!((p.points[1].x - 3.0 * FRAC_PI_4).abs() < 1e-12);
        let d = robin_domains(&g, &p).unwrap();
        assert_eq!(d.nu, 3);
        assert_eq!(euler_identity_check(&g, &p, &d), (0, 0));
    }

    #[test]
    fn neumann_points_of_cos2x() {
        let (g, f) = cos2x();
        let p = robin_points(&g, &f, FRAC_PI_2).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.points[0].x - FRAC_PI_2).abs() < 1e-12);
        assert_eq!(robin_domains(&g, &p).unwrap().nu, 2);
    }

    #[test]
    fn degree_two_vertex_point_deduplicated() {
        // cos x on [0, π] split at π/2: the nodal point is the vertex.
        let g = MetricGraph::from_edges(3, &[(0, 1, FRAC_PI_2), (1, 2, FRAC_PI_2)]).unwrap();
        let f = EigenFunction { lambda: 1.0, coeffs: vec![(1.0, 0.0), (0.0, -1.0)] };
        let p = robin_points(&g, &f, 0.0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.points[0].vertex, Some(1));
        let d = robin_domains(&g, &p).unwrap();
        assert_eq!(d.nu, 2);
    }

    #[test]
    fn transfer_preserves_values() {
        let (g, f) = cos2x();
        let pt = g.point(0, 1.0).unwrap();
        let sub = g.insert_degree_two(&[pt]).unwrap();
        let h = transfer(&f, &g, &sub);
        assert!((h.value(&sub.graph, 1, 0.5) - f.value(&g, 0, 1.5)).abs() < 1e-12);
    }
}
