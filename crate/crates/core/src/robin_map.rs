//! Two-sided Robin maps Λ_α^B(μ), Dirichlet-to-Neumann maps and their inertia.

use crate::basis::{endpoint_basis, reduce_angle, EndpointBasis};
use crate::conditions::{BoundaryProblem, ExtReal, VertexCondition};
use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, VertexId};
use crate::secular::{assemble_equilibrated, count_below, relative_sigma, sigma_ref};
use crate::solver::{eigenvalues_in, nullity, EigenFunction, NULLITY_TOL};
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inertia {
    pub mor: usize,
    pub pos: usize,
    pub null: usize,
}

/// Counts of eigenvalues below -τ, above τ and in [-τ, τ], τ = 1e-8·‖Λ‖.
pub fn inertia(m: &DMatrix<f64>) -> Inertia {
    if m.nrows() == 0 {
        return Inertia { mor: 0, pos: 0, null: 0 };
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let tau = 1e-8 * eig.amax();
    Inertia {
        mor: eig.iter().filter(|&&x| x < -tau).count(),
        pos: eig.iter().filter(|&&x| x > tau).count(),
        null: eig.iter().filter(|&&x| x.abs() <= tau).count(),
    }
}

#[derive(Clone, Debug)]
pub struct RobinMap {
    /// Symmetrized matrix (Λ + Λᵀ)/2.
    pub matrix: DMatrix<f64>,
    pub b: Vec<VertexId>,
    /// None for the Dirichlet-to-Neumann map at arbitrary vertices.
    pub alpha: Option<f64>,
    pub mu: f64,
    /// ‖Λ - Λᵀ‖ / ‖Λ‖ before symmetrization.
    pub asymmetry: f64,
    pub inertia: Inertia,
}

impl RobinMap {
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Which map to build at the vertices of B.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coupling {
    /// Rotated δ-coupling at degree-two vertices.
    Alpha(f64),
    /// Standard δ-coupling at vertices of any degree (α = 0 only).
    Delta,
}

impl Coupling {
    pub fn condition(self, t: ExtReal) -> VertexCondition {
        match self {
            Coupling::Alpha(alpha) => VertexCondition::DeltaAlpha { alpha, t },
            Coupling::Delta => VertexCondition::Delta { t },
        }
    }
}

/// The problem on Γ_B with τ_α f = 0 at both daughters of each cut point.
pub fn decoupled_problem(g: &MetricGraph, b: &[VertexId], alpha: f64) -> Result<BoundaryProblem> {
    decoupled_from(&BoundaryProblem::neumann_kirchhoff(g), b, alpha)
}

/// As `decoupled_problem`, keeping the conditions of `base` away from B.
pub fn decoupled_from(base: &BoundaryProblem, b: &[VertexId], alpha: f64) -> Result<BoundaryProblem> {
    let g = base.graph();
    let cut = g.cut_at(b)?;
    let cg = cut.graph;
    let mut conds: Vec<VertexCondition> = base.conditions().to_vec();
    conds.resize(cg.vertex_count(), VertexCondition::NeumannKirchhoff);
    for &(m, p) in &cut.daughters {
        conds[m] = VertexCondition::RobinFixed { alpha };
        conds[p] = VertexCondition::RobinFixed { alpha };
    }
    BoundaryProblem::new(cg, conds)
}

/// Linear system of the boundary-value problem with data on B.
struct BvpSystem {
    matrix: DMatrix<f64>,
    bases: Vec<EndpointBasis>,
    /// For each vertex of B, the equation rows carrying ξ(v) and the row scale.
    data_rows: Vec<Vec<(usize, f64)>>,
}

fn bvp_system(base: &BoundaryProblem, b: &[VertexId], coupling: Coupling, mu: f64) -> Result<(BoundaryProblem, BvpSystem)> {
    let mut p = base.clone();
    for &v in b {
        p = p.with(v, coupling.condition(ExtReal::Infinity))?;
    }
    let g = p.graph();
    let bases: Vec<_> = g.edges().iter().map(|e| endpoint_basis(mu, e.length)).collect();
    let (matrix, scales) = assemble_equilibrated(&p, &bases);
    let mut offsets = Vec::with_capacity(g.vertex_count());
    let mut acc = 0;
    for v in 0..g.vertex_count() {
        offsets.push(acc);
        acc += g.degree(v);
    }
    let data_rows = b
        .iter()
        .map(|&v| (0..g.degree(v)).map(|k| (offsets[v] + k, scales[offsets[v] + k])).collect())
        .collect();
    Ok((p, BvpSystem { matrix, bases, data_rows }))
}

fn well_defined_matrix(m: &DMatrix<f64>) -> bool {
    let sv = m.singular_values();
    sv.min() > NULLITY_TOL * sigma_ref(sv.max())
}

/// Whether μ lies off the spectrum of H_α^B(∞).
pub fn is_well_defined(g: &MetricGraph, b: &[VertexId], alpha: f64, mu: f64) -> Result<bool> {
    let base = BoundaryProblem::neumann_kirchhoff(g);
    let (_, sys) = bvp_system(&base, b, Coupling::Alpha(alpha), mu)?;
    Ok(well_defined_matrix(&sys.matrix))
}

fn solve_system(sys: &BvpSystem, xi: &[f64]) -> Result<DVector<f64>> {
    let n = sys.matrix.nrows();
    let mut rhs = DVector::zeros(n);
    for (rows, &x) in sys.data_rows.iter().zip(xi) {
        for &(r, s) in rows {
            rhs[r] = x * s;
        }
    }
    sys.matrix
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllDefined("boundary-value system is singular".into()))
}

fn to_eigenfunction(mu: f64, sys: &BvpSystem, x: &DVector<f64>) -> EigenFunction {
    let coeffs = sys
        .bases
        .iter()
        .enumerate()
        .map(|(e, bs)| {
            let t = &bs.to_cs;
            let (x0, x1) = (x[2 * e], x[2 * e + 1]);
            (t[0][0] * x0 + t[0][1] * x1, t[1][0] * x0 + t[1][1] * x1)
        })
        .collect();
    EigenFunction { lambda: mu, coeffs }
}

/// Value and derivative along the edge at one end, from the solution vector.
fn end_values(sys: &BvpSystem, x: &DVector<f64>, e: usize, end: End) -> (f64, f64) {
    let pair = match end {
        End::Tail => &sys.bases[e].tail,
        End::Head => &sys.bases[e].head,
    };
    let (x0, x1) = (x[2 * e], x[2 * e + 1]);
    (x0 * pair[0].0 + x1 * pair[1].0, x0 * pair[0].1 + x1 * pair[1].1)
}

/// Solution f^ξ of -f'' = μ f with τ_α f(v±) = ξ(v) on B and NK elsewhere.
pub fn solve_bvp(g: &MetricGraph, b: &[VertexId], alpha: f64, mu: f64, xi: &[f64]) -> Result<EigenFunction> {
    if xi.len() != b.len() {
        return Err(Error::Solver("boundary data length differs from |B|".into()));
    }
    let base = BoundaryProblem::neumann_kirchhoff(g);
    let (_, sys) = bvp_system(&base, b, Coupling::Alpha(alpha), mu)?;
    if !well_defined_matrix(&sys.matrix) {
        return Err(Error::IllDefined(format!("μ = {mu} is in the spectrum of the decoupled problem")));
    }
    let x = solve_system(&sys, xi)?;
    Ok(to_eigenfunction(mu, &sys, &x))
}

/// Λ_α^B(μ) for the Neumann-Kirchhoff graph.
pub fn robin_matrix(g: &MetricGraph, b: &[VertexId], alpha: f64, mu: f64) -> Result<RobinMap> {
    map_with_base(&BoundaryProblem::neumann_kirchhoff(g), b, Coupling::Alpha(alpha), mu)
}

/// Dirichlet-to-Neumann map at arbitrary vertices (experimental for degree ≠ 2).
pub fn dtn_matrix(g: &MetricGraph, b: &[VertexId], mu: f64) -> Result<RobinMap> {
    map_with_base(&BoundaryProblem::neumann_kirchhoff(g), b, Coupling::Delta, mu)
}

/// Robin or DtN map at B, with the conditions of `base` elsewhere.
pub fn map_with_base(base: &BoundaryProblem, b: &[VertexId], coupling: Coupling, mu: f64) -> Result<RobinMap> {
    let (p, sys) = bvp_system(base, b, coupling, mu)?;
    if !well_defined_matrix(&sys.matrix) {
        return Err(Error::IllDefined(format!(
            "μ = {mu} is in the spectrum of the decoupled problem; shift the level"
        )));
    }
    let g = p.graph();
    let lu = sys.matrix.clone().lu();
    let k = b.len();
    let mut raw = DMatrix::zeros(k, k);
    for j in 0..k {
        let mut xi = vec![0.0; k];
        xi[j] = 1.0;
        let mut rhs = DVector::zeros(sys.matrix.nrows());
        for (rows, &x) in sys.data_rows.iter().zip(&xi) {
            for &(r, s) in rows {
                rhs[r] = x * s;
            }
        }
        let x = lu
            .solve(&rhs)
            .ok_or_else(|| Error::IllDefined("boundary-value system is singular".into()))?;
        for (i, &w) in b.iter().enumerate() {
            raw[(i, j)] = match coupling {
                Coupling::Alpha(alpha) => {
                    let (minus, plus) = g.sides(w).ok_or_else(|| {
                        Error::Graph(format!("vertex {} is not an oriented degree-two vertex", g.name(w)))
                    })?;
                    let (s, c) = alpha.sin_cos();
                    let (fm, dm) = end_values(&sys, &x, minus.edge, minus.end);
                    let (fp, dp) = end_values(&sys, &x, plus.edge, plus.end);
                    (s * fm + c * dm) - (s * fp + c * dp)
                }
                Coupling::Delta => {
                    let mut sum = 0.0;
                    for end in g.incident(w) {
                        let (_, d) = end_values(&sys, &x, end.edge, end.end);
                        sum += if end.end == End::Tail { d } else { -d };
                    }
                    -sum
                }
            };
        }
    }
    let norm = raw.norm().max(1e-300);
    let asymmetry = (&raw - raw.transpose()).norm() / norm;
    let matrix = (&raw + raw.transpose()) * 0.5;
    let inertia = inertia(&matrix);
    let alpha = match coupling {
        Coupling::Alpha(a) => Some(reduce_angle(a)),
        Coupling::Delta => None,
    };
    Ok(RobinMap { matrix, b: b.to_vec(), alpha, mu, asymmetry, inertia })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonChoice {
    pub lambda: f64,
    pub epsilon: f64,
    /// Count of eigenvalues of H in [λ-ε, λ+ε] equals the multiplicity of λ.
    pub certified_h: bool,
    /// Same for the decoupled problem.
    pub certified_decoupled: bool,
}

impl EpsilonChoice {
    pub fn certified(&self) -> bool {
        self.certified_h && self.certified_decoupled
    }
}

const EPS_CAP: f64 = 0.1;
const EPS_WINDOW: f64 = 0.25;

fn shifted_off(problems: &[&BoundaryProblem], mut x: f64, dir: f64) -> f64 {
    for _ in 0..100 {
        if problems.iter().all(|p| relative_sigma(p, x) > 1e-6) {
            return x;
        }
        x += dir * 1e-3;
    }
    x
}

/// ε with [λ-ε, λ) and (λ, λ+ε] free of the spectra of `h` and `decoupled`.
pub fn epsilon_select(h: &BoundaryProblem, decoupled: &BoundaryProblem, lambda: f64) -> Result<EpsilonChoice> {
    let probs = [h, decoupled];
    let lo = shifted_off(&probs, lambda - EPS_WINDOW, -1.0);
    let hi = shifted_off(&probs, lambda + EPS_WINDOW, 1.0);
    let same = 1e-9 * lambda.abs().max(1.0);
    let mut gap = EPS_WINDOW;
    for p in probs {
        let list = eigenvalues_in(p, lo, hi, crate::solver::DEFAULT_RESOLUTION)?;
        for e in &list.values {
            let d = (e.lambda - lambda).abs();
            if d > same {
                if d < 1e-7 {
                    return Err(Error::Solver(format!(
                        "eigenvalue {} within 1e-7 of λ = {lambda}: degenerate configuration",
                        e.lambda
                    )));
                }
                gap = gap.min(d);
            }
        }
    }
    let epsilon = (gap / 2.0).min(EPS_CAP);
    let certify = |p: &BoundaryProblem| -> Result<bool> {
        let inside = count_below(p, lambda + epsilon)? as i64 - count_below(p, lambda - epsilon)? as i64;
        let mult = if relative_sigma(p, lambda) < NULLITY_TOL { nullity(p, lambda) } else { 0 };
        Ok(inside == mult as i64)
    };
    Ok(EpsilonChoice {
        lambda,
        epsilon,
        certified_h: certify(h)?,
        certified_decoupled: certify(decoupled)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split_interval() -> MetricGraph {
        MetricGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn inertia_examples() {
        assert_eq!(inertia(&DMatrix::identity(3, 3)), Inertia { mor: 0, pos: 3, null: 0 });
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.0, 2.0]));
        assert_eq!(inertia(&d), Inertia { mor: 1, pos: 1, null: 1 });
    }

    #[test]
    fn dtn_of_split_interval() {
        // Neumann ends, cut at the middle, μ = -1: each side contributes tanh 1.
        let g = split_interval();
        let m = robin_matrix(&g, &[1], 0.0, -1.0).unwrap();
        assert!((m.matrix[(0, 0)] - 2.0 * 1f64.tanh()).abs() < 1e-12);
        let d = dtn_matrix(&g, &[1], -1.0).unwrap();
        assert!((d.matrix[(0, 0)] - 2.0 * 1f64.tanh()).abs() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = split_interval();
        let f = solve_bvp(&g, &[1], 0.4, 2.0, &[0.0]).unwrap();
        assert!(f.coeffs.iter().all(|&(a, b)| a == 0.0 && b == 0.0));
    }

    #[test]
    fn well_definedness() {
        let g = split_interval();
        // Dirichlet-Neumann halves of length 1: spectrum ((m + 1/2)π)².
        let first = (std::f64::consts::PI / 2.0).powi(2);
        assert!(is_well_defined(&g, &[1], 0.0, 1.0).unwrap());
        assert!(!is_well_defined(&g, &[1], 0.0, first).unwrap());
        assert!(matches!(robin_matrix(&g, &[1], 0.0, first), Err(Error::IllDefined(_))));
    }

    #[test]
    fn decoupled_spectrum() {
        let g = split_interval();
        let p = decoupled_problem(&g, &[1], 0.0).unwrap();
        assert_eq!(p.graph().n_components(), 2);
        let first = (std::f64::consts::PI / 2.0).powi(2);
        assert_eq!(count_below(&p, first + 1e-6).unwrap(), 2);
        assert_eq!(count_below(&p, first - 1e-6).unwrap(), 0);
    }
}
