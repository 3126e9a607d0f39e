//! Secular matrix of a boundary problem and an exact eigenvalue count.

use crate::basis::{dirichlet_count, edge_dtn, endpoint_basis, fundamental_pair, EndpointBasis};
use crate::conditions::BoundaryProblem;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Endpoint data of (c, s) regardless of the sign of λ.
fn cs_basis(lambda: f64, l: f64) -> EndpointBasis {
    let f = fundamental_pair(lambda, l);
    EndpointBasis {
        tail: [(1.0, 0.0), (0.0, 1.0)],
        head: [(f.c, f.dc), (f.s, f.ds)],
        to_cs: [[1.0, 0.0], [0.0, 1.0]],
    }
}

/// Condition rows applied to per-edge solution coefficients.
pub(crate) fn assemble_with(p: &BoundaryProblem, bases: &[EndpointBasis]) -> DMatrix<f64> {
    assemble_rows(p, bases).0
}

/// The secular matrix together with, per row, the largest sum of absolute
/// contributions to one entry (a scale that is immune to cancellation).
fn assemble_rows(p: &BoundaryProblem, bases: &[EndpointBasis]) -> (DMatrix<f64>, Vec<f64>) {
    let g = p.graph();
    let n = p.dimension();
    let (a, b) = p.global_form();
    let mut m = DMatrix::zeros(n, n);
    let mut mag = DMatrix::<f64>::zeros(n, n);
    for (e, basis) in bases.iter().enumerate() {
        for (k, ends, sign) in [(2 * e, &basis.tail, 1.0), (2 * e + 1, &basis.head, -1.0)] {
            for row in 0..n {
                let (ar, br) = (a[(row, k)], b[(row, k)]);
                if ar == 0.0 && br == 0.0 {
                    continue;
                }
                for j in 0..2 {
                    m[(row, 2 * e + j)] += ar * ends[j].0 + br * sign * ends[j].1;
                    mag[(row, 2 * e + j)] += (ar * ends[j].0).abs() + (br * ends[j].1).abs();
                }
            }
        }
    }
    debug_assert_eq!(g.edge_count() * 2, n);
    let scales = mag.row_iter().map(|r| r.max()).collect();
    (m, scales)
}

/// Secular matrix with every row divided by its cancellation-free magnitude;
/// returns the matrix and the factors applied.
pub(crate) fn assemble_equilibrated(p: &BoundaryProblem, bases: &[EndpointBasis]) -> (DMatrix<f64>, Vec<f64>) {
    let (mut m, mags) = assemble_rows(p, bases);
    let factors: Vec<f64> = mags.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 1.0 }).collect();
    for (mut row, &f) in m.row_iter_mut().zip(&factors) {
        row *= f;
    }
    (m, factors)
}

/// M(λ) with columns (a_e, b_e) against (c, s) on each edge.
pub fn assemble_secular(p: &BoundaryProblem, lambda: f64) -> DMatrix<f64> {
    let bases: Vec<_> = p.graph().edges().iter().map(|e| cs_basis(lambda, e.length)).collect();
    assemble_with(p, &bases)
}

/// Row-equilibrated secular matrix in the well-scaled basis, with the bases used.
pub(crate) fn scaled_secular(p: &BoundaryProblem, lambda: f64) -> (DMatrix<f64>, Vec<EndpointBasis>) {
    let bases: Vec<_> = p
        .graph()
        .edges()
        .iter()
        .map(|e| endpoint_basis(lambda, e.length))
        .collect();
    let (m, _) = assemble_equilibrated(p, &bases);
    (m, bases)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Indicator {
    /// Determinant of the row-equilibrated matrix; changes sign at odd-multiplicity roots.
    pub det: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Indicator {
    pub fn relative_sigma(&self) -> f64 {
        self.sigma_min / sigma_ref(self.sigma_max)
    }
}

pub fn secular_indicator(p: &BoundaryProblem, lambda: f64) -> Indicator {
    let (m, _) = scaled_secular(p, lambda);
    let det = m.clone().lu().determinant();
    let sv = m.singular_values();
    Indicator { det, sigma_min: sv.min(), sigma_max: sv.max() }
}

pub(crate) fn secular_det(p: &BoundaryProblem, lambda: f64) -> f64 {
    scaled_secular(p, lambda).0.lu().determinant()
}

/// Reference scale for singular values of a row-equilibrated matrix. Rows
/// have unit magnitude, so a matrix whose entries all cancel to roundoff is
/// measured against 1 rather than against its own σ_max.
pub(crate) fn sigma_ref(sigma_max: f64) -> f64 {
    sigma_max.max(1.0)
}

/// σ_min / max(σ_max, 1) of the scaled secular matrix.
pub(crate) fn relative_sigma(p: &BoundaryProblem, lambda: f64) -> f64 {
    let sv = scaled_secular(p, lambda).0.singular_values();
    sv.min() / sigma_ref(sv.max())
}

/// Number of eigenvalues strictly below λ, counted with multiplicity.
///
/// Splits the graph into edges with Dirichlet ends and counts the negative
/// directions of the vertex form y ↦ yᵀ(B D_λ Bᵀ - B Aᵀ)y, where D_λ is the
/// edge Dirichlet-to-Neumann matrix and (A, B) the condition rows. Edges
/// close to a Dirichlet resonance are split by a virtual Neumann-Kirchhoff
/// vertex so that D_λ stays well conditioned.
pub fn count_below(p: &BoundaryProblem, lambda: f64) -> Result<usize> {
    let g = p.graph();
    let n0 = p.dimension();
    let k = lambda.max(0.0).sqrt();
    // (end at x = 0, end at x = ℓ, length) of every piece.
    let mut pieces: Vec<(usize, usize, f64)> = Vec::new();
    let mut joints: Vec<(usize, usize)> = Vec::new();
    let mut next = n0;
    for (e, edge) in g.edges().iter().enumerate() {
        let l = edge.length;
        if lambda > 0.0 && (k * l).sin().abs() < SPLIT_THRESHOLD {
            let frac = SPLIT_FRACTIONS
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    let q = |f: f64| (k * l * f).sin().abs().min((k * l * (1.0 - f)).sin().abs());
                    q(a).total_cmp(&q(b))
                })
                .expect("nonempty");
            pieces.push((2 * e, next, frac * l));
            pieces.push((next + 1, 2 * e + 1, (1.0 - frac) * l));
            joints.push((next, next + 1));
            next += 2;
        } else {
            pieces.push((2 * e, 2 * e + 1, l));
        }
    }
    let n = next;
    let mut lam = lambda;
    for _ in 0..8 {
        if pieces.iter().all(|pc| edge_dtn(lam, pc.2).is_some()) {
            break;
        }
        lam -= 1e-10 * lam.abs().max(1.0);
    }
    let mut d = DMatrix::zeros(n, n);
    let mut dirichlet = 0;
    for &(t, h, l) in &pieces {
        let (cs, inv) = edge_dtn(lam, l)
            .ok_or_else(|| Error::Solver(format!("count at Dirichlet point λ = {lambda}")))?;
        d[(t, t)] = cs;
        d[(h, h)] = cs;
        d[(t, h)] = -inv;
        d[(h, t)] = -inv;
        dirichlet += dirichlet_count(lam, l);
    }
    let (a0, b0) = p.global_form();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (n0, n0)).copy_from(&a0);
    b.view_mut((0, 0), (n0, n0)).copy_from(&b0);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for (j, &(x, y)) in joints.iter().enumerate() {
        let row = n0 + 2 * j;
        a[(row, x)] = r;
        a[(row, y)] = -r;
        b[(row + 1, x)] = r;
        b[(row + 1, y)] = r;
    }
    let q = &b * d * b.transpose() - &b * a.transpose();
    let q = (&q + q.transpose()) * 0.5;
    let svd = b.transpose().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..n)
        .filter(|&k| svd.singular_values[k] > 1e-12 * smax.max(1e-300))
        .collect();
    if keep.is_empty() {
        return Ok(dirichlet);
    }
    let mut vr = DMatrix::zeros(n, keep.len());
    for (j, &k) in keep.iter().enumerate() {
        for i in 0..n {
            vr[(i, j)] = vt[(k, i)];
        }
    }
    let qr = vr.transpose() * q * &vr;
    let qr = (&qr + qr.transpose()) * 0.5;
    let eig = qr.symmetric_eigenvalues();
    let scale = eig.amax().max(1e-300);
    let mor = eig.iter().filter(|&&x| x < -1e-13 * scale).count();
    Ok(dirichlet + mor)
}

const SPLIT_THRESHOLD: f64 = 0.05;
const SPLIT_FRACTIONS: [f64; 3] = [0.381966011250105, 0.276393202250021, 0.447213595499958];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{BoundaryProblem, ExtReal, VertexCondition};
    use crate::graph::MetricGraph;
    use std::f64::consts::PI;

    fn interval() -> MetricGraph {
        MetricGraph::from_edges(2, &[(0, 1, PI)]).unwrap()
    }

    #[test]
    fn interval_singular_at_one() {
        let p = BoundaryProblem::neumann_kirchhoff(&interval());
        assert!(secular_indicator(&p, 1.0).relative_sigma() < 1e-12);
        assert!(secular_indicator(&p, 0.5).relative_sigma() > 1e-3);
        assert_eq!(assemble_secular(&p, 0.3).nrows(), 2);
    }

    #[test]
    fn interval_counts() {
        let p = BoundaryProblem::neumann_kirchhoff(&interval());
        let d = BoundaryProblem::dirichlet_ends(&interval());
        for (lam, nk, dir) in [(-3.0, 0, 0), (0.5, 1, 0), (3.9, 2, 1), (4.1, 3, 2), (24.0, 5, 4)] {
            assert_eq!(count_below(&p, lam).unwrap(), nk, "NK at {lam}");
            assert_eq!(count_below(&d, lam).unwrap(), dir, "Dirichlet at {lam}");
        }
    }

    #[test]
    fn cycle_counts() {
        let g = MetricGraph::from_edges(1, &[(0, 0, 2.0 * PI)]).unwrap();
        let p = BoundaryProblem::neumann_kirchhoff(&g);
        assert_eq!(count_below(&p, 0.5).unwrap(), 1);
        assert_eq!(count_below(&p, 1.5).unwrap(), 3);
        assert_eq!(count_below(&p, 4.5).unwrap(), 5);
    }

    #[test]
    fn counts_at_dirichlet_points() {
        // λ = 1 is a Dirichlet eigenvalue of the edge and an NK eigenvalue.
        let p = BoundaryProblem::neumann_kirchhoff(&interval());
        assert_eq!(count_below(&p, 1.0).unwrap(), 1);
        assert_eq!(count_below(&p, 1.0 + 1e-6).unwrap(), 2);
    }

    #[test]
    fn negative_delta_has_negative_eigenvalue() {
        // Interval [0,2] with δ(t) at the midpoint: one negative eigenvalue iff t < 0.
        let g = MetricGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        for (t, want) in [(-1.0, 1), (1.0, 0)] {
            let p = BoundaryProblem::delta_alpha(&g, &[1], 0.0, ExtReal::Finite(t)).unwrap();
            assert_eq!(count_below(&p, -1e-9).unwrap(), want);
        }
        let p = BoundaryProblem::neumann_kirchhoff(&g)
            .with(1, VertexCondition::Delta { t: ExtReal::Finite(-50.0) })
            .unwrap();
        // κ tanh κ = 25 at κ ≈ 25, so the ground state sits near -625.
        assert_eq!(count_below(&p, -630.0).unwrap(), 0);
        assert_eq!(count_below(&p, -620.0).unwrap(), 1);
    }

    #[test]
    fn sign_change_through_simple_root() {
        let p = BoundaryProblem::neumann_kirchhoff(&interval());
        let a = secular_det(&p, 0.9);
        let b = secular_det(&p, 1.1);
        assert!(a * b < 0.0);
    }
}
