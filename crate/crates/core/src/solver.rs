//! Eigenvalues, eigenfunctions and spectral counts of boundary problems.

use crate::basis::{edge_eval, edge_gram, mixed_trace, Derivative, TracePair};
use crate::conditions::BoundaryProblem;
use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, VertexId};
use crate::secular::{count_below, relative_sigma, scaled_secular, secular_det, sigma_ref};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Singular values below this fraction of σ_max count towards the nullity.
pub const NULLITY_TOL: f64 = 1e-8;
pub const DEFAULT_RESOLUTION: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenvalue {
    pub lambda: f64,
    pub mult: usize,
    /// First position of λ in the ordered spectrum (1-based).
    pub n: usize,
    /// Last position of λ in the ordered spectrum.
    pub big_n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenvalueList {
    pub lo: f64,
    pub hi: f64,
    /// Number of eigenvalues below `lo`.
    pub below: usize,
    pub values: Vec<Eigenvalue>,
}

impl EigenvalueList {
    /// Eigenvalues repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<f64> {
        self.values
            .iter()
            .flat_map(|e| std::iter::repeat(e.lambda).take(e.mult))
            .collect()
    }

    pub fn total(&self) -> usize {
        self.values.iter().map(|e| e.mult).sum()
    }
}

fn scale(x: f64) -> f64 {
    x.abs().max(1.0)
}

/// Number of singular values of the scaled secular matrix below NULLITY_TOL·σ_max.
pub fn nullity(p: &BoundaryProblem, lambda: f64) -> usize {
    let sv = scaled_secular(p, lambda).0.singular_values();
    let max = sigma_ref(sv.max());
    sv.iter().filter(|&&s| s < NULLITY_TOL * max).count()
}

/// All eigenvalues in [lo, hi], with their global positions.
pub fn eigenvalues_in(p: &BoundaryProblem, lo: f64, hi: f64, resolution: f64) -> Result<EigenvalueList> {
    if !(lo < hi) || !(resolution > 0.0) {
        return Err(Error::Solver(format!("bad window [{lo}, {hi}] or resolution {resolution}")));
    }
    for x in [lo, hi] {
        if relative_sigma(p, x) < NULLITY_TOL {
            return Err(Error::Solver(format!("window endpoint {x} is at an eigenvalue")));
        }
    }
    let below = count_below(p, lo)?;
    let upto = count_below(p, hi)?;
    let roots = isolate(p, lo, hi, below, upto, resolution)?;
    let mut values = Vec::with_capacity(roots.len());
    let mut n = below + 1;
    for (lambda, mult) in roots {
        values.push(Eigenvalue { lambda, mult, n, big_n: n + mult - 1 });
        n += mult;
    }
    Ok(EigenvalueList { lo, hi, below, values })
}

/// Scan, bracket and bisect; resolve any mismatch against the exact count.
fn isolate(
    p: &BoundaryProblem,
    lo: f64,
    hi: f64,
    c_lo: usize,
    c_hi: usize,
    resolution: f64,
) -> Result<Vec<(f64, usize)>> {
    if c_hi == c_lo {
        return Ok(Vec::new());
    }
    let mut grid = vec![lo];
    let min_step = (hi - lo) / 8.0;
    let mut x = lo;
    while x < hi {
        let h = (resolution * (2.0 * x.max(0.0).sqrt()).max(1.0)).min(min_step);
        x = (x + h).min(hi);
        grid.push(x);
    }
    let det: Vec<f64> = grid.iter().map(|&x| secular_det(p, x)).collect();
    let mut roots: Vec<(f64, usize)> = Vec::new();
    for i in 0..grid.len() - 1 {
        if det[i] == 0.0 {
            continue;
        }
        if det[i] * det[i + 1] < 0.0 || (det[i + 1] == 0.0 && i + 1 == grid.len() - 1) {
            let r = bisect_det(p, grid[i], grid[i + 1], det[i]);
            let m = nullity(p, r);
            if m > 0 {
                roots.push((r, m));
            }
        } else if det[i + 1] == 0.0 {
            let m = nullity(p, grid[i + 1]);
            if m > 0 {
                roots.push((grid[i + 1], m));
            }
        }
    }
    for i in 1..grid.len() - 1 {
        let (a, b, c) = (det[i - 1].abs(), det[i].abs(), det[i + 1].abs());
        let same_sign = det[i - 1] * det[i] > 0.0 && det[i] * det[i + 1] > 0.0;
        if same_sign && b < a && b <= c {
            let (r, s) = golden_min(p, grid[i - 1], grid[i + 1]);
            if s < NULLITY_TOL {
                let m = nullity(p, r);
                if m > 0 {
                    roots.push((r, m));
                }
            }
        }
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    roots.dedup_by(|b, a| {
        if (b.0 - a.0).abs() <= 1e-9 * scale(a.0) {
            a.1 = a.1.max(b.1);
            true
        } else {
            false
        }
    });
    let found: usize = roots.iter().map(|r| r.1).sum();
    if found == c_hi - c_lo {
        return Ok(roots);
    }
    // Mismatch: check each gap between found roots against the exact count.
    let mut cuts = vec![(lo, c_lo)];
    for w in roots.windows(2) {
        let mid = 0.5 * (w[0].0 + w[1].0);
        cuts.push((mid, count_below(p, mid)?));
    }
    cuts.push((hi, c_hi));
    let mut out = Vec::new();
    for k in 0..cuts.len() - 1 {
        let (a, ca) = cuts[k];
        let (b, cb) = cuts[k + 1];
        let inside: Vec<(f64, usize)> = roots.iter().copied().filter(|r| r.0 > a && r.0 < b).collect();
        if inside.iter().map(|r| r.1).sum::<usize>() == cb - ca {
            out.extend(inside);
        } else {
            count_bisect(p, a, b, ca, cb, &mut out)?;
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Locate eigenvalues in (a, b) by bisecting the exact count.
fn count_bisect(
    p: &BoundaryProblem,
    a: f64,
    b: f64,
    ca: usize,
    cb: usize,
    out: &mut Vec<(f64, usize)>,
) -> Result<()> {
    if cb == ca {
        return Ok(());
    }
    if cb < ca {
        return Err(Error::Solver(format!("count decreased on [{a}, {b}]")));
    }
    if b - a <= 1e-12 * scale(a) {
        let r = 0.5 * (a + b);
        out.push((r, cb - ca));
        return Ok(());
    }
    let m = 0.5 * (a + b);
    if m <= a || m >= b {
        out.push((m, cb - ca));
        return Ok(());
    }
    let cm = count_below(p, m)?;
    count_bisect(p, a, m, ca, cm, out)?;
    count_bisect(p, m, b, cm, cb, out)
}

fn bisect_det(p: &BoundaryProblem, mut a: f64, mut b: f64, da: f64) -> f64 {
    let sa = da.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || b - a <= 1e-15 * scale(m) {
            break;
        }
        let dm = secular_det(p, m);
        if dm == 0.0 {
            return m;
        }
        if dm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_min(p: &BoundaryProblem, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = relative_sigma(p, x1);
    let mut f2 = relative_sigma(p, x2);
    for _ in 0..120 {
        if b - a <= 1e-14 * scale(a) {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = relative_sigma(p, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = relative_sigma(p, x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// A level strictly below the ground state.
pub fn spectrum_lower_bound(p: &BoundaryProblem) -> Result<f64> {
    let mut lo = -1.0;
    for _ in 0..80 {
        if count_below(p, lo)? == 0 && relative_sigma(p, lo) > NULLITY_TOL {
            return Ok(lo);
        }
        lo = 2.0 * lo - 1.0;
    }
    Err(Error::Solver("no lower bound found for the spectrum".into()))
}

/// Shift x upwards until it is not an eigenvalue.
fn off_spectrum(p: &BoundaryProblem, mut x: f64) -> f64 {
    while relative_sigma(p, x) < 1e-6 {
        x += 1e-4 * scale(x);
    }
    x
}

/// The first `count` eigenvalues (with multiplicity; the last cluster is kept whole).
pub fn first_eigenvalues(p: &BoundaryProblem, count: usize) -> Result<EigenvalueList> {
    let lo = spectrum_lower_bound(p)?;
    let mut hi = 1.0f64.max(lo + 1.0);
    let mut guard = 0;
    while count_below(p, hi)? < count {
        hi = 2.0 * hi + 1.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Solver("window extension did not terminate".into()));
        }
    }
    let hi = off_spectrum(p, hi);
    let mut list = eigenvalues_in(p, lo, hi, DEFAULT_RESOLUTION)?;
    let mut total = 0;
    let mut keep = 0;
    for e in &list.values {
        if total >= count {
            break;
        }
        total += e.mult;
        keep += 1;
    }
    list.values.truncate(keep);
    Ok(list)
}

/// n(λ), N(λ), Mult(λ) for an eigenvalue λ (given to solver accuracy).
pub fn spectral_counts(p: &BoundaryProblem, lambda: f64) -> Result<(usize, usize, usize)> {
    let d = 1e-7 * scale(lambda);
    let n = count_below(p, lambda - d)? + 1;
    let big_n = count_below(p, lambda + d)?;
    if big_n < n {
        return Err(Error::Solver(format!("{lambda} is not an eigenvalue")));
    }
    Ok((n, big_n, big_n + 1 - n))
}

/// Real eigenfunction: f = a_e c + b_e s on each edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenFunction {
    pub lambda: f64,
    pub coeffs: Vec<(f64, f64)>,
}

impl EigenFunction {
    pub fn trace(&self, g: &MetricGraph, edge: usize, x: f64) -> Result<TracePair> {
        edge_eval(self.coeffs[edge], self.lambda, x, g.length(edge), Derivative::Along)
    }

    pub fn value(&self, g: &MetricGraph, edge: usize, x: f64) -> f64 {
        let x = x.clamp(0.0, g.length(edge));
        self.trace(g, edge, x).expect("clamped").value
    }

    /// Value and derivative along the edge at one end.
    pub fn end_trace(&self, g: &MetricGraph, edge: usize, end: End) -> TracePair {
        let x = match end {
            End::Tail => 0.0,
            End::Head => g.length(edge),
        };
        self.trace(g, edge, x).expect("endpoint")
    }

    pub fn vertex_value(&self, g: &MetricGraph, v: VertexId) -> f64 {
        let e = g.incident(v)[0];
        self.end_trace(g, e.edge, e.end).value
    }

    pub fn norm(&self, g: &MetricGraph) -> f64 {
        l2_inner(g, self.lambda, &self.coeffs, &self.coeffs).sqrt()
    }

    /// max |f| estimated from 64 samples per edge plus endpoints.
    pub fn max_abs(&self, g: &MetricGraph) -> f64 {
        let mut m: f64 = 0.0;
        for e in 0..g.edge_count() {
            let l = g.length(e);
            for i in 0..=64 {
                m = m.max(self.value(g, e, l * i as f64 / 64.0).abs());
            }
        }
        m
    }

    /// Largest violation of the vertex conditions, relative to the coefficient size.
    pub fn residual(&self, p: &BoundaryProblem) -> f64 {
        let g = p.graph();
        let n = p.dimension();
        let mut vals = DVector::zeros(n);
        let mut outs = DVector::zeros(n);
        for e in 0..g.edge_count() {
            let t = self.end_trace(g, e, End::Tail);
            let h = self.end_trace(g, e, End::Head);
            vals[2 * e] = t.value;
            outs[2 * e] = t.deriv;
            vals[2 * e + 1] = h.value;
            outs[2 * e + 1] = -h.deriv;
        }
        let size = vals.amax().max(outs.amax()).max(1e-300);
        p.condition_residual(&vals, &outs) / size
    }
}

fn l2_inner(g: &MetricGraph, lambda: f64, x: &[(f64, f64)], y: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for e in 0..g.edge_count() {
        let [cc, cs, ss] = edge_gram(lambda, g.length(e));
        let (a1, b1) = x[e];
        let (a2, b2) = y[e];
        s += a1 * a2 * cc + (a1 * b2 + b1 * a2) * cs + b1 * b2 * ss;
    }
    s
}

/// Orthonormal real basis of the eigenspace at λ.
pub fn eigenfunction(p: &BoundaryProblem, lambda: f64) -> Result<Vec<EigenFunction>> {
    let g = p.graph();
    let (m, bases) = scaled_secular(p, lambda);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = sigma_ref(svd.singular_values.max());
    let mut idx: Vec<usize> = (0..vt.nrows())
        .filter(|&k| svd.singular_values[k] < NULLITY_TOL * smax)
        .collect();
    if idx.is_empty() {
        return Err(Error::Solver(format!("{lambda} is not an eigenvalue (nullity 0)")));
    }
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut out: Vec<Vec<(f64, f64)>> = Vec::new();
    for k in idx {
        let mut c: Vec<(f64, f64)> = (0..g.edge_count())
            .map(|e| {
                let t = &bases[e].to_cs;
                let (x0, x1) = (vt[(k, 2 * e)], vt[(k, 2 * e + 1)]);
                (t[0][0] * x0 + t[0][1] * x1, t[1][0] * x0 + t[1][1] * x1)
            })
            .collect();
        for _ in 0..2 {
            for q in &out {
                let r = l2_inner(g, lambda, &c, q);
                for (ce, qe) in c.iter_mut().zip(q) {
                    ce.0 -= r * qe.0;
                    ce.1 -= r * qe.1;
                }
            }
        }
        let nrm = l2_inner(g, lambda, &c, &c).sqrt();
        if nrm < 1e-10 {
            continue;
        }
        for ce in c.iter_mut() {
            ce.0 /= nrm;
            ce.1 /= nrm;
        }
        out.push(c);
    }
    Ok(out
        .into_iter()
        .map(|mut c| {
            apply_sign_convention(&mut c);
            EigenFunction { lambda, coeffs: c }
        })
        .collect())
}

/// Make the first coefficient of largest magnitude positive.
fn apply_sign_convention(c: &mut [(f64, f64)]) {
    let flat: Vec<f64> = c.iter().flat_map(|&(a, b)| [a, b]).collect();
    let max = flat.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = flat.iter().find(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if *first < 0.0 {
            for ce in c.iter_mut() {
                ce.0 = -ce.0;
                ce.1 = -ce.1;
            }
        }
    }
}

/// Threshold for |f(v)| relative to max |f|.
pub const VANISHING_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GenericityReport {
    /// (π/ℓ_min)².
    pub lambda_bound: f64,
    pub above_bound: bool,
    /// min |f(v)| / max |f| over vertices of degree > 2, if any.
    pub min_vertex_ratio: Option<f64>,
    pub nonvanishing: bool,
    /// Some α at which τ_α f and τ_α' f vanish together at a vertex end.
    pub simultaneous_zero: bool,
}

impl GenericityReport {
    pub fn is_generic(&self) -> bool {
        self.above_bound && self.nonvanishing && !self.simultaneous_zero
    }
}

pub fn check_generic(p: &BoundaryProblem, lambda: f64, f: &EigenFunction) -> GenericityReport {
    let g = p.graph();
    let lambda_bound = (PI / g.l_min()).powi(2);
    let max = f.max_abs(g).max(1e-300);
    let mut ratio: Option<f64> = None;
    for v in 0..g.vertex_count() {
        if g.degree(v) > 2 {
            let r = f.vertex_value(g, v).abs() / max;
            ratio = Some(ratio.map_or(r, |x| x.min(r)));
        }
    }
    let scale = max * lambda.abs().sqrt().max(1.0);
    let mut simultaneous = false;
    for e in 0..g.edge_count() {
        for end in [End::Tail, End::Head] {
            let t = f.end_trace(g, e, end);
            let m = mixed_trace(0.0, t);
            if m.tau.hypot(m.tau_prime) < 1e-10 * scale {
                simultaneous = true;
            }
        }
    }
    GenericityReport {
        lambda_bound,
        above_bound: lambda > lambda_bound,
        min_vertex_ratio: ratio,
        nonvanishing: ratio.map_or(true, |r| r >= VANISHING_TOL),
        simultaneous_zero: simultaneous,
    }
}

/// Helper for tests and callers holding a dense matrix of coefficients.
pub fn coefficient_matrix(fs: &[EigenFunction]) -> DMatrix<f64> {
    let rows = fs.first().map_or(0, |f| 2 * f.coeffs.len());
    DMatrix::from_fn(rows, fs.len(), |r, c| {
        let (a, b) = fs[c].coeffs[r / 2];
        if r % 2 == 0 {
            a
        } else {
            b
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::BoundaryProblem;
    use crate::graph::MetricGraph;

    fn interval() -> MetricGraph {
        MetricGraph::from_edges(2, &[(0, 1, PI)]).unwrap()
    }

    #[test]
    fn interval_nk_and_dirichlet() {
        let p = BoundaryProblem::neumann_kirchhoff(&interval());
        let l = first_eigenvalues(&p, 5).unwrap();
        let got: Vec<f64> = l.expanded();
        for (x, want) in got.iter().zip([0.0, 1.0, 4.0, 9.0, 16.0]) {
            assert!((x - want).abs() < 1e-9, "{got:?}");
        }
        assert_eq!(l.values[0].n, 1);
        let d = BoundaryProblem::dirichlet_ends(&interval());
        let got = first_eigenvalues(&d, 5).unwrap().expanded();
        for (x, want) in got.iter().zip([1.0, 4.0, 9.0, 16.0, 25.0]) {
            assert!((x - want).abs() < 1e-9, "{got:?}");
        }
    }

    #[test]
    fn cycle_double_eigenvalues() {
        let g = MetricGraph::from_edges(1, &[(0, 0, 2.0 * PI)]).unwrap();
        let p = BoundaryProblem::neumann_kirchhoff(&g);
        let l = first_eigenvalues(&p, 5).unwrap();
        let v: Vec<(f64, usize)> = l.values.iter().map(|e| (e.lambda, e.mult)).collect();
        assert_eq!(v.len(), 3, "{v:?}");
        assert!((v[1].0 - 1.0).abs() < 1e-9 && v[1].1 == 2);
        assert!((v[2].0 - 4.0).abs() < 1e-9 && v[2].1 == 2);
        assert_eq!(spectral_counts(&p, 1.0).unwrap(), (2, 3, 2));
    }

    #[test]
    fn interval_eigenfunction() {
        let g = interval();
        let p = BoundaryProblem::neumann_kirchhoff(&g);
        let f = eigenfunction(&p, 4.0).unwrap();
        assert_eq!(f.len(), 1);
        let want = (2.0 / PI).sqrt();
        assert!((f[0].coeffs[0].0 - want).abs() < 1e-10);
        assert!(f[0].coeffs[0].1.abs() < 1e-10);
        let f0 = eigenfunction(&p, 0.0).unwrap();
        assert!((f0[0].coeffs[0].0 - (1.0 / PI).sqrt()).abs() < 1e-10);
        assert_eq!(spectral_counts(&p, 4.0).unwrap(), (3, 3, 1));
    }

    #[test]
    fn symmetric_star_vanishing_centre() {
        let g = MetricGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let p = BoundaryProblem::neumann_kirchhoff(&g);
        // (π/2)² is a double eigenvalue with eigenfunctions vanishing at the centre.
        let lam = (PI / 2.0).powi(2);
        let fs = eigenfunction(&p, lam).unwrap();
        assert_eq!(fs.len(), 2);
        let r = check_generic(&p, lam, &fs[0]);
        assert!(!r.nonvanishing);
        assert!(!r.above_bound);
    }

    #[test]
    fn star_fourth_eigenpair() {
        let g = MetricGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.3), (0, 3, 1.7)]).unwrap();
        let p = BoundaryProblem::neumann_kirchhoff(&g);
        let l = first_eigenvalues(&p, 4).unwrap();
        let e = l.values[3];
        let f = &eigenfunction(&p, e.lambda).unwrap()[0];
        assert!(f.residual(&p) < 1e-8);
        assert!((f.norm(&g) - 1.0).abs() < 1e-8);
    }
}
