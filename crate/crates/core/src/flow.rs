//! Spectral flow of boundary-condition families, by Robin-map eigenvalues and
//! by tracking eigenvalue curves.

use crate::basis::reduce_angle;
use crate::conditions::{BoundaryProblem, ExtReal};
use crate::error::{Error, Result};
use crate::graph::{MetricGraph, VertexId};
use crate::robin_map::{map_with_base, Coupling, RobinMap};
use crate::secular::relative_sigma;
use crate::solver::{eigenvalues_in, EigenvalueList, DEFAULT_RESOLUTION};
use std::f64::consts::PI;

/// ε₀ of the excluded slivers: (0, ε₀) for α ≠ 0 and (-∞, -1/ε₀) for α = 0.
pub const SLIVER: f64 = 1e-3;

/// A family t ↦ H(t): the coupling at every vertex of B set to t, `base` elsewhere.
#[derive(Clone, Debug)]
pub struct Family {
    base: BoundaryProblem,
    b: Vec<VertexId>,
    coupling: Coupling,
}

impl Family {
    pub fn new(base: BoundaryProblem, b: Vec<VertexId>, coupling: Coupling) -> Result<Self> {
        let coupling = match coupling {
            Coupling::Alpha(a) => Coupling::Alpha(reduce_angle(a)),
            c => c,
        };
        let fam = Family { base, b, coupling };
        fam.problem_at(ExtReal::Finite(0.0))?;
        fam.problem_at(ExtReal::Infinity)?;
        Ok(fam)
    }

    /// H_α^B(t) on a Neumann-Kirchhoff graph.
    pub fn delta_alpha(g: &MetricGraph, b: &[VertexId], alpha: f64) -> Result<Self> {
        Family::new(BoundaryProblem::neumann_kirchhoff(g), b.to_vec(), Coupling::Alpha(alpha))
    }

    pub fn graph(&self) -> &MetricGraph {
        self.base.graph()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.b
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn base(&self) -> &BoundaryProblem {
        &self.base
    }

    pub fn problem_at(&self, t: ExtReal) -> Result<BoundaryProblem> {
        let mut p = self.base.clone();
        for &v in &self.b {
            p = p.with(v, self.coupling.condition(t))?;
        }
        Ok(p)
    }

    fn problem_at_theta(&self, theta: f64) -> Result<BoundaryProblem> {
        self.problem_at(ExtReal::from_theta(theta))
    }

    /// The Robin (or DtN) map at level μ.
    pub fn robin_map(&self, mu: f64) -> Result<RobinMap> {
        map_with_base(&self.base, &self.b, self.coupling, mu)
    }

    /// The open θ-arc on which the family is not uniformly bounded below.
    pub fn excluded_arc(&self) -> (f64, f64) {
        match self.coupling {
            Coupling::Alpha(a) if a != 0.0 => (0.0, ExtReal::Finite(SLIVER).theta()),
            _ => (-PI, ExtReal::Finite(-1.0 / SLIVER).theta()),
        }
    }
}

/// A path on the circle ℝ̄ in the chart θ = 2 atan t, lifted to ℝ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterInterval {
    pub theta_start: f64,
    pub theta_end: f64,
}

fn theta_of(t: f64) -> f64 {
    if t == f64::INFINITY {
        PI
    } else if t == f64::NEG_INFINITY {
        -PI
    } else {
        2.0 * t.atan()
    }
}

impl ParameterInterval {
    /// t running from a up to b; ±∞ allowed.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::Parse(format!("interval [{a}, {b}] is empty")));
        }
        Ok(ParameterInterval { theta_start: theta_of(a), theta_end: theta_of(b) })
    }

    /// The whole circle, starting and ending at t = ∞.
    pub fn full_loop() -> Self {
        ParameterInterval { theta_start: -PI, theta_end: PI }
    }

    /// m turns around the circle from t = ∞ (negative m runs backwards).
    pub fn loops(m: i32) -> Self {
        ParameterInterval { theta_start: -PI, theta_end: -PI + 2.0 * PI * m as f64 }
    }

    pub fn reversed(self) -> Self {
        ParameterInterval { theta_start: self.theta_end, theta_end: self.theta_start }
    }

    pub fn is_loop(&self) -> bool {
        let turns = (self.theta_end - self.theta_start) / (2.0 * PI);
        turns != 0.0 && (turns - turns.round()).abs() < 1e-12
    }

    pub fn direction(&self) -> f64 {
        (self.theta_end - self.theta_start).signum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    RobinMap,
    Tracking,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub t: ExtReal,
    pub theta: f64,
    /// +1 for an upward crossing along the path direction, -1 otherwise.
    pub sign: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SFResult {
    pub sf: i64,
    pub mu: f64,
    pub crossings: Vec<Crossing>,
    pub method: Method,
    /// Tracked steps where some curve moved against the path direction.
    pub monotonicity_violations: usize,
}

/// Count lifts θ* + 2πj in (lo, hi] (forward) or [hi, lo) (backward).
fn count_lifts(theta: f64, start: f64, end: f64) -> (i64, Vec<f64>) {
    let mut hits = Vec::new();
    let (lo, hi) = if start <= end { (start, end) } else { (end, start) };
    let tp = 2.0 * PI;
    let mut j = ((lo - theta) / tp).floor() - 1.0;
    loop {
        let x = theta + j * tp;
        if x > hi + 1e-15 {
            break;
        }
        let inside = if start <= end {
            x > start && x <= end
        } else {
            x >= end && x < start
        };
        if inside {
            hits.push(x);
        }
        j += 1.0;
    }
    let sign = if start <= end { 1 } else { -1 };
    (sign * hits.len() as i64, hits)
}

/// Crossing parameters t* = -κ, κ ∈ spec Λ(μ), with κ ≈ 0 placed at t* = 0.
fn crossing_thetas(map: &RobinMap) -> Vec<f64> {
    let scale = map.matrix.amax().max(1.0);
    map.eigenvalues()
        .into_iter()
        .map(|k| if k.abs() <= 1e-8 * scale { 0.0 } else { ExtReal::Finite(-k).theta() })
        .collect()
}

fn robin_crossings(map: &RobinMap, start: f64, end: f64) -> (i64, Vec<Crossing>) {
    let mut sf = 0;
    let mut out = Vec::new();
    let sign = if start <= end { 1 } else { -1 };
    for th in crossing_thetas(map) {
        let (c, hits) = count_lifts(th, start, end);
        sf += c;
        for h in hits {
            out.push(Crossing { t: ExtReal::from_theta(h), theta: h, sign });
        }
    }
    (sf, out)
}

/// Spectral flow through μ from the eigenvalues of the Robin map.
pub fn sf_via_robin(family: &Family, mu: f64, path: ParameterInterval) -> Result<SFResult> {
    let map = family.robin_map(mu)?;
    let (sf, mut crossings) = robin_crossings(&map, path.theta_start, path.theta_end);
    crossings.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(SFResult { sf, mu, crossings, method: Method::RobinMap, monotonicity_violations: 0 })
}

/// Knobs of the curve tracker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackOptions {
    /// Largest initial θ step.
    pub max_step: f64,
    /// Maximum number of halvings of a step.
    pub max_depth: usize,
    pub resolution: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        TrackOptions { max_step: 0.25, max_depth: 30, resolution: DEFAULT_RESOLUTION }
    }
}

struct Sample {
    theta: f64,
    list: EigenvalueList,
}

struct Tracker<'a> {
    family: &'a Family,
    mu: f64,
    delta: f64,
    tol: f64,
    opts: TrackOptions,
    direction: f64,
    crossings: Vec<Crossing>,
    violations: usize,
}

impl Tracker<'_> {
    fn sample(&self, theta: f64) -> Result<Sample> {
        let p = self.family.problem_at_theta(theta)?;
        let mut d = self.delta;
        for _ in 0..50 {
            let (lo, hi) = (self.mu - d, self.mu + d);
            if relative_sigma(&p, lo) > 1e-6 && relative_sigma(&p, hi) > 1e-6 {
                let list = eigenvalues_in(&p, lo, hi, self.opts.resolution)?;
                return Ok(Sample { theta, list });
            }
            d *= 1.013;
        }
        Err(Error::Solver("could not place a tracking window off the spectrum".into()))
    }

    /// Eigenvalues strictly below μ (with a small tolerance for curves sitting on μ).
    fn below(&self, s: &Sample) -> i64 {
        s.list.below as i64
            + s.list
                .values
                .iter()
                .filter(|e| e.lambda < self.mu - self.tol)
                .map(|e| e.mult as i64)
                .sum::<i64>()
    }

    /// Per-index values λ_n inside the window.
    fn indexed(s: &Sample) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for e in &s.list.values {
            for k in 0..e.mult {
                out.push((e.n + k, e.lambda));
            }
        }
        out
    }

    fn step_ok(&mut self, a: &Sample, b: &Sample) -> bool {
        let xa = Self::indexed(a);
        let xb = Self::indexed(b);
        let inner = self.delta / 2.0;
        let find = |v: &[(usize, f64)], n: usize| v.iter().find(|x| x.0 == n).map(|x| x.1);
        let mut violation = false;
        for &(n, la) in &xa {
            match find(&xb, n) {
                Some(lb) => {
                    if (lb - la).abs() > self.delta / 4.0 {
                        return false;
                    }
                    if self.direction * (lb - la) < -1e-7 * la.abs().max(1.0) {
                        violation = true;
                    }
                }
                None => {
                    if (la - self.mu).abs() < inner {
                        return false;
                    }
                }
            }
        }
        for &(n, lb) in &xb {
            if find(&xa, n).is_none() && (lb - self.mu).abs() < inner {
                return false;
            }
        }
        if violation {
            self.violations += 1;
        }
        true
    }

    fn record_crossings(&mut self, a: &Sample, b: &Sample) {
        let xa = Self::indexed(a);
        let xb = Self::indexed(b);
        let level = self.mu - self.tol;
        for &(n, la) in &xa {
            if let Some(&(_, lb)) = xb.iter().find(|x| x.0 == n) {
                if (la < level) != (lb < level) {
                    let w = if lb != la { (level - la) / (lb - la) } else { 0.5 };
                    let theta = a.theta + w.clamp(0.0, 1.0) * (b.theta - a.theta);
                    let sign = if la < level { 1 } else { -1 } * self.direction as i32;
                    self.crossings.push(Crossing { t: ExtReal::from_theta(theta), theta, sign });
                }
            }
        }
    }

    /// Flow over [a.theta, b.theta], refining until every step is resolved.
    fn segment(&mut self, a: Sample, b: Sample, depth: usize) -> Result<(i64, Sample)> {
        if self.step_ok(&a, &b) {
            self.record_crossings(&a, &b);
            let sf = self.below(&a) - self.below(&b);
            return Ok((sf, b));
        }
        if depth >= self.opts.max_depth {
            return Err(Error::Solver(format!(
                "curve matching unresolved near θ = {} at level {}",
                a.theta, self.mu
            )));
        }
        let mid = self.sample(0.5 * (a.theta + b.theta))?;
        let mid_theta = mid.theta;
        let (s1, m) = self.segment(a, mid, depth + 1)?;
        debug_assert_eq!(m.theta, mid_theta);
        let (s2, end) = self.segment(m, b, depth + 1)?;
        Ok((s1 + s2, end))
    }

    fn piece(&mut self, start: f64, end: f64) -> Result<i64> {
        let n = ((end - start).abs() / self.opts.max_step).ceil().max(1.0) as usize;
        let mut cur = self.sample(start)?;
        let mut sf = 0;
        for i in 1..=n {
            let th = if i == n { end } else { start + (end - start) * i as f64 / n as f64 };
            let next = self.sample(th)?;
            let (s, last) = self.segment(cur, next, 0)?;
            sf += s;
            cur = last;
        }
        Ok(sf)
    }
}

/// Split [start, end] (either direction) into pieces inside and outside the lifted arc (e0, e1).
fn split_path(start: f64, end: f64, e0: f64, e1: f64) -> Vec<(f64, f64, bool)> {
    let (lo, hi) = if start <= end { (start, end) } else { (end, start) };
    let tp = 2.0 * PI;
    let mut cuts: Vec<(f64, f64)> = Vec::new();
    let mut j = ((lo - e1) / tp).floor() - 1.0;
    loop {
        let a = e0 + j * tp;
        let b = e1 + j * tp;
        if a >= hi {
            break;
        }
        let (ca, cb) = (a.max(lo), b.min(hi));
        if ca < cb {
            cuts.push((ca, cb));
        }
        j += 1.0;
    }
    let mut pieces = Vec::new();
    let mut x = lo;
    for (a, b) in cuts {
        if a > x {
            pieces.push((x, a, false));
        }
        pieces.push((a, b, true));
        x = b;
    }
    if x < hi {
        pieces.push((x, hi, false));
    }
    if start > end {
        pieces.reverse();
        for p in pieces.iter_mut() {
            *p = (p.1, p.0, p.2);
        }
    }
    pieces
}

/// Spectral flow through μ by following eigenvalue curves, with the excluded
/// slivers (where the family is unbounded below) filled in from the Robin map.
pub fn sf_via_tracking(family: &Family, mu: f64, path: ParameterInterval, opts: TrackOptions) -> Result<SFResult> {
    let (e0, e1) = family.excluded_arc();
    let pieces = split_path(path.theta_start, path.theta_end, e0, e1);
    let mut tracker = Tracker {
        family,
        mu,
        delta: 0.5 + 0.05 * mu.abs(),
        tol: 1e-9 * mu.abs().max(1.0),
        opts,
        direction: path.direction(),
        crossings: Vec::new(),
        violations: 0,
    };
    let mut sf = 0;
    let mut map: Option<RobinMap> = None;
    for (a, b, excluded) in pieces {
        if excluded {
            if map.is_none() {
                map = Some(family.robin_map(mu)?);
            }
            let (s, cr) = robin_crossings(map.as_ref().expect("set"), a, b);
            sf += s;
            tracker.crossings.extend(cr);
        } else {
            sf += tracker.piece(a, b)?;
        }
    }
    let mut crossings = tracker.crossings;
    crossings.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    Ok(SFResult {
        sf,
        mu,
        crossings,
        method: Method::Tracking,
        monotonicity_violations: tracker.violations,
    })
}

/// One row of a spectral-curve table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveRow {
    pub t: f64,
    /// Position of the eigenvalue in the ordered spectrum of H(t).
    pub branch: usize,
    pub lambda: f64,
}

/// Eigenvalues of H(t) in [lo, hi] for every t of the grid.
pub fn curve_samples(family: &Family, ts: &[f64], lo: f64, hi: f64) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for &t in ts {
        let p = family.problem_at(ExtReal::Finite(t))?;
        let (mut a, mut b) = (lo, hi);
        while relative_sigma(&p, a) < 1e-6 {
            a -= 1e-6 * a.abs().max(1.0);
        }
        while relative_sigma(&p, b) < 1e-6 {
            b += 1e-6 * b.abs().max(1.0);
        }
        let list = eigenvalues_in(&p, a, b, DEFAULT_RESOLUTION)?;
        for e in &list.values {
            if e.lambda < a || e.lambda > b {
                continue;
            }
            for k in 0..e.mult {
                rows.push(CurveRow { t, branch: e.n + k, lambda: e.lambda });
            }
        }
    }
    Ok(rows)
}

/// For every branch: whether consecutive samples never decrease by more than `tol`.
pub fn branch_monotone(rows: &[CurveRow], tol: f64) -> Vec<(usize, bool)> {
    let mut branches: Vec<usize> = rows.iter().map(|r| r.branch).collect();
    branches.sort_unstable();
    branches.dedup();
    branches
        .into_iter()
        .map(|b| {
            let mut pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.branch == b).map(|r| (r.t, r.lambda)).collect();
            pts.sort_by(|x, y| x.0.total_cmp(&y.0));
            let ok = pts.windows(2).all(|w| w[1].1 - w[0].1 >= -tol);
            (b, ok)
        })
        .collect()
}
