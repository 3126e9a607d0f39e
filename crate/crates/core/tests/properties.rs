use proptest::prelude::*;
use qglab_core::basis::{fundamental_pair, mixed_trace, mixed_trace_inverse};
use qglab_core::flow::{branch_monotone, curve_samples, Family};
use qglab_core::harness::{random_graph, GraphParams};
use qglab_core::io::{place_degree_two, PointSpec};
use qglab_core::robin::robin_points;
use qglab_core::secular::count_below;
use qglab_core::solver::{eigenfunction, first_eigenvalues, nullity};
use qglab_core::{BoundaryProblem, Error, ExtReal, MetricGraph, TracePair};
use std::collections::VecDeque;
use std::f64::consts::PI;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn bfs_components(g: &MetricGraph) -> usize {
    let n = g.vertex_count();
    let mut adj = vec![Vec::new(); n];
    for e in g.edges() {
        adj[e.from].push(e.to);
        adj[e.to].push(e.from);
    }
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    q.push_back(w);
                }
            }
        }
    }
    count
}

fn spectrum(g: &MetricGraph, k: usize) -> Vec<f64> {
    first_eigenvalues(&BoundaryProblem::neumann_kirchhoff(g), k).unwrap().expanded()[..k].to_vec()
}

/// Points on distinct edges chosen by `picks` (edge selector, fraction).
fn cut_points(g: &MetricGraph, picks: &[(usize, f64)]) -> Vec<PointSpec> {
    let mut edges: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for &(sel, frac) in picks {
        let free: Vec<usize> = (0..g.edge_count()).filter(|e| !edges.contains(e)).collect();
        if free.is_empty() {
            break;
        }
        let e = free[sel % free.len()];
        edges.push(e);
        out.push(PointSpec::EdgeFraction(e, frac));
    }
    out
}

fn small_params() -> GraphParams {
    GraphParams { max_vertices: 5, max_edges: 7, ..GraphParams::default() }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn wronskian_is_one(lambda in -50.0f64..400.0, x in 0.0f64..3.0) {
        let w = fundamental_pair(lambda, x).wronskian();
        let scale = if lambda < 0.0 { ((-lambda).sqrt() * x).cosh().powi(2) } else { 1.0 };
        prop_assert!((w - 1.0).abs() < 1e-10 * scale, "W = {w}");
    }

    #[test]
    fn mixed_trace_round_trip(alpha in -10.0f64..10.0, v in -5.0f64..5.0, d in -5.0f64..5.0) {
        let t = TracePair { value: v, deriv: d };
        let back = mixed_trace_inverse(mixed_trace(alpha, t));
        prop_assert!((back.value - v).abs() < 1e-12 && (back.deriv - d).abs() < 1e-12);
    }

    #[test]
    fn mixed_trace_antiperiodic(alpha in -4.0f64..4.0, v in -5.0f64..5.0, d in -5.0f64..5.0) {
        let t = TracePair { value: v, deriv: d };
        let a = mixed_trace(alpha, t);
        let b = mixed_trace(alpha + PI, t);
        prop_assert!((a.tau + b.tau).abs() < 1e-12 && (a.tau_prime + b.tau_prime).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn random_graphs_valid(seed in any::<u64>()) {
        let p = GraphParams::default();
        let g = random_graph(seed, &p);
        prop_assert_eq!(&g, &random_graph(seed, &p));
        prop_assert_eq!(bfs_components(&g), 1);
        prop_assert!(g.l_min() >= p.min_length && g.edge_count() <= p.max_edges);
        prop_assert!((p.min_vertices..=p.max_vertices).contains(&g.vertex_count()));
        prop_assert!(g.is_oriented());
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn cut_changes_betti_by_euler(seed in any::<u64>(), picks in prop::collection::vec((0usize..32, 0.1f64..0.9), 1..4)) {
        let g = random_graph(seed, &small_params());
        let (sub, b) = place_degree_two(&g, &cut_points(&g, &picks)).unwrap();
        let cut = sub.cut_at(&b).unwrap();
        let comps = bfs_components(&cut.graph) as i64;
        prop_assert_eq!(cut.graph.n_components() as i64, comps);
        prop_assert_eq!(g.betti() - cut.graph.betti(), b.len() as i64 - (comps - 1));
    }

    #[test]
    fn orientation_idempotent(seed in any::<u64>()) {
        let g = random_graph(seed, &GraphParams::default());
        let once = g.reversed().orient_for_degree_two();
        prop_assert!(once.is_oriented());
        prop_assert_eq!(&once.orient_for_degree_two(), &once);
    }
}

proptest! {
    #![proptest_config(config(40))]

    #[test]
    fn subdivision_keeps_spectrum(seed in any::<u64>(), picks in prop::collection::vec((0usize..32, 0.1f64..0.9), 1..4)) {
        let g = random_graph(seed, &small_params());
        let (sub, _) = place_degree_two(&g, &cut_points(&g, &picks)).unwrap();
        for (a, b) in spectrum(&g, 8).iter().zip(spectrum(&sub, 8)) {
            prop_assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn reversal_keeps_spectrum(seed in any::<u64>()) {
        let g = random_graph(seed, &small_params());
        for (a, b) in spectrum(&g, 8).iter().zip(spectrum(&g.reversed(), 8)) {
            prop_assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn weyl_bound(seed in any::<u64>(), lambda in 1.0f64..200.0) {
        let g = random_graph(seed, &small_params());
        let n = count_below(&BoundaryProblem::neumann_kirchhoff(&g), lambda).unwrap() as f64;
        let weyl = g.total_length() * lambda.sqrt() / PI;
        prop_assert!((n - weyl).abs() <= (g.edge_count() + g.vertex_count()) as f64, "N = {n}, Weyl = {weyl}");
    }

    #[test]
    fn robin_points_solve_and_space(seed in any::<u64>(), k in 3usize..9, alpha in 0.0f64..PI) {
        let g = random_graph(seed, &small_params());
        let p = BoundaryProblem::neumann_kirchhoff(&g);
        let lambda = first_eigenvalues(&p, k).unwrap().expanded()[k - 1];
        prop_assume!(lambda > 1e-6);
        let f = &eigenfunction(&p, lambda).unwrap()[0];
        let pts = match robin_points(&g, f, alpha) {
            Ok(pts) => pts,
            Err(Error::Genericity(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let scale = f.max_abs(&g) * (1.0 + lambda.sqrt());
        for q in &pts.points {
            let tau = mixed_trace(alpha, f.trace(&g, q.edge, q.x).unwrap()).tau;
            prop_assert!(tau.abs() < 1e-7 * scale, "τ = {tau} at {q:?}");
        }
        let gap = PI / lambda.sqrt();
        for w in pts.points.windows(2) {
            if w[0].edge == w[1].edge && w[0].vertex.is_none() && w[1].vertex.is_none() {
                prop_assert!((w[1].x - w[0].x - gap).abs() < 1e-7 * gap.max(1.0));
            }
        }
    }
}

fn family(seed: u64, picks: &[(usize, f64)], alpha: f64) -> Family {
    let g = random_graph(seed, &small_params());
    let (sub, b) = place_degree_two(&g, &cut_points(&g, picks)).unwrap();
    Family::new(BoundaryProblem::neumann_kirchhoff(&sub), b, qglab_core::robin_map::Coupling::Alpha(alpha)).unwrap()
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn robin_map_symmetric(
        seed in any::<u64>(),
        picks in prop::collection::vec((0usize..32, 0.1f64..0.9), 1..4),
        alpha in 0.0f64..PI,
        mu in -5.0f64..40.0,
    ) {
        let fam = family(seed, &picks, alpha);
        match fam.robin_map(mu) {
            Ok(m) => {
                prop_assert!(m.asymmetry < 1e-8, "asymmetry {}", m.asymmetry);
            }
            Err(Error::IllDefined(_)) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

proptest! {
    #![proptest_config(config(60))]

    #[test]
    fn planted_kernel(
        seed in any::<u64>(),
        picks in prop::collection::vec((0usize..32, 0.1f64..0.9), 1..4),
        alpha in 0.0f64..PI,
        mu in 0.3f64..30.0,
    ) {
        let fam = family(seed, &picks, alpha);
        let m = match fam.robin_map(mu) {
            Ok(m) => m,
            Err(Error::IllDefined(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let eigs = m.eigenvalues();
        prop_assume!(eigs.iter().all(|e| e.abs() < 1e6));
        for &e in &eigs {
            let mult = eigs.iter().filter(|&&x| (x - e).abs() < 1e-9 * e.abs().max(1.0)).count();
            let p = fam.problem_at(ExtReal::Finite(-e)).unwrap();
            prop_assert_eq!(nullity(&p, mu), mult, "t = {}", -e);
        }
        let gap = eigs.windows(2).map(|w| (w[1] - w[0]).abs()).fold(1.0f64, f64::min);
        let off = eigs.iter().fold(0.0f64, |a, &e| a.max(e.abs())) + gap.max(1.0);
        let p = fam.problem_at(ExtReal::Finite(off)).unwrap();
        prop_assert_eq!(nullity(&p, mu), 0);
    }

    #[test]
    fn interlacing(
        seed in any::<u64>(),
        picks in prop::collection::vec((0usize..32, 0.1f64..0.9), 1..4),
        alpha in 0.0f64..PI,
        t in -20.0f64..20.0,
        mu in 0.5f64..40.0,
    ) {
        let fam = family(seed, &picks, alpha);
        let k = fam.vertices().len() as i64;
        let a = count_below(&fam.problem_at(ExtReal::Finite(t)).unwrap(), mu).unwrap() as i64;
        let b = count_below(&fam.problem_at(ExtReal::Infinity).unwrap(), mu).unwrap() as i64;
        let c = count_below(fam.base(), mu).unwrap() as i64;
        prop_assert!((a - b).abs() <= k && (a - c).abs() <= k, "{a} {b} {c} with |B| = {k}");
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn delta_branches_increase(seed in any::<u64>(), picks in prop::collection::vec((0usize..32, 0.1f64..0.9), 1..3)) {
        let fam = family(seed, &picks, 0.0);
        let ts: Vec<f64> = (0..41).map(|i| -10.0 + 0.5 * i as f64).collect();
        let rows = curve_samples(&fam, &ts, -200.0, 25.0).unwrap();
        let counts: Vec<usize> = ts.iter().map(|&t| rows.iter().filter(|r| r.t == t).count()).collect();
        let lowest = rows.iter().map(|r| r.branch).min().unwrap();
        prop_assert_eq!(lowest, 1);
        let top = rows.iter().filter(|r| r.t == ts[0]).map(|r| r.branch).max().unwrap();
        let below: Vec<_> = rows.iter().copied().filter(|r| r.branch <= top.min(*counts.iter().min().unwrap())).collect();
        for (b, ok) in branch_monotone(&below, 1e-8) {
            prop_assert!(ok, "branch {b} decreases");
        }
    }
}
