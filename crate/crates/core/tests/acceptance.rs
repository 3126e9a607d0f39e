//! End-to-end acceptance run: one PASS/FAIL line per criterion.

use num_complex::Complex64;
use qglab_core::basis::fundamental_pair;
use qglab_core::flow::{branch_monotone, curve_samples, Family};
use qglab_core::harness::{
    default_alphas, fixtures, random_graph, run_subject, run_suite, GraphParams, Report, Status, Subject, SuiteConfig,
    TheoremCheck, TheoremId,
};
use qglab_core::io::{place_degree_two, PointSpec};
use qglab_core::secular::count_below;
use qglab_core::solver::{first_eigenvalues, nullity};
use qglab_core::{vertex_unitary, BoundaryProblem, Error, ExtReal, MetricGraph, VertexCondition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::io::Write;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn run(k: usize, title: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let took = start.elapsed();
    let in_time = budget.is_none_or(|b| took <= b);
    let pass = o.pass && in_time;
    let limit = budget.map(|b| format!(" (limit {:.0} s)", b.as_secs_f64())).unwrap_or_default();
    let line = format!(
        "{} criterion {k}: {title}: {}; {:.1} s{limit}",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        took.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").and_then(|_| out.flush()).expect("stdout");
    pass
}

fn failures(checks: &[TheoremCheck]) -> Vec<&TheoremCheck> {
    checks.iter().filter(|c| c.status == Status::Fail).collect()
}

fn first_failure(checks: &[TheoremCheck]) -> String {
    failures(checks)
        .first()
        .map(|c| format!("; first failure {} {} {:?} {:?} {}", c.source, c.identity, c.lhs, c.rhs, c.reason))
        .unwrap_or_default()
}

fn close(got: &[f64], want: &[f64], tol: f64) -> bool {
    got.len() >= want.len() && got.iter().zip(want).all(|(a, b)| (a - b).abs() <= tol)
}

fn criterion_1() -> Outcome {
    let g = MetricGraph::from_edges(2, &[(0, 1, PI)]).unwrap();
    let nk = first_eigenvalues(&BoundaryProblem::neumann_kirchhoff(&g), 5).unwrap().expanded();
    let d = first_eigenvalues(&BoundaryProblem::dirichlet_ends(&g), 5).unwrap().expanded();
    let ok = close(&nk, &[0.0, 1.0, 4.0, 9.0, 16.0], 1e-9) && close(&d, &[1.0, 4.0, 9.0, 16.0, 25.0], 1e-9);
    outcome(ok, format!("NK {:?}, Dirichlet {:?}", &nk[..5], &d[..5]))
}

fn suite(theorems: &[TheoremId], trials: usize, fixtures: bool, tracked: usize) -> Report {
    let cfg = SuiteConfig { trials, include_fixtures: fixtures, tracked_random: tracked, ..SuiteConfig::default() };
    run_suite(&cfg, theorems)
}

fn criterion_2() -> Outcome {
    let r = suite(&[TheoremId::SfHba], 50, false, 0);
    let loops: Vec<&TheoremCheck> = r
        .checks
        .iter()
        .filter(|c| c.identity.ends_with("loop-tracking") || c.identity.ends_with("loop-robin"))
        .collect();
    let pass = loops.iter().filter(|c| c.status == Status::Pass).count();
    let skip = loops.iter().filter(|c| c.status == Status::Skip).count();
    let expected = 2 * 50 * 8 * 3;
    let ok = r.failures() == 0 && pass == expected;
    outcome(
        ok,
        format!("{pass}/{expected} loop identities exact ({skip} skipped), {} checks failed{}", r.failures(), first_failure(&r.checks)),
    )
}

/// Per subject: (any failure, any skip).
fn by_subject(checks: &[TheoremCheck]) -> BTreeMap<&str, (bool, bool)> {
    let mut m: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
    for c in checks {
        let e = m.entry(c.source.as_str()).or_default();
        e.0 |= c.status == Status::Fail;
        e.1 |= c.status == Status::Skip;
    }
    m
}

fn clean_fraction(checks: &[TheoremCheck]) -> (usize, usize, usize) {
    let m = by_subject(checks);
    let random: Vec<_> = m.iter().filter(|(s, _)| s.starts_with("seed:")).collect();
    let clean = random.iter().filter(|(_, (f, s))| !f && !s).count();
    let fixtures_clean = m.iter().filter(|(s, (f, sk))| s.starts_with("fixture:") && !f && !sk).count();
    (clean, random.len(), fixtures_clean)
}

fn skips_recorded(checks: &[TheoremCheck]) -> bool {
    checks
        .iter()
        .filter(|c| c.status == Status::Skip)
        .all(|c| !c.reason.is_empty())
}

fn criterion_3() -> Outcome {
    let r = suite(&[TheoremId::NodalDef, TheoremId::NodalDefCor], 100, true, 0);
    let (clean, total, fixtures_clean) = clean_fraction(&r.checks);
    let ok = r.failures() == 0 && fixtures_clean == fixtures().len() && clean * 10 >= total * 9 && skips_recorded(&r.checks);
    outcome(
        ok,
        format!(
            "{} checks, {} failed; fixtures clean {fixtures_clean}/{}; random graphs clean {clean}/{total}{}",
            r.checks.len(),
            r.failures(),
            fixtures().len(),
            first_failure(&r.checks)
        ),
    )
}

fn criterion_4() -> Outcome {
    let r = suite(&[TheoremId::RobinDef, TheoremId::MorRobin], 100, true, 0);
    let mut values: BTreeMap<(String, Option<(usize, usize)>, String), Vec<i64>> = BTreeMap::new();
    for c in r.checks.iter().filter(|c| c.theorem == TheoremId::MorRobin && c.status == Status::Pass) {
        values.entry((c.source.clone(), c.eig, c.identity.clone())).or_default().extend(c.lhs);
    }
    let varying = values.values().filter(|v| v.windows(2).any(|w| w[0] != w[1])).count();
    let full_grid = values.values().filter(|v| v.len() == default_alphas().len()).count();
    let (clean, total, _) = clean_fraction(&r.checks);
    let ok = r.failures() == 0 && varying == 0 && skips_recorded(&r.checks);
    outcome(
        ok,
        format!(
            "{} checks, {} failed; {} index series, {varying} vary with α, {full_grid} cover all {} angles; random graphs clean {clean}/{total}{}",
            r.checks.len(),
            r.failures(),
            values.len(),
            default_alphas().len(),
            first_failure(&r.checks)
        ),
    )
}

fn criterion_5() -> Outcome {
    let cfg = SuiteConfig { trials: 25, tracked_random: 0, ..SuiteConfig::default() };
    let mut checks = Vec::new();
    let subjects: Vec<Subject> = fixtures()
        .into_iter()
        .filter(|s| ["fixture:interval", "fixture:star3", "fixture:cycle", "fixture:lasso"].contains(&s.source.as_str()))
        .collect();
    for s in &subjects {
        checks.extend(run_subject(s, &[TheoremId::Paths6], &cfg, false));
    }
    let fixture_fail = failures(&checks).len();
    let fixture_pass = checks.iter().filter(|c| c.status == Status::Pass).count();
    let r = suite(&[TheoremId::Paths6], 25, false, 0);
    let rand_pass = r.checks.iter().filter(|c| c.status == Status::Pass).count();
    let rand_skip = r.checks.len() - rand_pass - r.failures();
    let ok = fixture_fail == 0 && fixture_pass == checks.len() && r.failures() == 0 && rand_pass > 0 && skips_recorded(&r.checks);
    outcome(
        ok,
        format!(
            "fixtures {fixture_pass}/{} exact; random {rand_pass} exact, {} failed, {rand_skip} skipped{}{}",
            checks.len(),
            r.failures(),
            first_failure(&checks),
            first_failure(&r.checks)
        ),
    )
}

fn lhs_of<'a>(checks: &'a [TheoremCheck], id: &str) -> Option<&'a TheoremCheck> {
    checks.iter().find(|c| c.identity == id)
}

fn criterion_6() -> Outcome {
    let cfg = SuiteConfig::default();
    let subjects = fixtures();
    let two = subjects.iter().find(|s| s.source == "fixture:two-cycle").unwrap();
    let lasso = subjects.iter().find(|s| s.source == "fixture:lasso").unwrap();
    let bb = run_subject(two, &[TheoremId::BetaBeta], &cfg, true);
    let sb = run_subject(lasso, &[TheoremId::SfBeta], &cfg, true);
    let get = |c: &[TheoremCheck], id: &str| lhs_of(c, id).filter(|c| c.status == Status::Pass).and_then(|c| c.lhs);
    let a = (get(&bb, "cut0:sf"), get(&bb, "cut0:mor"));
    let b = (get(&bb, "cut1:sf"), get(&bb, "cut1:mor"));
    let sf = get(&sb, "sf-window");
    let crossings = get(&sb, "finite-crossings");
    let ok = a == (Some(2), Some(2)) && b == (Some(1), Some(1)) && sf == Some(1) && crossings == Some(1);
    outcome(
        ok,
        format!("two-cycle cut A (sf, Mor) = {a:?}, cut B = {b:?}; lasso sf over [-T, T] = {sf:?} with {crossings:?} crossings"),
    )
}

fn criterion_7() -> Outcome {
    let mut checks = Vec::new();
    for alpha in default_alphas() {
        let cfg = SuiteConfig { alphas: vec![alpha], ..SuiteConfig::default() };
        for s in fixtures() {
            checks.extend(run_subject(&s, &[TheoremId::SfWind], &cfg, true));
        }
    }
    let r = suite(&[TheoremId::SfWind], 5, false, 5);
    checks.extend(r.checks);
    let pass = checks.iter().filter(|c| c.status == Status::Pass).count();
    let g = MetricGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let mut det_err: f64 = 0.0;
    for i in 0..=400 {
        let t = -50.0 + 0.25 * i as f64;
        let u = vertex_unitary(&VertexCondition::DeltaAlpha { alpha: 0.0, t: ExtReal::Finite(t) }, &g, 1).unwrap();
        let want = Complex64::new(t, -2.0) / Complex64::new(t, 2.0);
        det_err = det_err.max((u.determinant() - want).norm());
    }
    let ok = failures(&checks).is_empty() && pass == checks.len() && det_err < 1e-10;
    outcome(
        ok,
        format!(
            "{pass}/{} sf = winds identities exact (m = 1, 2, 3); max |det U - (t-2i)/(t+2i)| = {det_err:.1e}{}",
            checks.len(),
            first_failure(&checks)
        ),
    )
}

fn random_family(rng: &mut ChaCha8Rng, alpha: f64) -> Family {
    let params = GraphParams { max_vertices: 5, max_edges: 7, ..GraphParams::default() };
    let g = random_graph(rng.gen(), &params);
    let k = rng.gen_range(1..=3).min(g.edge_count());
    let mut edges: Vec<usize> = (0..g.edge_count()).collect();
    let mut pts = Vec::new();
    for _ in 0..k {
        let e = edges.swap_remove(rng.gen_range(0..edges.len()));
        pts.push(PointSpec::EdgeFraction(e, rng.gen_range(0.15..0.85)));
    }
    let (sub, b) = place_degree_two(&g, &pts).unwrap();
    Family::new(BoundaryProblem::neumann_kirchhoff(&sub), b, qglab_core::robin_map::Coupling::Alpha(alpha)).unwrap()
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut notes = Vec::new();
    let mut ok = true;

    let (mut sym, mut worst, mut ill) = (0, 0.0f64, 0);
    while sym + ill < 200 {
        let alpha = rng.gen_range(0.0..PI);
        let fam = random_family(&mut rng, alpha);
        match fam.robin_map(rng.gen_range(-5.0..40.0)) {
            Ok(m) => {
                worst = worst.max(m.asymmetry);
                sym += 1;
            }
            Err(Error::IllDefined(_)) => ill += 1,
            Err(e) => {
                ok = false;
                notes.push(format!("robin map error {e}"));
                ill += 1;
            }
        }
    }
    ok &= worst < 1e-8;
    notes.push(format!("symmetry {sym} maps, worst {worst:.1e}"));

    let (mut planted, mut planted_ok) = (0, 0);
    for _ in 0..60 {
        let alpha = rng.gen_range(0.0..PI);
        let fam = random_family(&mut rng, alpha);
        let mu = rng.gen_range(0.3..30.0);
        let Ok(m) = fam.robin_map(mu) else { continue };
        for e in m.eigenvalues() {
            planted += 1;
            let dip = nullity(&fam.problem_at(ExtReal::Finite(-e)).unwrap(), mu) >= 1;
            let away = nullity(&fam.problem_at(ExtReal::Finite(-e + 0.5)).unwrap(), mu) == 0
                || m.eigenvalues().iter().any(|x| (x - (e - 0.5)).abs() < 1e-6);
            planted_ok += usize::from(dip && away);
        }
    }
    ok &= planted > 0 && planted_ok == planted;
    notes.push(format!("kernel planting {planted_ok}/{planted}"));

    let mut wr: f64 = 0.0;
    for i in 0..200 {
        let lambda = -30.0 + 2.0 * i as f64;
        for j in 0..30 {
            wr = wr.max((fundamental_pair(lambda, 0.1 * j as f64).wronskian() - 1.0).abs() / (lambda.abs().sqrt() * 3.0).cosh().powi(2));
        }
    }
    ok &= wr < 1e-10;
    notes.push(format!("Wronskian {wr:.1e}"));

    let (mut sub_ok, mut inter_ok, mut mono_ok) = (true, true, true);
    for _ in 0..20 {
        let fam = random_family(&mut rng, 0.0);
        let base = fam.base();
        let g = base.graph();
        let orig = first_eigenvalues(&BoundaryProblem::neumann_kirchhoff(g), 8).unwrap().expanded();
        let (sub, _) = place_degree_two(g, &[PointSpec::EdgeFraction(0, 0.37)]).unwrap();
        let refined = first_eigenvalues(&BoundaryProblem::neumann_kirchhoff(&sub), 8).unwrap().expanded();
        sub_ok &= orig.iter().zip(&refined).take(8).all(|(a, b)| (a - b).abs() < 1e-8 * a.abs().max(1.0));

        let k = fam.vertices().len() as i64;
        for _ in 0..5 {
            let mu = rng.gen_range(0.5..40.0);
            let t = rng.gen_range(-20.0..20.0);
            let a = count_below(&fam.problem_at(ExtReal::Finite(t)).unwrap(), mu).unwrap() as i64;
            let b = count_below(&fam.problem_at(ExtReal::Infinity).unwrap(), mu).unwrap() as i64;
            inter_ok &= (a - b).abs() <= k;
        }
    }
    for _ in 0..4 {
        let fam = random_family(&mut rng, 0.0);
        let ts: Vec<f64> = (0..21).map(|i| -5.0 + 0.5 * i as f64).collect();
        let rows = curve_samples(&fam, &ts, -100.0, 20.0).unwrap();
        let common = ts.iter().map(|&t| rows.iter().filter(|r| r.t == t).count()).min().unwrap();
        let kept: Vec<_> = rows.into_iter().filter(|r| r.branch <= common).collect();
        mono_ok &= branch_monotone(&kept, 1e-8).iter().all(|&(_, m)| m);
    }
    ok &= sub_ok && inter_ok && mono_ok;
    notes.push(format!("subdivision {sub_ok}, interlacing {inter_ok}, monotone branches {mono_ok}"));
    outcome(ok, notes.join("; "))
}

#[test]
fn acceptance() {
    let results = [
        run(1, "interval spectrum", Some(Duration::from_secs(1)), criterion_1),
        run(2, "loop spectral flow equals |B|", Some(Duration::from_secs(120)), criterion_2),
        run(3, "nodal deficiency identities", Some(Duration::from_secs(300)), criterion_3),
        run(4, "Robin count and α-independent indices", Some(Duration::from_secs(600)), criterion_4),
        run(5, "six-path values and antisymmetry", None, criterion_5),
        run(6, "Betti-number flows", None, criterion_6),
        run(7, "spectral flow and winding numbers", None, criterion_7),
        run(8, "property suites", None, criterion_8),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, &p)| !p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
