use clap::{Args, Parser, Subcommand};
use qglab_core::conditions::{BoundaryProblem, ExtReal};
use qglab_core::flow::{curve_samples, sf_via_robin, sf_via_tracking, Family, ParameterInterval, SFResult, TrackOptions};
use qglab_core::harness::{run_suite, SuiteConfig, TheoremId};
use qglab_core::io::{fmt_num, parse_conditions, parse_point_list, parse_real, place_degree_two, read_graph, write_curves_csv};
use qglab_core::robin::{euler_identity_check, robin_domains, robin_points};
use qglab_core::robin_map::Coupling;
use qglab_core::solver::{eigenfunction, eigenvalues_in, first_eigenvalues, DEFAULT_RESOLUTION};
use qglab_core::{Error, MetricGraph, Result};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qglab", version, about = "Spectra, Robin points and spectral flow on metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues with multiplicities and counting indices.
    Spectrum(SpectrumArgs),
    /// Robin points and Robin domains of an eigenfunction.
    Robin(RobinArgs),
    /// Spectral flow of a δ_α(t) family through a level.
    Sf(SfArgs),
    /// Eigenvalue curves of a δ_α(t) family as CSV.
    Curves(CurvesArgs),
    /// Run the index-theorem checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SpectrumArgs {
    graph: PathBuf,
    /// Number of eigenvalues from the bottom of the spectrum.
    #[arg(long, default_value_t = 10, conflicts_with = "window")]
    count: usize,
    /// Eigenvalues in [LO, HI] instead.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    window: Option<Vec<f64>>,
    /// Vertex-condition overlay (JSON).
    #[arg(long)]
    conditions: Option<PathBuf>,
    /// Grid resolution of the root scan.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: f64,
}

#[derive(Args)]
struct RobinArgs {
    graph: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    alpha: f64,
    /// Position of the eigenvalue in the ordered spectrum (1-based).
    #[arg(long)]
    eig: usize,
    /// Basis vector within a multiple eigenspace.
    #[arg(long, default_value_t = 0)]
    basis: usize,
}

#[derive(Args)]
struct FamilyArgs {
    graph: PathBuf,
    /// Points of B: vertex ids (degree two) or edge:fraction.
    #[arg(long)]
    set: String,
    /// Angle of the δ_α(t) coupling.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    alpha: f64,
}

#[derive(Args)]
struct SfArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Spectral level μ.
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    /// Parameter interval a,b (inf allowed); the full loop if omitted.
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    /// Largest initial θ step of the tracker.
    #[arg(long, default_value_t = TrackOptions::default().max_step)]
    max_step: f64,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Grid a:b:n of t-values (n points, endpoints included).
    #[arg(long, default_value = "-10:10:201", allow_hyphen_values = true)]
    t_grid: String,
    /// Eigenvalue window lo,hi.
    #[arg(long, default_value = "0,30", allow_hyphen_values = true)]
    window: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Theorem id or `all`.
    #[arg(long, default_value = "all")]
    theorem: String,
    /// Number of random graphs.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (never changes results).
    #[arg(long)]
    jobs: Option<usize>,
    /// Random graphs that also run the curve-tracking checks.
    #[arg(long, default_value_t = 5)]
    tracked: usize,
    /// Skip the curated fixtures.
    #[arg(long)]
    no_fixtures: bool,
    /// Write one JSON record per check to this file.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let res = match cli.command {
        Command::Spectrum(a) => cmd_spectrum(a, &mut out),
        Command::Robin(a) => cmd_robin(a, &mut out),
        Command::Sf(a) => cmd_sf(a, &mut out),
        Command::Curves(a) => cmd_curves(a, &mut out),
        Command::Verify(a) => cmd_verify(a, &mut out),
    };
    match res {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(format!("I/O: {e}"))
}

fn cmd_spectrum(a: SpectrumArgs, out: &mut impl Write) -> Result<i32> {
    let g = read_graph(&a.graph)?;
    let p = match &a.conditions {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            parse_conditions(&g, &text)?
        }
        None => BoundaryProblem::neumann_kirchhoff(&g),
    };
    let list = match &a.window {
        Some(w) => eigenvalues_in(&p, w[0], w[1], a.resolution)?,
        None => first_eigenvalues(&p, a.count)?,
    };
    writeln!(out, "n\tN\tmult\tlambda").map_err(io_err)?;
    for e in &list.values {
        writeln!(out, "{}\t{}\t{}\t{}", e.n, e.big_n, e.mult, fmt_num(e.lambda)).map_err(io_err)?;
    }
    Ok(0)
}

fn cmd_robin(a: RobinArgs, out: &mut impl Write) -> Result<i32> {
    let g = read_graph(&a.graph)?;
    let p = BoundaryProblem::neumann_kirchhoff(&g);
    let list = first_eigenvalues(&p, a.eig)?;
    let e = list
        .values
        .iter()
        .find(|e| e.n <= a.eig && a.eig <= e.big_n)
        .ok_or_else(|| Error::Solver(format!("eigenvalue {} not found", a.eig)))?;
    let fs = eigenfunction(&p, e.lambda)?;
    let f = fs
        .get(a.basis)
        .ok_or_else(|| Error::Parse(format!("eigenspace has dimension {}", fs.len())))?;
    let pts = robin_points(&g, f, a.alpha)?;
    let part = robin_domains(&g, &pts)?;
    let (beta, rhs) = euler_identity_check(&g, &pts, &part);
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io_err);
    w(out, format!("lambda\t{}", fmt_num(e.lambda)))?;
    w(out, format!("n\t{}\nN\t{}\nmult\t{}", e.n, e.big_n, e.mult))?;
    w(out, format!("alpha\t{}", fmt_num(pts.alpha)))?;
    w(out, format!("points\t{}", pts.len()))?;
    for q in &pts.points {
        let at = match q.vertex {
            Some(v) => format!("vertex {}", g.name(v)),
            None => "interior".into(),
        };
        w(out, format!("  edge {}\tx {}\t{at}", q.edge, fmt_num(q.x)))?;
    }
    w(out, format!("domains\t{}", part.nu))?;
    w(out, format!("betti\t{beta}"))?;
    w(out, format!("points - domains + 1 - betti(domains)\t{}", rhs - part.cut.graph.betti()))?;
    Ok(0)
}

fn build_family(a: &FamilyArgs) -> Result<(MetricGraph, Family)> {
    let g = read_graph(&a.graph)?;
    let pts = parse_point_list(&a.set)?;
    let (sub, b) = place_degree_two(&g, &pts)?;
    let fam = Family::new(BoundaryProblem::neumann_kirchhoff(&sub), b, Coupling::Alpha(a.alpha))?;
    Ok((sub, fam))
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("expected a,b but got {s:?}")))?;
    Ok((parse_real(a)?, parse_real(b)?))
}

fn write_sf(out: &mut impl Write, label: &str, r: &SFResult) -> Result<()> {
    writeln!(out, "{label}\tsf {}", r.sf).map_err(io_err)?;
    for c in &r.crossings {
        let t = match c.t {
            ExtReal::Finite(t) => fmt_num(t),
            ExtReal::Infinity => "inf".into(),
        };
        writeln!(out, "  t {t}\ttheta {}\tsign {:+}", fmt_num(c.theta), c.sign).map_err(io_err)?;
    }
    Ok(())
}

fn cmd_sf(a: SfArgs, out: &mut impl Write) -> Result<i32> {
    let (_, fam) = build_family(&a.family)?;
    let path = match &a.interval {
        Some(s) => {
            let (x, y) = parse_pair(s)?;
            ParameterInterval::new(x, y)?
        }
        None => ParameterInterval::full_loop(),
    };
    let map = fam.robin_map(a.mu)?;
    let robin = sf_via_robin(&fam, a.mu, path)?;
    let opts = TrackOptions { max_step: a.max_step, ..TrackOptions::default() };
    let tracked = sf_via_tracking(&fam, a.mu, path, opts)?;
    writeln!(out, "mu\t{}", fmt_num(a.mu)).map_err(io_err)?;
    writeln!(out, "|B|\t{}", fam.vertices().len()).map_err(io_err)?;
    writeln!(out, "Mor\t{}\nPos\t{}", map.inertia.mor, map.inertia.pos).map_err(io_err)?;
    write_sf(out, "robin-map", &robin)?;
    write_sf(out, "tracking", &tracked)?;
    if tracked.monotonicity_violations > 0 {
        writeln!(out, "monotonicity violations\t{}", tracked.monotonicity_violations).map_err(io_err)?;
    }
    if robin.sf != tracked.sf {
        eprintln!("methods disagree: robin-map {} vs tracking {}", robin.sf, tracked.sf);
        return Ok(1);
    }
    Ok(0)
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("grid must be a:b:n, got {s:?}")));
    }
    let a: f64 = parts[0].parse().map_err(|_| Error::Parse(format!("bad grid start {:?}", parts[0])))?;
    let b: f64 = parts[1].parse().map_err(|_| Error::Parse(format!("bad grid end {:?}", parts[1])))?;
    let n: usize = parts[2].parse().map_err(|_| Error::Parse(format!("bad grid size {:?}", parts[2])))?;
    if n < 2 || !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Parse("grid needs finite a < b and n ≥ 2".into()));
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn cmd_curves(a: CurvesArgs, out: &mut impl Write) -> Result<i32> {
    let (_, fam) = build_family(&a.family)?;
    let ts = parse_grid(&a.t_grid)?;
    let (lo, hi) = parse_pair(&a.window)?;
    let rows = curve_samples(&fam, &ts, lo, hi)?;
    match &a.output {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(io_err)?;
            write_curves_csv(&rows, std::io::BufWriter::new(file)).map_err(io_err)?;
        }
        None => write_curves_csv(&rows, out).map_err(io_err)?,
    }
    Ok(0)
}

fn cmd_verify(a: VerifyArgs, out: &mut impl Write) -> Result<i32> {
    let theorems: Vec<TheoremId> = if a.theorem == "all" {
        TheoremId::ALL.to_vec()
    } else {
        a.theorem.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?
    };
    let cfg = SuiteConfig {
        trials: a.trials,
        seed: a.seed,
        include_fixtures: !a.no_fixtures,
        tracked_random: a.tracked,
        jobs: a.jobs,
        ..SuiteConfig::default()
    };
    let report = run_suite(&cfg, &theorems);
    if let Some(path) = &a.json {
        std::fs::write(path, report.json_lines()).map_err(io_err)?;
    } else {
        write!(out, "{}", report.json_lines()).map_err(io_err)?;
    }
    write!(out, "{}", report.summary_table()).map_err(io_err)?;
    Ok(report.exit_code())
}
