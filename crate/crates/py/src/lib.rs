use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use qglab_core::conditions::BoundaryProblem;
use qglab_core::flow::{curve_samples, sf_via_robin, sf_via_tracking, Family, ParameterInterval, TrackOptions};
use qglab_core::harness::{run_suite, SuiteConfig, TheoremId};
use qglab_core::io::{graph_to_json, parse_conditions, parse_graph, parse_point_list, place_degree_two};
use qglab_core::robin::{robin_domains, robin_points};
use qglab_core::robin_map::Coupling;
use qglab_core::solver::{eigenfunction, eigenvalues_in, first_eigenvalues, EigenvalueList, DEFAULT_RESOLUTION};
use qglab_core::{Error, MetricGraph};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Parse(_) | Error::Graph(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(list: &EigenvalueList) -> Vec<(usize, usize, usize, f64)> {
    list.values.iter().map(|e| (e.n, e.big_n, e.mult, e.lambda)).collect()
}

/// A compact metric graph with Neumann-Kirchhoff conditions by default.
#[pyclass(name = "Graph", module = "qglab", frozen)]
struct PyGraph {
    inner: MetricGraph,
}

#[pymethods]
impl PyGraph {
    /// Build from a vertex count and `(from, to, length)` triples.
    #[new]
    fn new(n_vertices: usize, edges: Vec<(usize, usize, f64)>) -> PyResult<Self> {
        let g = MetricGraph::from_edges(n_vertices, &edges).map_err(to_py)?;
        Ok(Self { inner: g.orient_for_degree_two() })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: parse_graph(text).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        graph_to_json(&self.inner)
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn betti(&self) -> i64 {
        self.inner.betti()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges().iter().map(|e| (e.from, e.to, e.length)).collect()
    }

    /// The first `count` eigenvalues as `(n, N, mult, lambda)` rows.
    #[pyo3(signature = (count=10, conditions=None))]
    fn spectrum(&self, py: Python<'_>, count: usize, conditions: Option<&str>) -> PyResult<Vec<(usize, usize, usize, f64)>> {
        let p = self.problem(conditions)?;
        let list = py.detach(|| first_eigenvalues(&p, count)).map_err(to_py)?;
        Ok(rows(&list))
    }

    /// Eigenvalues in `[lo, hi]` as `(n, N, mult, lambda)` rows.
    #[pyo3(signature = (lo, hi, conditions=None, resolution=DEFAULT_RESOLUTION))]
    fn spectrum_in(
        &self,
        py: Python<'_>,
        lo: f64,
        hi: f64,
        conditions: Option<&str>,
        resolution: f64,
    ) -> PyResult<Vec<(usize, usize, usize, f64)>> {
        let p = self.problem(conditions)?;
        let list = py.detach(|| eigenvalues_in(&p, lo, hi, resolution)).map_err(to_py)?;
        Ok(rows(&list))
    }

    /// Values of an orthonormal eigenbasis at `(edge, x)` points; one list per basis vector.
    fn eigenfunction_values(&self, lambda_: f64, at: Vec<(usize, f64)>) -> PyResult<Vec<Vec<f64>>> {
        let p = BoundaryProblem::neumann_kirchhoff(&self.inner);
        let fs = eigenfunction(&p, lambda_).map_err(to_py)?;
        for &(e, x) in &at {
            if e >= self.inner.edge_count() || !(0.0..=self.inner.length(e)).contains(&x) {
                return Err(PyValueError::new_err(format!("point ({e}, {x}) is not on the graph")));
            }
        }
        Ok(fs.iter().map(|f| at.iter().map(|&(e, x)| f.value(&self.inner, e, x)).collect()).collect())
    }

    /// Robin points of the `eig`-th eigenfunction (1-based) and its domain count.
    #[pyo3(signature = (eig, alpha=0.0, basis=0))]
    fn robin(&self, eig: usize, alpha: f64, basis: usize) -> PyResult<RobinResult> {
        let g = &self.inner;
        let p = BoundaryProblem::neumann_kirchhoff(g);
        let list = first_eigenvalues(&p, eig).map_err(to_py)?;
        let e = list
            .values
            .iter()
            .find(|e| e.n <= eig && eig <= e.big_n)
            .ok_or_else(|| PyRuntimeError::new_err(format!("eigenvalue {eig} not found")))?;
        let fs = eigenfunction(&p, e.lambda).map_err(to_py)?;
        let f = fs
            .get(basis)
            .ok_or_else(|| PyValueError::new_err(format!("eigenspace has dimension {}", fs.len())))?;
        let pts = robin_points(g, f, alpha).map_err(to_py)?;
        let part = robin_domains(g, &pts).map_err(to_py)?;
        Ok(RobinResult {
            lambda_: e.lambda,
            n: e.n,
            big_n: e.big_n,
            mult: e.mult,
            alpha: pts.alpha,
            points: pts.points.iter().map(|q| (q.edge, q.x)).collect(),
            domains: part.nu,
            domain_betti: part.cut.graph.betti(),
        })
    }

    /// Robin map at level `mu` for the point set `set` (vertex names or `edge:fraction`).
    #[pyo3(signature = (set, mu, alpha=0.0))]
    fn robin_map(&self, set: &str, mu: f64, alpha: f64) -> PyResult<RobinMapResult> {
        let fam = self.family(set, alpha)?;
        let m = fam.robin_map(mu).map_err(to_py)?;
        let n = m.matrix.nrows();
        Ok(RobinMapResult {
            matrix: (0..n).map(|i| (0..n).map(|j| m.matrix[(i, j)]).collect()).collect(),
            eigenvalues: m.eigenvalues(),
            mor: m.inertia.mor,
            pos: m.inertia.pos,
            null: m.inertia.null,
            asymmetry: m.asymmetry,
        })
    }

    /// Spectral flow through `mu` along `interval` (full loop if omitted).
    #[pyo3(signature = (set, mu, alpha=0.0, interval=None, method="robin"))]
    fn sf(
        &self,
        py: Python<'_>,
        set: &str,
        mu: f64,
        alpha: f64,
        interval: Option<(f64, f64)>,
        method: &str,
    ) -> PyResult<(i64, Vec<(f64, i32)>)> {
        let fam = self.family(set, alpha)?;
        let path = match interval {
            Some((a, b)) => ParameterInterval::new(a, b).map_err(to_py)?,
            None => ParameterInterval::full_loop(),
        };
        let r = match method {
            "robin" => py.detach(|| sf_via_robin(&fam, mu, path)),
            "tracking" => py.detach(|| sf_via_tracking(&fam, mu, path, TrackOptions::default())),
            _ => return Err(PyValueError::new_err(format!("unknown method {method:?}"))),
        }
        .map_err(to_py)?;
        Ok((r.sf, r.crossings.iter().map(|c| (c.theta, c.sign)).collect()))
    }

    /// Eigenvalue curves `(t, branch, lambda)` of the δ_α(t) family.
    #[pyo3(signature = (set, ts, lo, hi, alpha=0.0))]
    fn curves(
        &self,
        py: Python<'_>,
        set: &str,
        ts: Vec<f64>,
        lo: f64,
        hi: f64,
        alpha: f64,
    ) -> PyResult<Vec<(f64, usize, f64)>> {
        let fam = self.family(set, alpha)?;
        let rows = py.detach(|| curve_samples(&fam, &ts, lo, hi)).map_err(to_py)?;
        Ok(rows.iter().map(|r| (r.t, r.branch, r.lambda)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Graph(vertices={}, edges={})", self.inner.vertex_count(), self.inner.edge_count())
    }
}

impl PyGraph {
    fn problem(&self, conditions: Option<&str>) -> PyResult<BoundaryProblem> {
        match conditions {
            Some(text) => parse_conditions(&self.inner, text).map_err(to_py),
            None => Ok(BoundaryProblem::neumann_kirchhoff(&self.inner)),
        }
    }

    fn family(&self, set: &str, alpha: f64) -> PyResult<Family> {
        let pts = parse_point_list(set).map_err(to_py)?;
        let (sub, b) = place_degree_two(&self.inner, &pts).map_err(to_py)?;
        Family::new(BoundaryProblem::neumann_kirchhoff(&sub), b, Coupling::Alpha(alpha)).map_err(to_py)
    }
}

#[pyclass(module = "qglab", frozen, get_all)]
struct RobinResult {
    #[pyo3(name = "lambda_")]
    lambda_: f64,
    n: usize,
    big_n: usize,
    mult: usize,
    alpha: f64,
    points: Vec<(usize, f64)>,
    domains: usize,
    domain_betti: i64,
}

#[pyclass(module = "qglab", frozen, get_all)]
struct RobinMapResult {
    matrix: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    mor: usize,
    pos: usize,
    null: usize,
    asymmetry: f64,
}

/// Run theorem checks; returns `(json_lines, summary_table, exit_code)`.
#[pyfunction]
#[pyo3(signature = (theorem="all", trials=100, seed=1, tracked=5, fixtures=true))]
fn verify(
    py: Python<'_>,
    theorem: &str,
    trials: usize,
    seed: u64,
    tracked: usize,
    fixtures: bool,
) -> PyResult<(String, String, i32)> {
    let theorems: Vec<TheoremId> = if theorem == "all" {
        TheoremId::ALL.to_vec()
    } else {
        theorem
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, Error>>()
            .map_err(to_py)?
    };
    let cfg = SuiteConfig { trials, seed, tracked_random: tracked, include_fixtures: fixtures, ..SuiteConfig::default() };
    let report = py.detach(|| run_suite(&cfg, &theorems));
    Ok((report.json_lines(), report.summary_table(), report.exit_code()))
}

#[pymodule]
fn qglab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<RobinResult>()?;
    m.add_class::<RobinMapResult>()?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
