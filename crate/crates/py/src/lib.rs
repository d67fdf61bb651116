//! Python module `srkweak`.

use std::collections::BTreeMap;

use num_rational::Ratio;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use engine::increments::normal_moment as normal_moment_exact;
use engine::integrate::PathSimulator;
use engine::tableau::DEFAULT_ORDER_TOLERANCE;
use engine::weak_mc::{fit_order, step_count};
use engine::{IncrementDistribution, IncrementPair, McConfig, Method, PathStream, ProblemId, ReferenceProblem};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen, skip_from_py_object, name = "Tableau")]
#[derive(Clone)]
struct Tableau(engine::SrkTableau);

#[pymethods]
impl Tableau {
    #[new]
    #[pyo3(signature = (name, alpha, a, b1, b2, c = None))]
    fn new(
        name: String,
        alpha: Vec<f64>,
        a: Vec<Vec<f64>>,
        b1: Vec<f64>,
        b2: Vec<f64>,
        c: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        engine::SrkTableau::new(name, alpha, a, b1, b2, c).map(Tableau).map_err(value_error)
    }

    #[staticmethod]
    fn an3d1() -> Self {
        Tableau(engine::SrkTableau::an3d1())
    }

    #[staticmethod]
    fn euler() -> Self {
        Tableau(engine::SrkTableau::euler())
    }

    /// Parses the `key = value` tableau format.
    #[staticmethod]
    fn load(text: &str) -> PyResult<Self> {
        engine::load_tableau(text).map(Tableau).map_err(value_error)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn stages(&self) -> usize {
        self.0.stages()
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.0.alpha().to_vec()
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        self.0.a().to_vec()
    }

    #[getter]
    fn b1(&self) -> Vec<f64> {
        self.0.b1().to_vec()
    }

    #[getter]
    fn b2(&self) -> Vec<f64> {
        self.0.b2().to_vec()
    }

    #[getter]
    fn c(&self) -> Vec<f64> {
        self.0.c().to_vec()
    }

    #[getter]
    fn explicit(&self) -> bool {
        self.0.is_explicit()
    }

    #[pyo3(signature = (tol = DEFAULT_ORDER_TOLERANCE))]
    fn check_order(&self, tol: f64) -> PyResult<OrderReport> {
        let r = engine::check_stochastic_order(&self.0, tol).map_err(value_error)?;
        Ok(OrderReport {
            stochastic_order: r.stochastic_order,
            deterministic_order: r.deterministic_order,
            residuals: r.residuals.iter().map(|(id, v)| (id.to_string(), *v)).collect(),
        })
    }

    fn to_document(&self) -> String {
        self.0.to_document()
    }

    fn __repr__(&self) -> String {
        format!("Tableau({:?}, stages={})", self.0.name(), self.0.stages())
    }
}

#[pyclass(frozen, get_all)]
struct OrderReport {
    stochastic_order: u8,
    deterministic_order: u8,
    residuals: BTreeMap<String, f64>,
}

#[pyclass(frozen, skip_from_py_object, get_all)]
#[derive(Clone)]
struct WeakErrorRecord {
    method: String,
    problem: String,
    h: f64,
    paths: u64,
    seed: u64,
    mu_hat: f64,
    sigma2_mu: f64,
    ci_lo: f64,
    ci_hi: f64,
    effort_per_path: f64,
    diverged_paths: u64,
}

#[pymethods]
impl WeakErrorRecord {
    fn __repr__(&self) -> String {
        format!(
            "WeakErrorRecord(method={:?}, problem={:?}, h={}, mu_hat={:e}, ci=[{:e}, {:e}])",
            self.method, self.problem, self.h, self.mu_hat, self.ci_lo, self.ci_hi
        )
    }
}

impl From<engine::WeakErrorRecord> for WeakErrorRecord {
    fn from(r: engine::WeakErrorRecord) -> Self {
        Self {
            method: r.method,
            problem: r.problem,
            h: r.h,
            paths: r.paths,
            seed: r.seed,
            mu_hat: r.mu_hat,
            sigma2_mu: r.sigma2_mu,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            effort_per_path: r.effort_per_path,
            diverged_paths: r.diverged_paths,
        }
    }
}

impl WeakErrorRecord {
    fn to_core(&self) -> engine::WeakErrorRecord {
        engine::WeakErrorRecord {
            method: self.method.clone(),
            problem: self.problem.clone(),
            h: self.h,
            paths: self.paths,
            seed: self.seed,
            mu_hat: self.mu_hat,
            sigma2_mu: self.sigma2_mu,
            ci_lo: self.ci_lo,
            ci_hi: self.ci_hi,
            effort_per_path: self.effort_per_path,
            diverged_paths: self.diverged_paths,
        }
    }
}

/// A method is a selector string (`an3d1`, `euler`, `exem`, `tableau:<file>`) or a `Tableau`.
fn method_from(obj: &Bound<'_, PyAny>) -> PyResult<Method> {
    if let Ok(t) = obj.cast::<Tableau>() {
        return Ok(Method::Step(engine::StepMethod::srk(t.get().0.clone())));
    }
    let s: String = obj.extract()?;
    Method::from_selector(&s).map_err(value_error)
}

fn problem_from(name: &str) -> PyResult<ReferenceProblem> {
    name.parse::<ProblemId>().map(ProblemId::build).map_err(value_error)
}

fn config(paths: u64, seed: u64, dist: &str, threads: Option<usize>) -> PyResult<McConfig> {
    let mut cfg = McConfig::new(paths, seed).with_increments(IncrementPair::from_selector(dist).map_err(value_error)?);
    cfg.threads = threads;
    Ok(cfg)
}

/// Weak error `E f(Y^h(T)) − u(T)` estimated from `paths` simulated paths.
#[pyfunction]
#[pyo3(signature = (method, problem, h, paths = 1_000_000, seed = 42, dist = "gaussian", threads = None))]
#[allow(clippy::too_many_arguments)]
fn weak_error(
    py: Python<'_>,
    method: &Bound<'_, PyAny>,
    problem: &str,
    h: f64,
    paths: u64,
    seed: u64,
    dist: &str,
    threads: Option<usize>,
) -> PyResult<WeakErrorRecord> {
    let method = method_from(method)?;
    let problem = problem_from(problem)?;
    let cfg = config(paths, seed, dist, threads)?;
    py.detach(|| engine::weak_error(&method, &problem, h, &cfg))
        .map(Into::into)
        .map_err(value_error)
}

/// Records for each step size (descending) and the fitted weak order, or `None`.
#[pyfunction]
#[pyo3(signature = (method, problem, h_list, paths = 1_000_000, seed = 42, dist = "gaussian", threads = None))]
#[allow(clippy::too_many_arguments)]
fn convergence_study(
    py: Python<'_>,
    method: &Bound<'_, PyAny>,
    problem: &str,
    h_list: Vec<f64>,
    paths: u64,
    seed: u64,
    dist: &str,
    threads: Option<usize>,
) -> PyResult<(Vec<WeakErrorRecord>, Option<f64>)> {
    let method = method_from(method)?;
    let problem = problem_from(problem)?;
    let cfg = config(paths, seed, dist, threads)?;
    let study = py
        .detach(|| engine::convergence_study(&method, &problem, &h_list, &cfg))
        .map_err(value_error)?;
    Ok((study.records.into_iter().map(Into::into).collect(), study.fitted_order))
}

/// Slope of `log2 |mu_hat|` against `log2 h` over the statistically resolved records.
#[pyfunction]
fn fitted_order(records: Vec<PyRef<'_, WeakErrorRecord>>) -> Option<f64> {
    let core_records: Vec<_> = records.iter().map(|r| r.to_core()).collect();
    fit_order(&core_records)
}

#[pyfunction]
fn effort(method: &Bound<'_, PyAny>, problem: &str, h: f64) -> PyResult<f64> {
    engine::effort(&method_from(method)?, &problem_from(problem)?, h).map_err(value_error)
}

/// Terminal state of path `path` of the stream family `seed`.
#[pyfunction]
#[pyo3(signature = (method, problem, h, seed = 0, path = 0, dist = "gaussian"))]
fn simulate_path(
    method: &Bound<'_, PyAny>,
    problem: &str,
    h: f64,
    seed: u64,
    path: u64,
    dist: &str,
) -> PyResult<Vec<f64>> {
    let step = match method_from(method)? {
        Method::Step(s) => s,
        Method::Exem => return Err(PyValueError::new_err("exem is not a single-path method")),
    };
    let problem = problem_from(problem)?;
    let n = step_count(&problem, h).map_err(value_error)?;
    let pair = IncrementPair::from_selector(dist).map_err(value_error)?;
    let mut sim = PathSimulator::new(&step, &problem.sde).map_err(value_error)?;
    let mut y = Vec::new();
    let mut stream = PathStream::new(seed, engine::rng::PRIMARY_LANE, path);
    sim.simulate(h, n, pair, &mut stream, &mut y).map_err(value_error)?;
    Ok(y)
}

/// Closed-form `E f(X(t))` of a reference problem.
#[pyfunction]
fn exact(problem: &str, t: f64) -> PyResult<f64> {
    Ok(problem_from(problem)?.exact(t))
}

/// `k`-th moment of an increment law as a `fractions.Fraction`.
#[pyfunction]
fn moment<'py>(py: Python<'py>, dist: &str, k: u32) -> PyResult<Bound<'py, PyAny>> {
    let law: IncrementDistribution = dist.parse().map_err(value_error)?;
    let fraction = py.import("fractions")?.getattr("Fraction")?;
    fraction.call1((law.moment(k).to_string(),))
}

#[pyfunction]
fn normal_moment<'py>(py: Python<'py>, k: u32) -> PyResult<Bound<'py, PyAny>> {
    py.import("builtins")?.getattr("int")?.call1((normal_moment_exact(k).to_string(),))
}

/// Names of the increment laws sufficient for weak order `p`.
#[pyfunction]
fn required_distributions(p: u32) -> PyResult<(String, String)> {
    let pair = engine::required_distributions(p).map_err(value_error)?;
    Ok((pair.first.short_name().into(), pair.second.short_name().into()))
}

/// `(tree, rho, alpha)` for every tree of order at most `max_order` (rounded down to a half).
#[pyfunction]
fn enumerate_trees(max_order: f64, m: u32) -> PyResult<Vec<(String, String, String)>> {
    if max_order.is_nan() || max_order < 0.0 {
        return Err(PyValueError::new_err("max_order must be nonnegative"));
    }
    let bound = Ratio::new((2.0 * max_order).floor() as i64, 2);
    Ok(engine::enumerate_tadd(bound, m)
        .iter()
        .map(|t| (t.to_string(), t.rho().to_string(), t.density().to_string()))
        .collect())
}

#[pyfunction]
fn relevant_trees(p: u32, m: u32) -> Vec<String> {
    engine::relevant_f_trees(p, m).iter().map(|t| t.to_string()).collect()
}

/// One `j, k` pattern per shape family of the relevant trees of order `p`.
#[pyfunction]
fn shape_families(p: u32, m: u32) -> Vec<String> {
    engine::shape_families(&engine::relevant_f_trees(p, m))
        .iter()
        .map(|f| f.pattern())
        .collect()
}

#[pymodule]
fn srkweak(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Tableau>()?;
    m.add_class::<OrderReport>()?;
    m.add_class::<WeakErrorRecord>()?;
    m.add_function(wrap_pyfunction!(weak_error, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(fitted_order, m)?)?;
    m.add_function(wrap_pyfunction!(effort, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_path, m)?)?;
    m.add_function(wrap_pyfunction!(exact, m)?)?;
    m.add_function(wrap_pyfunction!(moment, m)?)?;
    m.add_function(wrap_pyfunction!(normal_moment, m)?)?;
    m.add_function(wrap_pyfunction!(required_distributions, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_trees, m)?)?;
    m.add_function(wrap_pyfunction!(relevant_trees, m)?)?;
    m.add_function(wrap_pyfunction!(shape_families, m)?)?;
    Ok(())
}
