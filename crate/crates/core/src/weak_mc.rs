//! Monte Carlo estimation of `E f(Y^h(T))`, weak-error records with 90% confidence
//! intervals, the extrapolated Euler-Maruyama estimator, effort accounting and
//! convergence-order fits.
//!
//! Path `k` draws all of its randomness from the stream `(seed, lane, k)`. Paths are
//! grouped in blocks of [`BLOCK_SIZE`]; each block is reduced by pairwise summation and
//! blocks are merged in index order, so results do not depend on the worker count.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::increments::IncrementPair;
use crate::integrate::{IntegrateError, PathSimulator, StepMethod};
use crate::rng::{PathStream, PRIMARY_LANE};
use crate::sde::ReferenceProblem;
use crate::stats::{least_squares_slope, Moments, Z_90};
use crate::tableau::{load_tableau, SrkTableau, TableauError};

pub const BLOCK_SIZE: u64 = 1 << 16;

/// Lanes of the two independent Euler runs behind the extrapolated estimator.
pub const EXEM_FINE_LANE: u64 = 1;
pub const EXEM_COARSE_LANE: u64 = 2;

/// A point counts as resolved when `|μ̂|` exceeds this many CI half-widths.
pub const RESOLVED_HALF_WIDTHS: f64 = 3.0;

#[derive(Debug, Error)]
pub enum McError {
    #[error("interval length {span} is not an integer multiple of step {h}")]
    NonIntegerSteps { span: f64, h: f64 },
    #[error("at least two paths are required, got {0}")]
    TooFewPaths(u64),
    #[error("a convergence study needs at least two step sizes")]
    TooFewStepSizes,
    #[error("step sizes must be strictly decreasing")]
    NotDescending,
    #[error("invalid method selector `{0}`")]
    UnknownMethod(String),
    #[error("cannot read tableau file: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// What is being estimated: a single-grid step method, or the extrapolated
/// Euler-Maruyama combination `2 E f(Z^{h/2}) − E f(Z^h)`.
#[derive(Debug, Clone)]
pub enum Method {
    Step(StepMethod),
    Exem,
}

impl Method {
    pub fn an3d1() -> Self {
        Method::Step(StepMethod::srk(SrkTableau::an3d1()))
    }

    pub fn euler() -> Self {
        Method::Step(StepMethod::EulerMaruyama)
    }

    pub fn name(&self) -> String {
        match self {
            Method::Step(m) => m.name(),
            Method::Exem => "exem".to_string(),
        }
    }

    /// Parses `an3d1`, `euler`, `exem` or `tableau:<file>`.
    pub fn from_selector(selector: &str) -> Result<Self, McError> {
        let s = selector.trim();
        if let Some(path) = s.strip_prefix("tableau:") {
            return Self::from_tableau_file(path);
        }
        match s.to_ascii_lowercase().as_str() {
            "an3d1" => Ok(Self::an3d1()),
            "euler" | "em" => Ok(Self::euler()),
            "exem" => Ok(Method::Exem),
            _ => Err(McError::UnknownMethod(selector.to_string())),
        }
    }

    pub fn from_tableau_file(path: impl AsRef<Path>) -> Result<Self, McError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Method::Step(StepMethod::srk(load_tableau(&text)?)))
    }
}

impl FromStr for Method {
    type Err = McError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_selector(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: u64,
    pub seed: u64,
    pub increments: IncrementPair,
    /// Worker threads; `None` uses the global rayon pool. Never affects results.
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(paths: u64, seed: u64) -> Self {
        Self {
            paths,
            seed,
            increments: IncrementPair::GAUSSIAN,
            threads: None,
        }
    }

    pub fn with_increments(mut self, increments: IncrementPair) -> Self {
        self.increments = increments;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub var_of_mean: f64,
    pub effort_per_path: f64,
    pub paths: u64,
    pub diverged_paths: u64,
}

impl Estimate {
    pub fn is_divergent(&self) -> bool {
        self.diverged_paths > 0
    }
}

/// One row of a weak-error table.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakErrorRecord {
    pub method: String,
    pub problem: String,
    pub h: f64,
    pub paths: u64,
    pub seed: u64,
    pub mu_hat: f64,
    pub sigma2_mu: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub effort_per_path: f64,
    pub diverged_paths: u64,
}

impl WeakErrorRecord {
    pub fn half_width(&self) -> f64 {
        Z_90 * self.sigma2_mu.sqrt()
    }

    pub fn is_divergent(&self) -> bool {
        self.diverged_paths > 0
    }

    /// Systematic error distinguishable from Monte Carlo noise.
    pub fn is_resolved(&self) -> bool {
        !self.is_divergent() && self.mu_hat.abs() > RESOLVED_HALF_WIDTHS * self.half_width()
    }
}

impl fmt::Display for WeakErrorRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} h={} M={}: mu={:e} var={:e} [{:e}, {:e}] effort={}",
            self.method,
            self.problem,
            self.h,
            self.paths,
            self.mu_hat,
            self.sigma2_mu,
            self.ci_lo,
            self.ci_hi,
            self.effort_per_path
        )?;
        if self.is_divergent() {
            write!(f, " diverged={}", self.diverged_paths)?;
        }
        Ok(())
    }
}

/// Number of uniform steps of size `h` covering `[t0, T]`.
pub fn step_count(problem: &ReferenceProblem, h: f64) -> Result<usize, McError> {
    let span = problem.t_end - problem.sde.t0();
    let ratio = span / h;
    let n = ratio.round();
    if h.is_nan() || h <= 0.0 || !ratio.is_finite() || n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(McError::NonIntegerSteps { span, h });
    }
    Ok(n as usize)
}

#[derive(Default)]
struct BlockResult {
    moments: Moments,
    diverged: u64,
    effort: u64,
}

fn run_block(
    method: &StepMethod,
    problem: &ReferenceProblem,
    h: f64,
    n_steps: usize,
    cfg: &McConfig,
    lane: u64,
    block: u64,
) -> Result<BlockResult, IntegrateError> {
    let start = block * BLOCK_SIZE;
    let end = (start + BLOCK_SIZE).min(cfg.paths);
    let mut sim = PathSimulator::new(method, &problem.sde)?;
    let mut y = Vec::with_capacity(problem.sde.dim());
    let mut values = Vec::with_capacity((end - start) as usize);
    let mut result = BlockResult::default();
    for path in start..end {
        let mut stream = PathStream::new(cfg.seed, lane, path);
        match sim.simulate(h, n_steps, cfg.increments, &mut stream, &mut y) {
            Ok(counters) => {
                result.effort += counters.effort();
                let v = problem.functional(&y);
                if v.is_finite() {
                    values.push(v);
                } else {
                    result.diverged += 1;
                }
            }
            Err(IntegrateError::Divergence { .. }) => {
                result.effort += (n_steps
                    * (method.drift_evals_per_step() + method.increments_per_step(problem.sde.noise_dim())))
                    as u64;
                result.diverged += 1;
            }
            Err(e) => return Err(e),
        }
    }
    result.moments = Moments::from_block(&values, &mut Vec::with_capacity(values.len()));
    Ok(result)
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, McError> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| McError::ThreadPool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

fn estimate_on_lane(
    method: &StepMethod,
    problem: &ReferenceProblem,
    h: f64,
    cfg: &McConfig,
    lane: u64,
) -> Result<Estimate, McError> {
    if cfg.paths < 2 {
        return Err(McError::TooFewPaths(cfg.paths));
    }
    let n_steps = step_count(problem, h)?;
    PathSimulator::new(method, &problem.sde)?;
    let n_blocks = cfg.paths.div_ceil(BLOCK_SIZE);
    let blocks: Vec<Result<BlockResult, IntegrateError>> = with_pool(cfg.threads, || {
        (0..n_blocks)
            .into_par_iter()
            .map(|b| run_block(method, problem, h, n_steps, cfg, lane, b))
            .collect()
    })?;

    let mut moments = Moments::default();
    let mut diverged = 0;
    let mut effort = 0u64;
    for block in blocks {
        let block = block?;
        moments = moments.merge(block.moments);
        diverged += block.diverged;
        effort += block.effort;
    }
    let (mean, var_of_mean) = if diverged > 0 {
        (f64::NAN, f64::NAN)
    } else {
        (moments.mean, moments.sample_variance() / cfg.paths as f64)
    };
    Ok(Estimate {
        mean,
        var_of_mean,
        effort_per_path: effort as f64 / cfg.paths as f64,
        paths: cfg.paths,
        diverged_paths: diverged,
    })
}

/// Sample mean of `f(Y^h(T))` over `cfg.paths` independent paths, the variance of
/// that mean (`S²/M`) and the average effort per path.
pub fn estimate_functional(
    method: &StepMethod,
    problem: &ReferenceProblem,
    h: f64,
    cfg: &McConfig,
) -> Result<Estimate, McError> {
    estimate_on_lane(method, problem, h, cfg, PRIMARY_LANE)
}

fn record(method: String, problem: &ReferenceProblem, h: f64, cfg: &McConfig, est: Estimate) -> WeakErrorRecord {
    let (mu_hat, sigma2_mu) = if est.is_divergent() {
        (f64::NAN, f64::NAN)
    } else {
        (est.mean - problem.exact(problem.t_end), est.var_of_mean)
    };
    let half = Z_90 * sigma2_mu.sqrt();
    WeakErrorRecord {
        method,
        problem: problem.label.clone(),
        h,
        paths: cfg.paths,
        seed: cfg.seed,
        mu_hat,
        sigma2_mu,
        ci_lo: mu_hat - half,
        ci_hi: mu_hat + half,
        effort_per_path: est.effort_per_path,
        diverged_paths: est.diverged_paths,
    }
}

/// `μ̂ = u_{M,h}(T) − u(T)` with its 90% confidence interval.
pub fn weak_error(
    method: &Method,
    problem: &ReferenceProblem,
    h: f64,
    cfg: &McConfig,
) -> Result<WeakErrorRecord, McError> {
    match method {
        Method::Exem => exem_weak_error(problem, h, cfg),
        Method::Step(step) => {
            let est = estimate_functional(step, problem, h, cfg)?;
            Ok(record(method.name(), problem, h, cfg, est))
        }
    }
}

/// Extrapolated Euler-Maruyama: `2 E f(Z^{h/2}) − E f(Z^h)` from two independent
/// runs on disjoint lanes, with variance `4 var_fine + var_coarse`.
pub fn exem_weak_error(
    problem: &ReferenceProblem,
    h: f64,
    cfg: &McConfig,
) -> Result<WeakErrorRecord, McError> {
    step_count(problem, h)?;
    let euler = StepMethod::EulerMaruyama;
    let fine = estimate_on_lane(&euler, problem, h / 2.0, cfg, EXEM_FINE_LANE)?;
    let coarse = estimate_on_lane(&euler, problem, h, cfg, EXEM_COARSE_LANE)?;
    let combined = Estimate {
        mean: 2.0 * fine.mean - coarse.mean,
        var_of_mean: 4.0 * fine.var_of_mean + coarse.var_of_mean,
        effort_per_path: fine.effort_per_path + coarse.effort_per_path,
        paths: cfg.paths,
        diverged_paths: fine.diverged_paths + coarse.diverged_paths,
    };
    Ok(record("exem".to_string(), problem, h, cfg, combined))
}

/// Per-path effort (drift evaluations plus random variates) for step size `h`.
pub fn effort(method: &Method, problem: &ReferenceProblem, h: f64) -> Result<f64, McError> {
    let n = step_count(problem, h)?;
    let m = problem.sde.noise_dim();
    let per_path = match method {
        Method::Step(step) => n * (step.drift_evals_per_step() + step.increments_per_step(m)),
        Method::Exem => 3 * n * (1 + m),
    };
    Ok(per_path as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub records: Vec<WeakErrorRecord>,
    /// Slope of `log2 |μ̂|` against `log2 h` over resolved records, or `None` when
    /// fewer than two are resolved.
    pub fitted_order: Option<f64>,
}

/// Fitted weak order over the statistically resolved records.
pub fn fit_order(records: &[WeakErrorRecord]) -> Option<f64> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.is_resolved())
        .map(|r| (r.h.log2(), r.mu_hat.abs().log2()))
        .collect();
    least_squares_slope(&points)
}

pub fn convergence_study(
    method: &Method,
    problem: &ReferenceProblem,
    h_list: &[f64],
    cfg: &McConfig,
) -> Result<ConvergenceStudy, McError> {
    if h_list.len() < 2 {
        return Err(McError::TooFewStepSizes);
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(McError::NotDescending);
    }
    let records = h_list
        .iter()
        .map(|&h| weak_error(method, problem, h, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let fitted_order = fit_order(&records);
    Ok(ConvergenceStudy {
        records,
        fitted_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{custom_sde, ex1, ex3};
    use std::sync::Arc;

    fn drift_free(f_square: bool) -> ReferenceProblem {
        let sde = custom_sde(
            1,
            1,
            Arc::new(|_, _, o: &mut [f64]| o.fill(0.0)),
            vec![vec![0.5]],
            0.0,
            vec![1.0],
        )
        .unwrap();
        if f_square {
            ReferenceProblem::new("wiener2", sde, Arc::new(|x| x[0] * x[0]), Arc::new(|t| 1.0 + 0.25 * t), 1.0)
        } else {
            ReferenceProblem::new("wiener", sde, Arc::new(|x| x[0]), Arc::new(|_| 1.0), 1.0)
        }
    }

    #[test]
    fn step_counts() {
        let p = ex1();
        assert_eq!(step_count(&p, 0.25).unwrap(), 8);
        assert_eq!(step_count(&p, 2.0).unwrap(), 1);
        assert!(matches!(step_count(&p, 0.3), Err(McError::NonIntegerSteps { .. })));
        assert!(step_count(&p, 4.0).is_err());
    }

    #[test]
    fn effort_counts() {
        assert_eq!(effort(&Method::an3d1(), &ex1(), 0.25).unwrap(), 48.0);
        assert_eq!(effort(&Method::euler(), &ex3(), 1.0).unwrap(), 6.0);
        assert_eq!(effort(&Method::Exem, &ex1(), 0.5).unwrap(), 24.0);
    }

    #[test]
    fn measured_effort_matches_count() {
        let cfg = McConfig::new(100, 1);
        let rec = weak_error(&Method::Exem, &ex1(), 0.5, &cfg).unwrap();
        assert_eq!(rec.effort_per_path, 24.0);
        let rec = weak_error(&Method::an3d1(), &ex3(), 1.0, &cfg).unwrap();
        assert_eq!(rec.effort_per_path, 2.0 * (4.0 + 4.0));
    }

    #[test]
    fn drift_free_linear_functional_is_unbiased() {
        let p = drift_free(false);
        for method in [Method::an3d1(), Method::euler(), Method::Exem] {
            let rec = weak_error(&method, &p, 0.25, &McConfig::new(20_000, 5)).unwrap();
            assert!(rec.mu_hat.abs() <= 4.0 * rec.sigma2_mu.sqrt(), "{rec}");
            assert!(rec.ci_lo <= rec.mu_hat && rec.mu_hat <= rec.ci_hi);
        }
    }

    #[test]
    fn exem_exact_for_drift_free_second_moment() {
        let rec = exem_weak_error(&drift_free(true), 0.25, &McConfig::new(50_000, 11)).unwrap();
        assert!(rec.mu_hat.abs() <= 4.0 * rec.sigma2_mu.sqrt(), "{rec}");
    }

    #[test]
    fn identical_seed_is_bitwise_reproducible() {
        let p = drift_free(false);
        let cfg = McConfig::new(2, 77);
        let a = estimate_functional(&StepMethod::EulerMaruyama, &p, 0.5, &cfg).unwrap();
        let b = estimate_functional(&StepMethod::EulerMaruyama, &p, 0.5, &cfg).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.var_of_mean.to_bits(), b.var_of_mean.to_bits());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = ex3();
        let base = McConfig::new(3 * BLOCK_SIZE / 2, 9);
        let one = weak_error(&Method::an3d1(), &p, 1.0, &base.with_threads(1)).unwrap();
        let three = weak_error(&Method::an3d1(), &p, 1.0, &base.with_threads(3)).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn divergent_paths_flag_the_record() {
        let sde = custom_sde(1, 1, Arc::new(|_, x, o: &mut [f64]| o[0] = x[0] * x[0] * x[0]), vec![vec![1.0]], 0.0, vec![3.0])
            .unwrap();
        let p = ReferenceProblem::new("blowup", sde, Arc::new(|x| x[0]), Arc::new(|_| 0.0), 4.0);
        let rec = weak_error(&Method::euler(), &p, 0.5, &McConfig::new(10, 1)).unwrap();
        assert!(rec.is_divergent());
        assert_eq!(rec.diverged_paths, 10);
        assert!(rec.mu_hat.is_nan());
        assert!(!rec.is_resolved());
    }

    #[test]
    fn study_argument_checks() {
        let cfg = McConfig::new(10, 1);
        assert!(matches!(
            convergence_study(&Method::euler(), &ex1(), &[1.0], &cfg),
            Err(McError::TooFewStepSizes)
        ));
        assert!(matches!(
            convergence_study(&Method::euler(), &ex1(), &[0.5, 1.0], &cfg),
            Err(McError::NotDescending)
        ));
        assert!(matches!(
            estimate_functional(&StepMethod::EulerMaruyama, &ex1(), 1.0, &McConfig::new(1, 0)),
            Err(McError::TooFewPaths(1))
        ));
    }

    #[test]
    fn exact_method_gives_unresolved_order() {
        let study = convergence_study(&Method::an3d1(), &drift_free(false), &[0.5, 0.25, 0.125], &McConfig::new(5_000, 3))
            .unwrap();
        assert_eq!(study.records.len(), 3);
        assert_eq!(study.fitted_order, None);
    }

    #[test]
    fn method_selectors() {
        assert_eq!(Method::from_selector("an3d1").unwrap().name(), "an3d1");
        assert_eq!(Method::from_selector("EXEM").unwrap().name(), "exem");
        assert!(Method::from_selector("pl3").is_err());
        assert!(matches!(Method::from_selector("tableau:/nonexistent/file"), Err(McError::Io(_))));
    }
}
