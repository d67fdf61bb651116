//! `srkbench`: order-condition checks, moment tables, tree listings and Monte Carlo
//! weak-error studies on the reference problems.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use thiserror::Error;

use srkweak::increments::normal_moment;
use srkweak::tableau::DEFAULT_ORDER_TOLERANCE;
use srkweak::trees::color_permutation_classes;
use srkweak::weak_mc::fit_order;
use srkweak::{
    check_stochastic_order, enumerate_tadd, relevant_f_trees, shape_families, weak_error, IncrementDistribution,
    IncrementPair, McConfig, McError, Method, ProblemId, SrkTableau, StepMethod, WeakErrorRecord,
};

pub mod format;

use format::sci;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;

pub const CSV_HEADER: [&str; 11] = [
    "method",
    "problem",
    "h",
    "M",
    "seed",
    "mu_hat",
    "sigma2_mu",
    "ci_lo",
    "ci_hi",
    "effort_per_path",
    "diverged_paths",
];

#[derive(Debug, Parser)]
#[command(name = "srkbench", version, about = "Weak-error studies for stochastic Runge-Kutta methods")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the weak and deterministic order conditions of a tableau.
    CheckTableau(CheckArgs),
    /// Print moments of the discrete increment laws next to the normal ones.
    Moments(MomentArgs),
    /// Run a weak-error study and write one CSV row per method and step size.
    Converge(StudyArgs),
    /// List coloured trees up to an order, or the relevant f-trees of an order.
    Trees(TreeArgs),
    /// Write effort/precision pairs for each method and step size.
    Effort(StudyArgs),
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// an3d1, euler or tableau:<file>
    #[arg(long, default_value = "an3d1")]
    pub method: String,
    /// Tableau file; overrides --method.
    #[arg(long)]
    pub tableau: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ORDER_TOLERANCE)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct MomentArgs {
    /// gaussian, d1, d3, d5, d7 or all
    #[arg(long, default_value = "all")]
    pub dist: String,
    #[arg(long = "max-k", default_value_t = 8)]
    pub max_k: u32,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Comma-separated list of an3d1, euler, exem, tableau:<file>
    #[arg(long, default_value = "an3d1")]
    pub method: String,
    /// Extra tableau file added to the method list.
    #[arg(long)]
    pub tableau: Option<PathBuf>,
    #[arg(long, default_value = "ex1")]
    pub problem: ProblemId,
    /// Step sizes 2^A, 2^(A-1), …, 2^B
    #[arg(long = "h-exp", default_value = "1:-4", allow_hyphen_values = true)]
    pub h_exp: ExponentRange,
    #[arg(long, default_value_t = 1_000_000)]
    pub paths: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// gaussian, zero, or d3/d5/d7 for the pair required by weak order 1/2/3
    #[arg(long, default_value = "gaussian")]
    pub dist: String,
    #[arg(long, env = "SRKBENCH_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    /// Largest order, an integer or a fraction such as 5/2.
    #[arg(long = "max-order", default_value = "3")]
    pub max_order: String,
    /// Number of Wiener processes (stochastic colours).
    #[arg(long = "noise-dim", default_value_t = 1)]
    pub noise_dim: u32,
    /// List the relevant f-rooted trees of this integer order instead.
    #[arg(long)]
    pub relevant: Option<u32>,
}

/// Inclusive, descending range of base-2 step exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExponentRange {
    pub first: i32,
    pub last: i32,
}

impl ExponentRange {
    pub fn step_sizes(&self) -> Vec<f64> {
        (self.last..=self.first).rev().map(|e| 2f64.powi(e)).collect()
    }
}

impl FromStr for ExponentRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').unwrap_or((s, s));
        let parse = |x: &str| x.trim().parse::<i32>().map_err(|e| format!("bad exponent `{x}`: {e}"));
        let (first, last) = (parse(a)?, parse(b)?);
        if first < last {
            return Err(format!("exponent range {first}:{last} must run from coarse to fine"));
        }
        Ok(Self { first, last })
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<u8, CliError> {
    match command {
        Command::CheckTableau(a) => check_tableau(a, out),
        Command::Moments(a) => moments(a, out),
        Command::Converge(a) => converge(a, out),
        Command::Trees(a) => trees(a, out),
        Command::Effort(a) => effort(a, out),
    }
}

fn check_tableau(args: &CheckArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let method = match &args.tableau {
        Some(path) => Method::from_tableau_file(path)?,
        None => Method::from_selector(&args.method)?,
    };
    let tableau: SrkTableau = match method {
        Method::Step(StepMethod::Srk(t)) => (*t).clone(),
        Method::Step(StepMethod::EulerMaruyama) => SrkTableau::euler(),
        Method::Exem => return Err(CliError::Usage("exem has no tableau".into())),
    };
    let report = check_stochastic_order(&tableau, args.tol).map_err(McError::from)?;
    writeln!(
        out,
        "{}: {} stages, {}",
        tableau.name(),
        tableau.stages(),
        if tableau.is_explicit() { "explicit" } else { "implicit" }
    )?;
    writeln!(
        out,
        "stochastic order {}, deterministic order {}",
        report.stochastic_order, report.deterministic_order
    )?;
    writeln!(out, "condition,residual")?;
    for (id, r) in &report.residuals {
        writeln!(out, "{id},{}", sci(*r))?;
    }
    writeln!(
        out,
        "max stochastic residual {}, max deterministic residual {}, tolerance {}",
        sci(report.max_stochastic_residual()),
        sci(report.max_deterministic_residual()),
        sci(report.tolerance)
    )?;
    Ok(EXIT_OK)
}

fn moments(args: &MomentArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let laws: Vec<IncrementDistribution> = if args.dist.eq_ignore_ascii_case("all") {
        IncrementDistribution::ALL.to_vec()
    } else {
        args.dist
            .split(',')
            .map(|s| s.parse().map_err(|e| CliError::Usage(format!("{e}"))))
            .collect::<Result<_, _>>()?
    };
    let mut header = vec!["k".to_string(), "normal".to_string()];
    header.extend(laws.iter().map(|d| d.short_name().to_string()));
    writeln!(out, "{}", header.join(","))?;
    for k in 1..=args.max_k {
        let mut row = vec![k.to_string(), normal_moment(k).to_string()];
        row.extend(laws.iter().map(|d| d.moment(k).to_string()));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(EXIT_OK)
}

fn parse_order(s: &str) -> Result<Ratio<i64>, CliError> {
    let bad = || CliError::Usage(format!("bad order `{s}`"));
    let r = match s.split_once('/') {
        Some((n, d)) => {
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ratio::new(n.trim().parse().map_err(|_| bad())?, d)
        }
        None => Ratio::from_integer(s.trim().parse().map_err(|_| bad())?),
    };
    if r < Ratio::from_integer(0) {
        return Err(bad());
    }
    Ok(r)
}

fn trees(args: &TreeArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let m = args.noise_dim;
    if let Some(p) = args.relevant {
        if !(1..=3).contains(&p) {
            return Err(CliError::Usage(format!("relevant trees are listed for orders 1 to 3, got {p}")));
        }
        let trees = relevant_f_trees(p, m);
        let families = shape_families(&trees);
        writeln!(out, "tree,rho,alpha,family")?;
        for (i, fam) in families.iter().enumerate() {
            for t in &fam.members {
                writeln!(out, "{t},{},{},{}", t.rho(), t.density(), i + 1)?;
            }
        }
        writeln!(
            out,
            "# {} trees, {} colour-permutation classes, {} shape families",
            trees.len(),
            color_permutation_classes(&trees, m).len(),
            families.len()
        )?;
        for (i, fam) in families.iter().enumerate() {
            writeln!(out, "# family {}: {}", i + 1, fam.pattern())?;
        }
    } else {
        let trees = enumerate_tadd(parse_order(&args.max_order)?, m);
        writeln!(out, "tree,rho,alpha")?;
        for t in &trees {
            writeln!(out, "{t},{},{}", t.rho(), t.density())?;
        }
        writeln!(out, "# {} trees", trees.len())?;
    }
    Ok(EXIT_OK)
}

struct Study {
    problem: srkweak::ReferenceProblem,
    methods: Vec<Method>,
    h_list: Vec<f64>,
    cfg: McConfig,
}

fn study_setup(args: &StudyArgs) -> Result<Study, CliError> {
    if args.paths < 2 {
        return Err(CliError::Usage(format!("--paths must be at least 2, got {}", args.paths)));
    }
    let mut methods = args
        .method
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Method::from_selector)
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &args.tableau {
        methods.push(Method::from_tableau_file(path)?);
    }
    if methods.is_empty() {
        return Err(CliError::Usage("no method selected".into()));
    }
    let increments = IncrementPair::from_selector(&args.dist).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut cfg = McConfig::new(args.paths, args.seed).with_increments(increments);
    cfg.threads = args.threads;
    Ok(Study {
        problem: args.problem.build(),
        methods,
        h_list: args.h_exp.step_sizes(),
        cfg,
    })
}

fn run_study(study: &Study) -> Result<Vec<(String, Vec<WeakErrorRecord>)>, CliError> {
    study
        .methods
        .iter()
        .map(|m| {
            let records = study
                .h_list
                .iter()
                .map(|&h| weak_error(m, &study.problem, h, &study.cfg))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((m.name(), records))
        })
        .collect()
}

fn emit(bytes: Vec<u8>, target: &Option<PathBuf>, out: &mut dyn Write) -> Result<(), CliError> {
    match target {
        Some(path) => fs::write(path, bytes)?,
        None => out.write_all(&bytes)?,
    }
    Ok(())
}

fn status(results: &[(String, Vec<WeakErrorRecord>)]) -> u8 {
    if results.iter().flat_map(|(_, r)| r).any(|r| r.is_divergent()) {
        EXIT_DIVERGED
    } else {
        EXIT_OK
    }
}

/// CSV text of a convergence study: one row per record, then one `fitted_order` row per method.
pub fn study_csv(results: &[(String, Vec<WeakErrorRecord>)]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in results.iter().flat_map(|(_, r)| r) {
        w.write_record([
            r.method.clone(),
            r.problem.clone(),
            sci(r.h),
            r.paths.to_string(),
            r.seed.to_string(),
            sci(r.mu_hat),
            sci(r.sigma2_mu),
            sci(r.ci_lo),
            sci(r.ci_hi),
            sci(r.effort_per_path),
            r.diverged_paths.to_string(),
        ])?;
    }
    for (name, records) in results {
        let order = fit_order(records).map_or_else(|| "NA".to_string(), sci);
        w.write_record(["fitted_order", name.as_str(), order.as_str()])?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn converge(args: &StudyArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let study = study_setup(args)?;
    let results = run_study(&study)?;
    emit(study_csv(&results)?, &args.out, out)?;
    Ok(status(&results))
}

fn effort(args: &StudyArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let study = study_setup(args)?;
    let results = run_study(&study)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "problem", "h", "effort_per_path", "abs_mu_hat", "ci_half_width"])?;
    for r in results.iter().flat_map(|(_, r)| r) {
        w.write_record([
            r.method.clone(),
            r.problem.clone(),
            sci(r.h),
            sci(r.effort_per_path),
            sci(r.mu_hat.abs()),
            sci(r.half_width()),
        ])?;
    }
    emit(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?, &args.out, out)?;
    Ok(status(&results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_ranges() {
        let r: ExponentRange = "1:-4".parse().unwrap();
        assert_eq!(r.step_sizes(), vec![2.0, 1.0, 0.5, 0.25, 0.125, 0.0625]);
        assert_eq!("-2".parse::<ExponentRange>().unwrap().step_sizes(), vec![0.25]);
        assert!("-4:1".parse::<ExponentRange>().is_err());
        assert!("a:1".parse::<ExponentRange>().is_err());
    }

    #[test]
    fn orders() {
        assert_eq!(parse_order("5/2").unwrap(), Ratio::new(5, 2));
        assert_eq!(parse_order("3").unwrap(), Ratio::from_integer(3));
        assert!(parse_order("1/0").is_err());
        assert!(parse_order("-1").is_err());
    }
}

#[cfg(test)]
mod cli_tests;
