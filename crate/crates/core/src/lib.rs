//! Weak order-three stochastic Runge-Kutta methods for SDEs with additive noise,
//! with Monte Carlo weak-error estimation and the tree catalogue behind the order
//! conditions.

pub mod increments;
pub mod integrate;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod tableau;
pub mod trees;
pub mod weak_mc;

pub use increments::{required_distributions, IncrementDistribution, IncrementError, IncrementPair};
pub use integrate::{
    euler_maruyama_step, simulate_path, srk_step, IntegrateError, PathSimulator, PathState, StepCounters,
    StepMethod,
};
pub use rng::PathStream;
pub use sde::{custom_sde, ex1, ex2, ex3, AdditiveNoiseSde, ProblemId, ReferenceProblem, SdeError};
pub use tableau::{
    check_deterministic_order, check_stochastic_order, load_tableau, ConditionId, OrderReport, SrkTableau,
    TableauError,
};
pub use trees::{enumerate_tadd, relevant_f_trees, shape_families, ColoredTree, ShapeFamily};
pub use weak_mc::{
    convergence_study, effort, estimate_functional, exem_weak_error, weak_error, ConvergenceStudy, Estimate,
    McConfig, McError, Method, WeakErrorRecord,
};
