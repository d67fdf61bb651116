//! SDEs with additive noise, `dX = g0(t, X) dt + Σ_l g_l dW_l`, and the three
//! reference problems with closed-form expectations.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

/// Drift `g0(t, x)` written into the output slice.
pub type DriftFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// Test functional `f(x)`.
pub type FunctionalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Exact expectation `t ↦ E f(X(t))`.
pub type ExactFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("noise matrix must be {rows}x{cols}, got {got_rows}x{got_cols}")]
    NoiseShape {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("initial state has length {got}, expected {expected}")]
    StateShape { expected: usize, got: usize },
    #[error("dimensions must be positive")]
    EmptyDimension,
    #[error("unknown problem `{0}` (expected ex1, ex2 or ex3)")]
    UnknownProblem(String),
}

#[derive(Clone)]
pub struct AdditiveNoiseSde {
    dim: usize,
    noise_dim: usize,
    drift: DriftFn,
    // Row-major d×m; column l is g_l.
    noise: Vec<f64>,
    t0: f64,
    x0: Vec<f64>,
}

impl fmt::Debug for AdditiveNoiseSde {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdditiveNoiseSde")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("noise", &self.noise)
            .field("t0", &self.t0)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

/// Builds a model from its parts; `noise` is given as `d` rows of length `m`.
pub fn custom_sde(
    d: usize,
    m: usize,
    drift: DriftFn,
    noise: Vec<Vec<f64>>,
    t0: f64,
    x0: Vec<f64>,
) -> Result<AdditiveNoiseSde, SdeError> {
    if d == 0 || m == 0 {
        return Err(SdeError::EmptyDimension);
    }
    let got_cols = noise.first().map_or(0, Vec::len);
    if noise.len() != d || noise.iter().any(|row| row.len() != m) {
        return Err(SdeError::NoiseShape {
            rows: d,
            cols: m,
            got_rows: noise.len(),
            got_cols,
        });
    }
    if x0.len() != d {
        return Err(SdeError::StateShape {
            expected: d,
            got: x0.len(),
        });
    }
    Ok(AdditiveNoiseSde {
        dim: d,
        noise_dim: m,
        drift,
        noise: noise.into_iter().flatten().collect(),
        t0,
        x0,
    })
}

impl AdditiveNoiseSde {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// Entry `(i, l)` of the noise matrix, i.e. component `i` of `g_l`.
    pub fn noise(&self, i: usize, l: usize) -> f64 {
        self.noise[i * self.noise_dim + l]
    }

    pub fn noise_rows(&self) -> Vec<Vec<f64>> {
        self.noise.chunks(self.noise_dim).map(<[f64]>::to_vec).collect()
    }

    #[inline]
    pub fn drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(t, x, &mut out);
        out
    }

    pub fn drift_fn(&self) -> DriftFn {
        Arc::clone(&self.drift)
    }

    /// `out = Σ_l g_l ξ_l` for the given block of increments.
    #[inline]
    pub fn apply_noise(&self, xi: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.noise[i * self.noise_dim..(i + 1) * self.noise_dim];
            *o = row.iter().zip(xi).map(|(g, x)| g * x).sum();
        }
    }

    /// Same model started from another initial state.
    pub fn with_initial_state(&self, x0: Vec<f64>) -> Result<Self, SdeError> {
        if x0.len() != self.dim {
            return Err(SdeError::StateShape {
                expected: self.dim,
                got: x0.len(),
            });
        }
        Ok(Self { x0, ..self.clone() })
    }
}

/// An SDE with a test functional and its exact expectation at time `t`.
#[derive(Clone)]
pub struct ReferenceProblem {
    pub label: String,
    pub sde: AdditiveNoiseSde,
    pub functional: FunctionalFn,
    pub exact: ExactFn,
    pub t_end: f64,
}

impl fmt::Debug for ReferenceProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceProblem")
            .field("label", &self.label)
            .field("sde", &self.sde)
            .field("t_end", &self.t_end)
            .finish_non_exhaustive()
    }
}

impl ReferenceProblem {
    pub fn new(
        label: impl Into<String>,
        sde: AdditiveNoiseSde,
        functional: FunctionalFn,
        exact: ExactFn,
        t_end: f64,
    ) -> Self {
        Self {
            label: label.into(),
            sde,
            functional,
            exact,
            t_end,
        }
    }

    pub fn functional(&self, x: &[f64]) -> f64 {
        (self.functional)(x)
    }

    pub fn exact(&self, t: f64) -> f64 {
        (self.exact)(t)
    }
}

const EX_T_END: f64 = 2.0;

/// Scalar affine drift `x' = 3/2 x + 1` with noise `1/10`, `f(x) = x²`.
///
/// The closed form `2/9 (397/200 − 23/5 e^{3t/2} + 133/50 e^{3t})` is the second
/// moment of this model; it solves `m' = 3/2 m + 1`, `u' = 3u + 2m + 1/100`.
pub fn ex1() -> ReferenceProblem {
    let sde = custom_sde(
        1,
        1,
        Arc::new(|_t, x, out| out[0] = 1.5 * x[0] + 1.0),
        vec![vec![0.1]],
        0.0,
        vec![0.1],
    )
    .expect("ex1 shapes are consistent");
    ReferenceProblem::new(
        "ex1",
        sde,
        Arc::new(|x| x[0] * x[0]),
        Arc::new(|t| {
            2.0 / 9.0 * (397.0 / 200.0 - 23.0 / 5.0 * (1.5 * t).exp() + 133.0 / 50.0 * (3.0 * t).exp())
        }),
        EX_T_END,
    )
}

/// Nonlinear drift `3/2 e^{−2x} + 1`, noise `1/10`, `f(x) = e^{2x}`.
pub fn ex2() -> ReferenceProblem {
    let sde = custom_sde(
        1,
        1,
        Arc::new(|_t, x, out| out[0] = 1.5 * (-2.0 * x[0]).exp() + 1.0),
        vec![vec![0.1]],
        0.0,
        vec![0.1],
    )
    .expect("ex2 shapes are consistent");
    ReferenceProblem::new(
        "ex2",
        sde,
        Arc::new(|x| (2.0 * x[0]).exp()),
        Arc::new(|t| {
            let k = 150.0 / 101.0;
            ((0.2f64).exp() + k) * (101.0 / 50.0 * t).exp() - k
        }),
        EX_T_END,
    )
}

/// Linear 2×2 system with two-dimensional noise, `f(x) = x₂²`.
///
/// The exact second moment follows from `P' = LP + PLᵀ + GGᵀ` with `P(0) = x0 x0ᵀ`:
/// `E X₂²(t) = 4889/6750000 + 79/50000 e^{−t} + 729511/675000 e^{−3t/2} − 7787/93750 e^{−5t/4}`.
pub fn ex3() -> ReferenceProblem {
    let sde = custom_sde(
        2,
        2,
        Arc::new(|_t, x, out| {
            out[0] = -0.5 * x[0];
            out[1] = -0.01 * x[0] - 0.75 * x[1];
        }),
        vec![vec![-0.1, 0.05], vec![0.0, 1.0 / 30.0]],
        0.0,
        vec![1.0, 1.0],
    )
    .expect("ex3 shapes are consistent");
    ReferenceProblem::new(
        "ex3",
        sde,
        Arc::new(|x| x[1] * x[1]),
        Arc::new(|t| {
            4889.0 / 6_750_000.0 + 79.0 / 50_000.0 * (-t).exp()
                + 729_511.0 / 675_000.0 * (-1.5 * t).exp()
                - 7787.0 / 93_750.0 * (-1.25 * t).exp()
        }),
        EX_T_END,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    Ex1,
    Ex2,
    Ex3,
}

impl ProblemId {
    pub fn build(self) -> ReferenceProblem {
        match self {
            ProblemId::Ex1 => ex1(),
            ProblemId::Ex2 => ex2(),
            ProblemId::Ex3 => ex3(),
        }
    }
}

impl FromStr for ProblemId {
    type Err = SdeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ex1" => Ok(ProblemId::Ex1),
            "ex2" => Ok(ProblemId::Ex2),
            "ex3" => Ok(ProblemId::Ex3),
            other => Err(SdeError::UnknownProblem(other.to_string())),
        }
    }
}
