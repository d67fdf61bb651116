//! One-step maps for additive-noise SDEs and their composition into paths.

use std::sync::Arc;

use thiserror::Error;

use crate::increments::IncrementPair;
use crate::rng::PathStream;
use crate::sde::AdditiveNoiseSde;
use crate::tableau::SrkTableau;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("non-finite value at step {step}")]
    Divergence { step: usize },
    #[error("tableau `{0}` is not explicit")]
    NotExplicit(String),
    #[error("expected {expected} increments, got {got}")]
    IncrementLength { expected: usize, got: usize },
    #[error("state has length {got}, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("at least one step is required")]
    NoSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub y: Vec<f64>,
}

impl PathState {
    pub fn new(t: f64, y: Vec<f64>) -> Self {
        Self { t, y }
    }

    pub fn initial(sde: &AdditiveNoiseSde) -> Self {
        Self::new(sde.t0(), sde.x0().to_vec())
    }
}

/// Work done along a path: drift evaluations and random variates drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounters {
    pub drift_evals: u64,
    pub rv_draws: u64,
}

impl StepCounters {
    pub fn effort(&self) -> u64 {
        self.drift_evals + self.rv_draws
    }
}

#[derive(Debug, Clone)]
pub enum StepMethod {
    Srk(Arc<SrkTableau>),
    EulerMaruyama,
}

impl StepMethod {
    pub fn srk(tableau: SrkTableau) -> Self {
        StepMethod::Srk(Arc::new(tableau))
    }

    /// Increments consumed per step for noise dimension `m`.
    pub fn increments_per_step(&self, m: usize) -> usize {
        match self {
            StepMethod::Srk(_) => 2 * m,
            StepMethod::EulerMaruyama => m,
        }
    }

    pub fn drift_evals_per_step(&self) -> usize {
        match self {
            StepMethod::Srk(t) => t.stages(),
            StepMethod::EulerMaruyama => 1,
        }
    }

    pub fn name(&self) -> String {
        match self {
            StepMethod::Srk(t) => t.name().to_ascii_lowercase(),
            StepMethod::EulerMaruyama => "euler".to_string(),
        }
    }
}

/// Reusable buffers for stepping one SDE with one method.
pub struct PathSimulator<'a> {
    method: &'a StepMethod,
    sde: &'a AdditiveNoiseSde,
    stages: Vec<f64>,
    derivs: Vec<f64>,
    noise_first: Vec<f64>,
    noise_second: Vec<f64>,
    xi: Vec<f64>,
}

impl<'a> PathSimulator<'a> {
    pub fn new(method: &'a StepMethod, sde: &'a AdditiveNoiseSde) -> Result<Self, IntegrateError> {
        if let StepMethod::Srk(t) = method {
            if !t.is_explicit() {
                return Err(IntegrateError::NotExplicit(t.name().to_string()));
            }
        }
        let d = sde.dim();
        let s = method.drift_evals_per_step();
        Ok(Self {
            method,
            sde,
            stages: vec![0.0; s * d],
            derivs: vec![0.0; s * d],
            noise_first: vec![0.0; d],
            noise_second: vec![0.0; d],
            xi: vec![0.0; method.increments_per_step(sde.noise_dim())],
        })
    }

    /// Advances `y` from time `t` by `h` using the increments `xi`. Returns `false`
    /// if a stage value or the result is not finite.
    pub fn step_in_place(&mut self, t: f64, y: &mut [f64], h: f64, xi: &[f64]) -> bool {
        let m = self.sde.noise_dim();
        let sqrt_h = h.sqrt();
        self.sde.apply_noise(&xi[..m], &mut self.noise_first);
        match self.method {
            StepMethod::EulerMaruyama => {
                self.sde.drift_into(t, y, &mut self.derivs);
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk = *yk + h * self.derivs[k] + sqrt_h * self.noise_first[k];
                }
            }
            StepMethod::Srk(tab) => {
                self.sde.apply_noise(&xi[m..2 * m], &mut self.noise_second);
                let d = y.len();
                let a = tab.a();
                for i in 0..tab.stages() {
                    let (b1, b2) = (tab.b1()[i], tab.b2()[i]);
                    let stage = &mut self.stages[i * d..(i + 1) * d];
                    for k in 0..d {
                        let mut acc = 0.0;
                        for (j, aij) in a[i][..i].iter().enumerate() {
                            acc += aij * self.derivs[j * d + k];
                        }
                        stage[k] = y[k]
                            + h * acc
                            + sqrt_h * (b1 * self.noise_first[k] + b2 * self.noise_second[k]);
                    }
                    if !stage.iter().all(|v| v.is_finite()) {
                        return false;
                    }
                    self.sde.drift_into(
                        t + tab.c()[i] * h,
                        stage,
                        &mut self.derivs[i * d..(i + 1) * d],
                    );
                }
                for (k, yk) in y.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (i, ai) in tab.alpha().iter().enumerate() {
                        acc += ai * self.derivs[i * d + k];
                    }
                    *yk = *yk + h * acc + sqrt_h * self.noise_first[k];
                }
            }
        }
        y.iter().all(|v| v.is_finite())
    }

    /// Runs `n_steps` uniform steps from the SDE's initial condition, drawing the
    /// first `m` increments of every step from `pair.first` and the next `m` from
    /// `pair.second`.
    pub fn simulate(
        &mut self,
        h: f64,
        n_steps: usize,
        pair: IncrementPair,
        stream: &mut PathStream,
        y: &mut Vec<f64>,
    ) -> Result<StepCounters, IntegrateError> {
        let m = self.sde.noise_dim();
        y.clear();
        y.extend_from_slice(self.sde.x0());
        let mut counters = StepCounters::default();
        let mut xi = std::mem::take(&mut self.xi);
        for n in 0..n_steps {
            for (k, x) in xi.iter_mut().enumerate() {
                let law = if k < m { pair.first } else { pair.second };
                *x = law.sample(stream);
            }
            counters.rv_draws += xi.len() as u64;
            counters.drift_evals += self.method.drift_evals_per_step() as u64;
            let t = self.sde.t0() + n as f64 * h;
            if !self.step_in_place(t, y, h, &xi) {
                self.xi = xi;
                return Err(IntegrateError::Divergence { step: n });
            }
        }
        self.xi = xi;
        Ok(counters)
    }
}

fn validate_step(sde: &AdditiveNoiseSde, state: &PathState, h: f64) -> Result<(), IntegrateError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(IntegrateError::InvalidStep(h));
    }
    if state.y.len() != sde.dim() {
        return Err(IntegrateError::StateLength {
            expected: sde.dim(),
            got: state.y.len(),
        });
    }
    Ok(())
}

fn single_step(
    method: &StepMethod,
    sde: &AdditiveNoiseSde,
    state: &PathState,
    h: f64,
    xi: &[f64],
) -> Result<PathState, IntegrateError> {
    validate_step(sde, state, h)?;
    let expected = method.increments_per_step(sde.noise_dim());
    if xi.len() != expected {
        return Err(IntegrateError::IncrementLength {
            expected,
            got: xi.len(),
        });
    }
    let mut sim = PathSimulator::new(method, sde)?;
    let mut y = state.y.clone();
    if sim.step_in_place(state.t, &mut y, h, xi) {
        Ok(PathState::new(state.t + h, y))
    } else {
        Err(IntegrateError::Divergence { step: 0 })
    }
}

/// One step of the explicit SRK scheme. `xi` holds `ξ_1..ξ_m` followed by
/// `ξ_{m+1}..ξ_{2m}`.
pub fn srk_step(
    tableau: &SrkTableau,
    sde: &AdditiveNoiseSde,
    state: &PathState,
    h: f64,
    xi: &[f64],
) -> Result<PathState, IntegrateError> {
    single_step(&StepMethod::srk(tableau.clone()), sde, state, h, xi)
}

/// One Euler-Maruyama step, `y + h g0(t, y) + √h Σ g_l ξ_l`.
pub fn euler_maruyama_step(
    sde: &AdditiveNoiseSde,
    state: &PathState,
    h: f64,
    xi: &[f64],
) -> Result<PathState, IntegrateError> {
    single_step(&StepMethod::EulerMaruyama, sde, state, h, xi)
}

/// Simulates one path of `n_steps` uniform steps of size `h` from `(t0, x0)`.
pub fn simulate_path(
    method: &StepMethod,
    sde: &AdditiveNoiseSde,
    h: f64,
    n_steps: usize,
    pair: IncrementPair,
    stream: &mut PathStream,
) -> Result<(PathState, StepCounters), IntegrateError> {
    if n_steps == 0 {
        return Err(IntegrateError::NoSteps);
    }
    validate_step(sde, &PathState::initial(sde), h)?;
    let mut sim = PathSimulator::new(method, sde)?;
    let mut y = Vec::with_capacity(sde.dim());
    let counters = sim.simulate(h, n_steps, pair, stream, &mut y)?;
    Ok((PathState::new(sde.t0() + n_steps as f64 * h, y), counters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{custom_sde, ex1, ex3, DriftFn};

    fn scalar(drift: DriftFn, g: f64, x0: f64) -> AdditiveNoiseSde {
        custom_sde(1, 1, drift, vec![vec![g]], 0.0, vec![x0]).unwrap()
    }

    #[test]
    fn drift_free_step_is_pure_noise() {
        let sde = scalar(Arc::new(|_, _, o: &mut [f64]| o.fill(0.0)), 0.3, 1.25);
        let state = PathState::initial(&sde);
        let h = 0.25;
        let out = srk_step(&SrkTableau::an3d1(), &sde, &state, h, &[0.7, -1.1]).unwrap();
        assert_eq!(out.y[0], 1.25 + h.sqrt() * (0.3 * 0.7));
        assert_eq!(out.t, 0.25);
    }

    #[test]
    fn constant_drift_step() {
        let sde = custom_sde(
            2,
            1,
            Arc::new(|_, _, o: &mut [f64]| {
                o[0] = 2.0;
                o[1] = -0.5;
            }),
            vec![vec![1.0], vec![0.5]],
            0.0,
            vec![0.0, 1.0],
        )
        .unwrap();
        let state = PathState::initial(&sde);
        let h = 0.5;
        let xi = [0.4, 2.0];
        let out = srk_step(&SrkTableau::an3d1(), &sde, &state, h, &xi).unwrap();
        let expected = [h * 2.0 + h.sqrt() * 0.4, 1.0 - h * 0.5 + h.sqrt() * 0.2];
        for (got, want) in out.y.iter().zip(expected) {
            assert!((got - want).abs() <= 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn euler_step_on_ex1() {
        let p = ex1();
        let out = euler_maruyama_step(&p.sde, &PathState::initial(&p.sde), 1.0, &[0.0]).unwrap();
        // drift(0, 0.1) = 1.5 * 0.1 + 1
        assert!((out.y[0] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn euler_tableau_reduces_to_euler_maruyama() {
        let p = ex3();
        let state = PathState::new(0.3, vec![0.7, -1.3]);
        let xi = [0.25, -1.5];
        let em = euler_maruyama_step(&p.sde, &state, 0.125, &xi).unwrap();
        let srk = srk_step(&SrkTableau::euler(), &p.sde, &state, 0.125, &[0.25, -1.5, 0.9, 0.1]).unwrap();
        assert_eq!(em.y.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   srk.y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn local_error_is_fifth_order() {
        let sde = scalar(Arc::new(|_, x, o: &mut [f64]| o[0] = x[0]), 0.0, 1.0);
        let state = PathState::initial(&sde);
        let errs: Vec<f64> = (3..=7)
            .map(|k| {
                let h = 2f64.powi(-k);
                let out = srk_step(&SrkTableau::an3d1(), &sde, &state, h, &[0.0, 0.0]).unwrap();
                (out.y[0] - h.exp()).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 5.0).abs() < 0.25, "slope {slope}");
        }
        // For y' = y the error constant is 1/120 (leading term of e^h minus its quartic Taylor polynomial).
        assert!(errs[0] <= 1.1 / 120.0 * 2f64.powi(-15));
    }

    #[test]
    fn counters_follow_stage_and_noise_counts() {
        let p = ex1();
        let mut stream = PathStream::new(1, 0, 0);
        let (state, counters) = simulate_path(
            &StepMethod::srk(SrkTableau::an3d1()),
            &p.sde,
            0.25,
            8,
            IncrementPair::GAUSSIAN,
            &mut stream,
        )
        .unwrap();
        assert_eq!(counters, StepCounters { drift_evals: 32, rv_draws: 16 });
        assert_eq!(state.t, 2.0);

        let p3 = ex3();
        let (_, counters) = simulate_path(
            &StepMethod::EulerMaruyama,
            &p3.sde,
            1.0,
            2,
            IncrementPair::GAUSSIAN,
            &mut stream,
        )
        .unwrap();
        assert_eq!(counters, StepCounters { drift_evals: 2, rv_draws: 4 });
    }

    #[test]
    fn deterministic_path_matches_stability_polynomial() {
        // y' = 3/2 y, y(0) = 1/10, h = 1/16, 32 steps. For a linear problem a
        // four-stage order-four method advances by R(z) = Σ_{k≤4} z^k/k!.
        let sde = scalar(Arc::new(|_, x, o: &mut [f64]| o[0] = 1.5 * x[0]), 0.0, 0.1);
        let mut stream = PathStream::new(0, 0, 0);
        let h = 1.0 / 16.0;
        let (state, _) = simulate_path(
            &StepMethod::srk(SrkTableau::an3d1()),
            &sde,
            h,
            32,
            IncrementPair::GAUSSIAN,
            &mut stream,
        )
        .unwrap();
        let z: f64 = 1.5 * h;
        let r = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        let oracle = 0.1 * r.powi(32);
        assert!((state.y[0] - oracle).abs() <= 1e-13);
        let err = (state.y[0] - 0.1 * 3f64.exp()).abs();
        assert!(err <= 1e-5 && err > 1e-7, "global error {err}");
    }

    #[test]
    fn divergence_reports_step() {
        let sde = scalar(Arc::new(|_, x, o: &mut [f64]| o[0] = x[0].powi(3)), 0.0, 10.0);
        let mut stream = PathStream::new(0, 0, 0);
        let err = simulate_path(
            &StepMethod::srk(SrkTableau::an3d1()),
            &sde,
            1.0,
            10,
            IncrementPair::GAUSSIAN,
            &mut stream,
        )
        .unwrap_err();
        assert!(matches!(err, IntegrateError::Divergence { .. }));
    }

    #[test]
    fn implicit_tableau_rejected() {
        let t = SrkTableau::new("implicit", vec![1.0], vec![vec![0.5]], vec![0.0], vec![0.0], None).unwrap();
        let p = ex1();
        let err = srk_step(&t, &p.sde, &PathState::initial(&p.sde), 0.1, &[0.0, 0.0]).unwrap_err();
        assert_eq!(err, IntegrateError::NotExplicit("implicit".into()));
    }

    #[test]
    fn wrong_increment_count_rejected() {
        let p = ex3();
        let err = srk_step(&SrkTableau::an3d1(), &p.sde, &PathState::initial(&p.sde), 0.1, &[0.0; 2]).unwrap_err();
        assert_eq!(err, IntegrateError::IncrementLength { expected: 4, got: 2 });
        assert!(euler_maruyama_step(&p.sde, &PathState::initial(&p.sde), -1.0, &[0.0; 2]).is_err());
    }
}
