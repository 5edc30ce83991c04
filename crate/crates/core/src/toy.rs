//! Two-qubit validator: H = s1+ s2- + h.c. with the observables
//! O_1 = -sigma_1^z and O_2 = +sigma_2^z, evolved either by explicit
//! truncated-readout Kraus updates or by the continuum PPS-SSE.
//!
//! Basis index = 2 s_1 + s_2 with s = 0 for spin up.

use crate::gaussian::binary_entropy;
use crate::linalg::{expm, CMat, LinalgError};
use crate::stats::{sample_truncated, ReadoutDistribution, StatsError, TruncationParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToyError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid toy config {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("state norm collapsed to {0:e}")]
    ZeroNorm(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyInitial {
    #[default]
    UpDown,
    UpUp,
    /// |+>|+> with |+> = (|up> + |down>)/sqrt 2.
    PlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyMethod {
    Kraus,
    Sse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseState {
    pub amplitudes: [Complex64; 4],
}

/// Diagonal of O_1 and O_2 in the computational basis.
pub const OBSERVABLES: [[f64; 4]; 2] = [[-1.0, -1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0]];

impl DenseState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self, ToyError> {
        let mut s = DenseState { amplitudes };
        s.normalize()?;
        Ok(s)
    }

    pub fn initial(kind: ToyInitial) -> Self {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let amplitudes = match kind {
            ToyInitial::UpDown => [z, one, z, z],
            ToyInitial::UpUp => [one, z, z, z],
            ToyInitial::PlusPlus => [one * 0.5; 4],
        };
        DenseState { amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn normalize(&mut self) -> Result<(), ToyError> {
        let n = self.norm();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(ToyError::ZeroNorm(n));
        }
        for a in &mut self.amplitudes {
            *a /= n;
        }
        Ok(())
    }

    /// <O_j> for j in {0, 1}.
    pub fn expectation(&self, j: usize) -> f64 {
        self.amplitudes.iter().zip(&OBSERVABLES[j]).map(|(a, o)| a.norm_sqr() * o).sum()
    }

    pub fn energy(&self, hopping: f64) -> f64 {
        let a = &self.amplitudes;
        2.0 * hopping * (a[1].conj() * a[2]).re
    }

    /// Entanglement entropy (bits) of qubit 1.
    pub fn entropy(&self) -> f64 {
        let a = &self.amplitudes;
        let p_up = a[0].norm_sqr() + a[1].norm_sqr();
        let p_dn = a[2].norm_sqr() + a[3].norm_sqr();
        let c = a[0] * a[2].conj() + a[1] * a[3].conj();
        let total = p_up + p_dn;
        let disc = ((p_up - p_dn).powi(2) + 4.0 * c.norm_sqr()).sqrt();
        binary_entropy((0.5 * (total + disc) / total).clamp(0.0, 1.0))
    }

    fn apply(&self, m: &CMat) -> DenseState {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (i, o) in out.iter_mut().enumerate() {
            for k in 0..4 {
                *o += m[(i, k)] * self.amplitudes[k];
            }
        }
        DenseState { amplitudes: out }
    }
}

pub fn hamiltonian(hopping: f64) -> CMat {
    let mut h = CMat::zeros(4, 4);
    h[(1, 2)] = Complex64::new(hopping, 0.0);
    h[(2, 1)] = Complex64::new(hopping, 0.0);
    h
}

fn propagator(hopping: f64, dt: f64) -> Result<CMat, LinalgError> {
    expm(&(hamiltonian(hopping) * Complex64::new(0.0, -dt)))
}

/// Unitary step followed by the two truncated-readout measurements.
pub fn kraus_step<R: Rng + ?Sized>(
    state: &DenseState,
    params: &TruncationParams,
    unitary: &CMat,
    rng: &mut R,
) -> Result<DenseState, ToyError> {
    let mut s = state.apply(unitary);
    s.normalize()?;
    if params.lambda == 0.0 {
        return Ok(s);
    }
    let w = params.pointer_width;
    for j in 0..2 {
        let expectation = s.expectation(j).clamp(-1.0, 1.0);
        let dist = ReadoutDistribution::from_expectation(params.lambda, expectation, w)?;
        let x = sample_truncated(&dist, params.r_c, rng)?;
        // sqrt G(x - lambda o) up to a common factor, o = +-1
        let log_amp = |o: f64| -(x - params.lambda * o).powi(2) / (4.0 * w * w);
        let (lp, lm) = (log_amp(1.0), log_amp(-1.0));
        let top = lp.max(lm);
        let (fp, fm) = ((lp - top).exp(), (lm - top).exp());
        for (a, o) in s.amplitudes.iter_mut().zip(&OBSERVABLES[j]) {
            *a *= if *o > 0.0 { fp } else { fm };
        }
        s.normalize()?;
    }
    Ok(s)
}

/// One step of exp(-i H dt + sum_j theta_j O_j) with
/// theta_j = dW_j + 2 gamma <O_j> dt + 2 B dt and Var dW = gamma dt.
/// The factor 2 on B is the pointer-width factor 1/(2 Delta^2) at Delta = 1/2.
pub fn sse_step<R: Rng + ?Sized>(
    state: &DenseState,
    params: &TruncationParams,
    hopping: f64,
    rng: &mut R,
) -> Result<DenseState, ToyError> {
    let dt = params.dt;
    let mut gen = hamiltonian(hopping) * Complex64::new(0.0, -dt);
    let sd = (params.gamma * dt).sqrt();
    for j in 0..2 {
        let dw = if sd > 0.0 { sd * Distribution::<f64>::sample(&StandardNormal, rng) } else { 0.0 };
        let theta = dw + 2.0 * params.gamma * state.expectation(j) * dt + 2.0 * params.big_b * dt;
        for (i, o) in OBSERVABLES[j].iter().enumerate() {
            gen[(i, i)] += Complex64::new(theta * o, 0.0);
        }
    }
    let mut s = state.apply(&expm(&gen)?);
    s.normalize()?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub b: f64,
    pub gamma: f64,
    pub dt: f64,
    /// Steps per trajectory; defaults to the relaxation horizon.
    pub n_steps: Option<u64>,
    /// Relaxation horizon in time units; defaults to 10 / gamma.
    pub horizon: Option<f64>,
    pub n_trajectories: usize,
    pub seed: u64,
    pub initial: ToyInitial,
    pub hopping: f64,
    /// Expectation value at which the cutoff r_c is solved from b.
    pub reference_expectation: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            b: 0.2,
            gamma: 0.5,
            dt: 0.01,
            n_steps: None,
            horizon: None,
            n_trajectories: 1000,
            seed: 0,
            initial: ToyInitial::UpDown,
            hopping: 1.0,
            reference_expectation: 0.0,
        }
    }
}

fn toy_bad(field: &'static str, reason: impl Into<String>) -> ToyError {
    ToyError::InvalidConfig { field, reason: reason.into() }
}

impl ToyConfig {
    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(10.0 / self.gamma)
    }

    pub fn steps(&self) -> u64 {
        self.n_steps.unwrap_or_else(|| (self.horizon() / self.dt - 1e-9).ceil() as u64)
    }

    pub fn validate(&self) -> Result<(), ToyError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(toy_bad("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(toy_bad("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(toy_bad("b", format!("must be >= 0, got {}", self.b)));
        }
        if !(-1.0..=1.0).contains(&self.reference_expectation) {
            return Err(toy_bad("reference_expectation", "must lie in [-1, 1]"));
        }
        if self.n_trajectories == 0 {
            return Err(toy_bad("n_trajectories", "must be >= 1"));
        }
        let horizon = self.horizon();
        if !horizon.is_finite() {
            if self.n_steps.is_none() {
                return Err(toy_bad("n_steps", "required when gamma = 0"));
            }
        } else if (self.steps() as f64) * self.dt < horizon * (1.0 - 1e-9) {
            return Err(toy_bad("n_steps", format!("n_steps * dt must reach the horizon {horizon}")));
        }
        Ok(())
    }

    /// Detector parameters; with gamma = 0 there is no readout and no cutoff.
    pub fn truncation(&self) -> Result<TruncationParams, ToyError> {
        if self.gamma == 0.0 {
            return Ok(TruncationParams {
                lambda: 0.0,
                pointer_width: crate::stats::SSE_POINTER_WIDTH,
                gamma: 0.0,
                dt: self.dt,
                b: self.b,
                r_c: f64::NEG_INFINITY,
                big_b: 0.0,
            });
        }
        Ok(TruncationParams::from_b(self.gamma, self.dt, self.b, self.reference_expectation)?)
    }
}

fn trajectory_rng(seed: u64, index: u64, method: ToyMethod) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * index + matches!(method, ToyMethod::Sse) as u64);
    rng
}

/// Final state of one trajectory after `config.steps()` steps.
pub fn run_toy_trajectory(config: &ToyConfig, method: ToyMethod, index: u64) -> Result<DenseState, ToyError> {
    config.validate()?;
    let params = config.truncation()?;
    let unitary = propagator(config.hopping, config.dt)?;
    let mut rng = trajectory_rng(config.seed, index, method);
    let mut s = DenseState::initial(config.initial);
    for _ in 0..config.steps() {
        s = match method {
            ToyMethod::Kraus => kraus_step(&s, &params, &unitary, &mut rng)?,
            ToyMethod::Sse => sse_step(&s, &params, config.hopping, &mut rng)?,
        };
        debug_assert!((s.norm() - 1.0).abs() < NORM_TOL);
    }
    Ok(s)
}

/// One steady-state entropy of qubit 1 per trajectory, in trajectory order.
pub fn entropy_histogram(config: &ToyConfig, method: ToyMethod) -> Result<Vec<f64>, ToyError> {
    config.validate()?;
    (0..config.n_trajectories as u64)
        .into_par_iter()
        .map(|i| run_toy_trajectory(config, method, i).map(|s| s.entropy()))
        .collect()
}
