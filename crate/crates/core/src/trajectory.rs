//! Quantum trajectories of the partially post-selected monitored Majorana
//! chain, evolved exactly within the Gaussian manifold.
//!
//! Measured operators are the on-site parities Gamma_j = 1 - 2 n_j (rate
//! gamma, drift B_gamma) and the cross-site parities A_j (rate alpha, drift
//! B_alpha). Every operator also carries Hermitian white noise of variance
//! J^2 dt. One step applies exp(sum_k theta_k O_k) with
//! theta_k = -i dxi_k + dW_k + 2 r_k <O_k> dt + B_k dt, then renormalizes.

use crate::gaussian::{bond_form, onsite_form, EntropyConvention, GaussianError, GaussianState, QuadraticForm};
use crate::linalg::{CMat, SparseMat};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// ChaCha words reserved per (step, channel); far above what L normals need.
const WORDS_PER_STEP: u128 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("trajectory {traj}, step {step}: {source}")]
    Step { traj: u64, step: u64, source: GaussianError },
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

impl TrajectoryError {
    pub fn is_numerical(&self) -> bool {
        !matches!(self, TrajectoryError::InvalidConfig { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Vacuum,
    Filled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "J2")]
    pub j2: f64,
    pub gamma: f64,
    pub alpha: f64,
    #[serde(rename = "B_gamma")]
    pub b_gamma: f64,
    #[serde(rename = "B_alpha")]
    pub b_alpha: f64,
    pub dt: f64,
    /// Burn-in horizon; `None` selects 20 max(1/gamma, 1/alpha, 1/J^2) over
    /// the nonzero rates.
    pub t_burn: Option<f64>,
    /// Sampling horizon after the burn-in.
    pub t_sample: f64,
    pub sample_interval: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub initial: InitialState,
    pub entropy: EntropyConvention,
    pub blowup_bound: f64,
    /// Record the topological entanglement entropy (needs L divisible by 4).
    pub tee: bool,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            l: 16,
            j2: 0.0,
            gamma: 1.0,
            alpha: 1.0,
            b_gamma: 0.0,
            b_alpha: 0.0,
            dt: 0.05,
            t_burn: None,
            t_sample: 20.0,
            sample_interval: 1.0,
            n_traj: 600,
            seed: 0,
            initial: InitialState::Vacuum,
            entropy: EntropyConvention::Physical,
            blowup_bound: 1e6,
            tee: true,
        }
    }
}

fn bad(field: &'static str, reason: impl Into<String>) -> TrajectoryError {
    TrajectoryError::InvalidConfig { field, reason: reason.into() }
}

impl TrajectoryConfig {
    /// Rates from a mean rate and dimerization: gamma = r (1 - delta),
    /// alpha = r (1 + delta), and likewise for the drifts.
    pub fn set_dimerized(&mut self, rate: f64, drift: f64, delta: f64) {
        self.gamma = rate * (1.0 - delta);
        self.alpha = rate * (1.0 + delta);
        self.b_gamma = drift * (1.0 - delta);
        self.b_alpha = drift * (1.0 + delta);
    }

    /// Dimerization recovered from (1 - D)/(1 + D) = gamma/alpha.
    pub fn dimerization(&self) -> Option<f64> {
        let s = self.gamma + self.alpha;
        (s > 0.0).then(|| (self.alpha - self.gamma) / s)
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.l < 2 || self.l % 2 == 1 {
            return Err(bad("L", format!("must be even and >= 2, got {}", self.l)));
        }
        if self.tee && self.l % 4 != 0 {
            return Err(bad("L", format!("must be a multiple of 4 when TEE is recorded, got {}", self.l)));
        }
        for (name, v) in [
            ("J2", self.j2),
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("B_gamma", self.b_gamma),
            ("B_alpha", self.b_alpha),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(bad(name, format!("must be finite and nonnegative, got {v}")));
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(bad("dt", format!("must be > 0, got {}", self.dt)));
        }
        if let Some(t) = self.t_burn {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(bad("t_burn", format!("must be >= 0, got {t}")));
            }
        }
        if !(self.sample_interval > 0.0) || !self.sample_interval.is_finite() {
            return Err(bad("sample_interval", format!("must be > 0, got {}", self.sample_interval)));
        }
        if !(self.t_sample >= 0.0) || !self.t_sample.is_finite() {
            return Err(bad("t_sample", format!("must be >= 0, got {}", self.t_sample)));
        }
        if self.n_traj == 0 {
            return Err(bad("n_traj", "must be >= 1"));
        }
        if !(self.blowup_bound > 1.0) {
            return Err(bad("blowup_bound", format!("must be > 1, got {}", self.blowup_bound)));
        }
        Ok(())
    }

    pub fn burn_in_time(&self) -> f64 {
        self.t_burn.unwrap_or_else(|| {
            let slowest = [self.gamma, self.alpha, self.j2]
                .into_iter()
                .filter(|&r| r > 0.0)
                .map(|r| 1.0 / r)
                .fold(0.0, f64::max);
            20.0 * slowest
        })
    }

    pub fn burn_in_steps(&self) -> u64 {
        (self.burn_in_time() / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    pub fn sample_stride(&self) -> u64 {
        ((self.sample_interval / self.dt).round() as u64).max(1)
    }

    pub fn n_samples(&self) -> u64 {
        let per = self.sample_stride() as f64 * self.dt;
        ((self.t_sample / per + 1e-9).floor() as u64).max(1)
    }

    pub fn total_steps(&self) -> u64 {
        self.burn_in_steps() + self.n_samples() * self.sample_stride()
    }

    fn initial_state(&self) -> Result<GaussianState, GaussianError> {
        match self.initial {
            InitialState::Vacuum => GaussianState::vacuum(self.l),
            InitialState::Filled => GaussianState::filled(self.l),
        }
    }
}

/// Noise increments for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    /// Hermitian noise on the on-site parities, variance J^2 dt.
    pub dxi1: Vec<f64>,
    /// Hermitian noise on the cross-site parities, variance J^2 dt.
    pub dxi2: Vec<f64>,
    /// Measurement noise on the on-site parities, variance gamma dt.
    pub dw_gamma: Vec<f64>,
    /// Measurement noise on the cross-site parities, variance alpha dt.
    pub dw_alpha: Vec<f64>,
}

impl NoiseDraw {
    pub fn zeros(l: usize) -> Self {
        NoiseDraw { dxi1: vec![0.0; l], dxi2: vec![0.0; l - 1], dw_gamma: vec![0.0; l], dw_alpha: vec![0.0; l - 1] }
    }
}

/// Counter-based normal deviates addressed by (seed, trajectory, step, channel).
#[derive(Debug, Clone)]
pub struct NoiseStream {
    key: [u8; 32],
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"pps-sse noise v1");
        h.update(seed.to_le_bytes());
        h.update(trajectory.to_le_bytes());
        NoiseStream { key: h.finalize().into() }
    }

    pub fn normals(&self, step: u64, channel: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(channel);
        rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    pub fn draw(&self, cfg: &TrajectoryConfig, step: u64) -> NoiseDraw {
        let l = cfg.l;
        let channel = |ch: u64, n: usize, var: f64| -> Vec<f64> {
            if var > 0.0 {
                let s = var.sqrt();
                self.normals(step, ch, n).into_iter().map(|z| z * s).collect()
            } else {
                vec![0.0; n]
            }
        };
        NoiseDraw {
            dxi1: channel(0, l, cfg.j2 * cfg.dt),
            dxi2: channel(1, l - 1, cfg.j2 * cfg.dt),
            dw_gamma: channel(2, l, cfg.gamma * cfg.dt),
            dw_alpha: channel(3, l - 1, cfg.alpha * cfg.dt),
        }
    }
}

/// Exponent coefficients theta_k of the on-site and cross-site parities for
/// one step, given the current expectation values.
pub fn exponent_coefficients(
    cfg: &TrajectoryConfig,
    onsite: &[f64],
    bond: &[f64],
    draw: &NoiseDraw,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let dt = cfg.dt;
    let on = (0..cfg.l)
        .map(|j| {
            Complex64::new(draw.dw_gamma[j] + 2.0 * cfg.gamma * onsite[j] * dt + cfg.b_gamma * dt, -draw.dxi1[j])
        })
        .collect();
    let bd = (0..cfg.l - 1)
        .map(|j| Complex64::new(draw.dw_alpha[j] + 2.0 * cfg.alpha * bond[j] * dt + cfg.b_alpha * dt, -draw.dxi2[j]))
        .collect();
    (on, bd)
}

/// Single-particle generator M for exp(sum theta_k psi^dag h_k psi):
/// conjugation maps psi to exp(-2 sum theta_k h_k) psi, so the stacked
/// [U; V] evolves with M = -2 sum conj(theta_k) h_k.
pub fn generator_triplets(l: usize, onsite: &[Complex64], bond: &[Complex64]) -> Vec<(usize, usize, Complex64)> {
    let mut t = Vec::with_capacity(2 * l + 8 * l);
    let mut push = |form: QuadraticForm, theta: Complex64| {
        if theta != Complex64::new(0.0, 0.0) {
            let c = theta.conj() * -2.0;
            for (r, col, v) in form {
                t.push((r, col, c * v));
            }
        }
    };
    for (j, &th) in onsite.iter().enumerate() {
        push(onsite_form(l, j), th);
    }
    for (j, &th) in bond.iter().enumerate() {
        push(bond_form(l, j), th);
    }
    t
}

/// Sparse generator of one step.
pub fn assemble_generator(state: &GaussianState, cfg: &TrajectoryConfig, draw: &NoiseDraw) -> SparseMat {
    let (on, bd) = exponent_coefficients(cfg, &state.onsite_parity(), &state.bond_parity(), draw);
    SparseMat::from_triplets(2 * cfg.l, generator_triplets(cfg.l, &on, &bd))
}

/// Dense form of `assemble_generator`.
pub fn assemble_generator_dense(state: &GaussianState, cfg: &TrajectoryConfig, draw: &NoiseDraw) -> CMat {
    assemble_generator(state, cfg, draw).to_dense()
}

pub fn step(state: &GaussianState, cfg: &TrajectoryConfig, draw: &NoiseDraw) -> Result<GaussianState, GaussianError> {
    let m = assemble_generator(state, cfg, draw);
    state.evolve(&m, cfg.blowup_bound)
}

/// Observables recorded at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub s_half: f64,
    pub tee: Option<f64>,
    pub s_full: f64,
}

/// Runs one trajectory, calling `visit` with every snapshot state.
pub fn run_trajectory_with<F>(cfg: &TrajectoryConfig, index: u64, mut visit: F) -> Result<Vec<Snapshot>, TrajectoryError>
where
    F: FnMut(f64, &GaussianState),
{
    cfg.validate()?;
    let noise = NoiseStream::new(cfg.seed, index);
    let mut state = cfg.initial_state()?;
    let burn = cfg.burn_in_steps();
    let stride = cfg.sample_stride();
    let total = cfg.total_steps();
    let mut out = Vec::with_capacity(cfg.n_samples() as usize);
    for s in 0..total {
        let draw = noise.draw(cfg, s);
        state = step(&state, cfg, &draw).map_err(|e| TrajectoryError::Step { traj: index, step: s, source: e })?;
        let done = s + 1;
        if done > burn && (done - burn) % stride == 0 {
            let time = done as f64 * cfg.dt;
            visit(time, &state);
            let tee = if cfg.tee { Some(state.tee(cfg.entropy)?) } else { None };
            out.push(Snapshot {
                time,
                s_half: state.half_cut_entropy(cfg.entropy)?,
                tee,
                s_full: state.full_entropy(cfg.entropy)?,
            });
        }
    }
    Ok(out)
}

pub fn run_trajectory(cfg: &TrajectoryConfig, index: u64) -> Result<Vec<Snapshot>, TrajectoryError> {
    run_trajectory_with(cfg, index, |_, _| {})
}

/// Sum with a fixed binary tree so the result does not depend on how the
/// inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    /// Set when the standard error is not estimable (n = 1) or exactly zero.
    pub zero_variance: bool,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, n, zero_variance: true };
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 {
            return Estimate { mean, stderr: 0.0, n, zero_variance: true };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n - 1) as f64;
        let stderr = (var / n as f64).sqrt();
        Estimate { mean, stderr, n, zero_variance: stderr == 0.0 }
    }
}

/// Per-snapshot ensemble statistics of one observable plus its steady-state
/// value (trajectory time-averages, then ensemble mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub name: String,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub steady: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub n_traj: usize,
    pub times: Vec<f64>,
    pub s_half: ObservableSeries,
    pub tee: Option<ObservableSeries>,
    pub s_full: ObservableSeries,
}

fn reduce(name: &str, per_traj: &[Vec<f64>]) -> ObservableSeries {
    let n_snap = per_traj[0].len();
    let mut mean = Vec::with_capacity(n_snap);
    let mut stderr = Vec::with_capacity(n_snap);
    for k in 0..n_snap {
        let col: Vec<f64> = per_traj.iter().map(|t| t[k]).collect();
        let e = Estimate::from_samples(&col);
        mean.push(e.mean);
        stderr.push(e.stderr);
    }
    let averages: Vec<f64> = per_traj.iter().map(|t| pairwise_sum(t) / t.len() as f64).collect();
    ObservableSeries { name: name.to_string(), mean, stderr, steady: Estimate::from_samples(&averages) }
}

/// Runs `cfg.n_traj` trajectories in parallel on the current rayon pool.
pub fn run_ensemble(cfg: &TrajectoryConfig) -> Result<EnsembleResult, TrajectoryError> {
    cfg.validate()?;
    let runs: Vec<Result<Vec<Snapshot>, TrajectoryError>> =
        (0..cfg.n_traj as u64).into_par_iter().map(|i| run_trajectory(cfg, i)).collect();
    let mut records = Vec::with_capacity(runs.len());
    for r in runs {
        records.push(r?);
    }
    let times: Vec<f64> = records[0].iter().map(|s| s.time).collect();
    let pick = |f: &dyn Fn(&Snapshot) -> f64| -> Vec<Vec<f64>> {
        records.iter().map(|r| r.iter().map(f).collect()).collect()
    };
    let s_half = reduce("s_half", &pick(&|s| s.s_half));
    let s_full = reduce("s_full", &pick(&|s| s.s_full));
    let tee = cfg.tee.then(|| reduce("tee", &pick(&|s| s.tee.unwrap_or(f64::NAN))));
    Ok(EnsembleResult { n_traj: cfg.n_traj, times, s_half, tee, s_full })
}
