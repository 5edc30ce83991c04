//! Bosonized RG flows of the partially post-selected chain: Luttinger
//! initialization from (J^2, gamma, B, Delta), the coupled sine-Gordon flow
//! of (K_rho, K_sigma, g_2) for Delta != 0 and the two decoupled BKT flows
//! for Delta = 0.

use crate::quad::integrate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RgError {
    #[error("bosonization breaks down: {sector} quotient u/K = {quotient} <= 0")]
    BosonizationBreakdown { sector: &'static str, quotient: f64 },
    #[error("angular integral needs {bound}, got mu = {mu}")]
    Domain { mu: f64, bound: &'static str },
    #[error("step size underflow at ell = {ell}")]
    Stiffness { ell: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no relevant/irrelevant bracket on [{lo}, {hi}]")]
    NoBoundary { lo: f64, hi: f64 },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> RgError {
    RgError::InvalidParameter { name, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuttingerInit {
    pub vf: f64,
    pub k_rho: f64,
    pub k_sigma: f64,
    pub u_rho: f64,
    pub u_sigma: f64,
    pub g_rho: f64,
    pub g_sigma: f64,
    pub g2: f64,
    pub valid: bool,
}

impl LuttingerInit {
    /// Luttinger data with lattice constant 1. When a velocity quotient is
    /// not positive the corresponding K and u are NaN and `valid` is false.
    pub fn evaluate(j2: f64, gamma: f64, b: f64, delta: f64) -> LuttingerInit {
        let vf = 4.0 * b;
        let q_rho = vf - 32.0 * j2 / PI;
        let q_sigma = vf - 32.0 * gamma / PI;
        let pair = |q: f64| if q > 0.0 { ((vf / q).sqrt(), (vf * q).sqrt()) } else { (f64::NAN, f64::NAN) };
        let (k_rho, u_rho) = pair(q_rho);
        let (k_sigma, u_sigma) = pair(q_sigma);
        LuttingerInit {
            vf,
            k_rho,
            k_sigma,
            u_rho,
            u_sigma,
            g_rho: -16.0 * (gamma - j2),
            g_sigma: 16.0 * (gamma - j2),
            g2: 16.0 * delta * (b * PI - gamma),
            valid: q_rho > 0.0 && q_sigma > 0.0,
        }
    }
}

pub fn init_luttinger(j2: f64, gamma: f64, b: f64, delta: f64) -> Result<LuttingerInit, RgError> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid("B", format!("must be > 0, got {b}")));
    }
    for (name, v) in [("J2", j2), ("gamma", gamma), ("Delta", delta)] {
        if !v.is_finite() {
            return Err(invalid(name, "must be finite"));
        }
    }
    let init = LuttingerInit::evaluate(j2, gamma, b, delta);
    if !init.valid {
        let q_rho = init.vf - 32.0 * j2 / PI;
        return Err(if q_rho <= 0.0 {
            RgError::BosonizationBreakdown { sector: "rho", quotient: q_rho }
        } else {
            RgError::BosonizationBreakdown { sector: "sigma", quotient: init.vf - 32.0 * gamma / PI }
        });
    }
    Ok(init)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgState {
    pub k_rho: f64,
    pub k_sigma: f64,
    pub u_rho: f64,
    pub u_sigma: f64,
    pub g_rho: f64,
    pub g_sigma: f64,
    pub g2: f64,
    pub ell: f64,
}

impl From<&LuttingerInit> for RgState {
    fn from(i: &LuttingerInit) -> Self {
        RgState {
            k_rho: i.k_rho,
            k_sigma: i.k_sigma,
            u_rho: i.u_rho,
            u_sigma: i.u_sigma,
            g_rho: i.g_rho,
            g_sigma: i.g_sigma,
            g2: i.g2,
            ell: 0.0,
        }
    }
}

impl RgState {
    /// Dimensionless g_2 / (pi sqrt(u_rho u_sigma)).
    pub fn y2(&self) -> f64 {
        self.g2 / (PI * (self.u_rho * self.u_sigma).sqrt())
    }

    pub fn y_rho(&self) -> f64 {
        self.g_rho / (PI * self.u_rho)
    }

    pub fn y_sigma(&self) -> f64 {
        self.g_sigma / (PI * self.u_sigma)
    }

    /// Anisotropy parameters (mu_rho, mu_sigma) with (u_sigma/u_rho)^2 = 1 + mu_rho.
    pub fn anisotropy(&self) -> (f64, f64) {
        let r = (self.u_sigma / self.u_rho).powi(2);
        (r - 1.0, 1.0 / r - 1.0)
    }
}

/// Angular dependence of the anisotropic propagator inside I(mu, K, beta).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularKernel {
    /// (1 + mu cos theta); needs |mu| < 1.
    Cos,
    /// (1 + mu cos^2 theta), from the velocity-rescaled distance; needs mu > -1.
    #[default]
    CosSquared,
}

const ANGULAR_TOL: f64 = 1e-10;

/// I(mu, K, beta) = int_{-pi}^{pi} (1 + mu cos theta)^(-beta^2 K / 4) dtheta.
pub fn angular_integral(mu: f64, k: f64, beta: f64) -> Result<f64, RgError> {
    angular_integral_with(AngularKernel::Cos, mu, k, beta)
}

pub fn angular_integral_with(kernel: AngularKernel, mu: f64, k: f64, beta: f64) -> Result<f64, RgError> {
    let p = -beta * beta * k / 4.0;
    if !p.is_finite() || !mu.is_finite() {
        return Err(invalid("K", "exponent must be finite"));
    }
    match kernel {
        AngularKernel::Cos if mu.abs() >= 1.0 => return Err(RgError::Domain { mu, bound: "|mu| < 1" }),
        AngularKernel::CosSquared if mu <= -1.0 => return Err(RgError::Domain { mu, bound: "mu > -1" }),
        _ => {}
    }
    if mu == 0.0 || p == 0.0 {
        return Ok(2.0 * PI);
    }
    // both kernels are even in theta; the cos^2 one has period pi
    let value = match kernel {
        AngularKernel::Cos => 2.0 * integrate(|t| (1.0 + mu * t.cos()).powf(p), 0.0, PI, ANGULAR_TOL / 2.0).0,
        AngularKernel::CosSquared => {
            4.0 * integrate(|t| (1.0 + mu * t.cos().powi(2)).powf(p), 0.0, PI / 2.0, ANGULAR_TOL / 4.0).0
        }
    };
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RgControls {
    pub y_big: f64,
    pub y_small: f64,
    pub ell_max: f64,
    /// Local error target of the step-doubling estimate.
    pub tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub beta: f64,
    pub kernel: AngularKernel,
    /// Keep every accepted state in the trace.
    pub record: bool,
}

impl Default for RgControls {
    fn default() -> Self {
        RgControls {
            y_big: 10.0,
            y_small: 1e-6,
            ell_max: 50.0,
            tol: 1e-10,
            h_init: 1e-2,
            h_max: 0.1,
            h_min: 1e-12,
            beta: SQRT_2,
            kernel: AngularKernel::CosSquared,
            record: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// g_2 grows: gapped, area law.
    RelevantG2,
    /// g_2 flows to zero: critical.
    IrrelevantG2,
    /// Delta = 0: the two sectors flow separately.
    Decoupled,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorFate {
    Massive,
    Massless,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseVerdict {
    pub classification: Classification,
    pub ell_stop: f64,
    pub final_state: RgState,
    /// (rho, sigma) fates for decoupled flows.
    pub sectors: Option<(SectorFate, SectorFate)>,
}

impl PhaseVerdict {
    /// Side of the relevant/irrelevant boundary: true for the critical side.
    /// Undetermined flows are placed by the sign of the g_2 scaling
    /// dimension at the point where the flow stopped.
    pub fn critical_side(&self, beta: f64) -> bool {
        match self.classification {
            Classification::RelevantG2 => false,
            Classification::IrrelevantG2 => true,
            _ => beta * beta * (self.final_state.k_rho + self.final_state.k_sigma) / 4.0 > 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgTrace {
    pub states: Vec<RgState>,
    pub verdict: PhaseVerdict,
}

fn rk4<const N: usize, F: Fn(&[f64; N]) -> Result<[f64; N], RgError>>(f: &F, y: &[f64; N], h: f64) -> Result<[f64; N], RgError> {
    let add = |a: &[f64; N], b: &[f64; N], s: f64| -> [f64; N] {
        let mut o = *a;
        for i in 0..N {
            o[i] += s * b[i];
        }
        o
    };
    let k1 = f(y)?;
    let k2 = f(&add(y, &k1, h / 2.0))?;
    let k3 = f(&add(y, &k2, h / 2.0))?;
    let k4 = f(&add(y, &k3, h))?;
    let mut o = *y;
    for i in 0..N {
        o[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(o)
}

/// Adaptive RK4 by step doubling; `stop` is checked after every accepted step.
fn integrate_flow<const N: usize, F, S>(f: F, y0: [f64; N], ctl: &RgControls, mut visit: S) -> Result<([f64; N], f64), RgError>
where
    F: Fn(&[f64; N]) -> Result<[f64; N], RgError>,
    S: FnMut(&[f64; N], f64) -> bool,
{
    let mut y = y0;
    let mut ell = 0.0;
    let mut h = ctl.h_init.min(ctl.h_max);
    if visit(&y, ell) {
        return Ok((y, ell));
    }
    while ell < ctl.ell_max {
        let step = h.min(ctl.ell_max - ell);
        let full = rk4(&f, &y, step)?;
        let half = rk4(&f, &rk4(&f, &y, step / 2.0)?, step / 2.0)?;
        let finite = half.iter().chain(&full).all(|v| v.is_finite());
        let err = if finite {
            (0..N).map(|i| (half[i] - full[i]).abs() / (1.0 + half[i].abs())).fold(0.0, f64::max) / 15.0
        } else {
            f64::INFINITY
        };
        if !err.is_finite() || err > ctl.tol {
            h = step / 2.0;
            if h < ctl.h_min {
                return Err(RgError::Stiffness { ell });
            }
            continue;
        }
        y = half;
        ell += step;
        if visit(&y, ell) {
            break;
        }
        if err < ctl.tol / 64.0 {
            h = (2.0 * step).min(ctl.h_max);
        }
    }
    Ok((y, ell))
}

/// Coupled flow of (K_rho, K_sigma, g_2) at fixed velocities.
pub fn flow_dimerized(init: &RgState, ctl: &RgControls) -> Result<RgTrace, RgError> {
    let s0 = *init;
    let (mu_rho, mu_sigma) = s0.anisotropy();
    let beta = ctl.beta;
    let b2 = beta * beta;
    let norm = |u: f64| b2 / (32.0 * PI * PI * u * u) / (2.0 * PI);
    let (c_rho, c_sigma) = (norm(s0.u_rho), norm(s0.u_sigma));
    let rhs = |y: &[f64; 3]| -> Result<[f64; 3], RgError> {
        let (kr, ks, g) = (y[0], y[1], y[2]);
        let g_sq = g * g;
        if !(kr.is_finite() && ks.is_finite() && g.is_finite()) {
            // rejected by the step control
            return Ok([f64::NAN; 3]);
        }
        let (dkr, dks) = if g_sq == 0.0 {
            (0.0, 0.0)
        } else {
            (
                -g_sq * kr * kr * c_rho * angular_integral_with(ctl.kernel, mu_rho, ks, beta)?,
                -g_sq * ks * ks * c_sigma * angular_integral_with(ctl.kernel, mu_sigma, kr, beta)?,
            )
        };
        Ok([dkr, dks, (2.0 - b2 * (kr + ks) / 4.0) * g])
    };
    let scale = PI * (s0.u_rho * s0.u_sigma).sqrt();
    let mut states = Vec::new();
    let mut classification = Classification::Undetermined;
    let at = |y: &[f64; 3], ell: f64| RgState { k_rho: y[0], k_sigma: y[1], g2: y[2], ell, ..s0 };
    let (y, ell) = integrate_flow(rhs, [s0.k_rho, s0.k_sigma, s0.g2], ctl, |y, ell| {
        if ctl.record {
            states.push(at(y, ell));
        }
        let y2 = (y[2] / scale).abs();
        if y2 > ctl.y_big {
            classification = Classification::RelevantG2;
            true
        } else if y2 < ctl.y_small && b2 * (y[0] + y[1]) / 4.0 > 2.0 {
            classification = Classification::IrrelevantG2;
            true
        } else {
            false
        }
    })?;
    let final_state = at(&y, ell);
    Ok(RgTrace { states, verdict: PhaseVerdict { classification, ell_stop: ell, final_state, sectors: None } })
}

/// Independent BKT flows dK = -y^2 K^2 / 2, dy = (2 - 2K) y of both sectors.
pub fn flow_decoupled(init: &RgState, ctl: &RgControls) -> Result<RgTrace, RgError> {
    if init.g2 != 0.0 {
        return Err(invalid("g2", "decoupled flow requires g2 = 0"));
    }
    let s0 = *init;
    let rhs = |y: &[f64; 4]| -> Result<[f64; 4], RgError> {
        Ok([
            -y[1] * y[1] * y[0] * y[0] / 2.0,
            (2.0 - 2.0 * y[0]) * y[1],
            -y[3] * y[3] * y[2] * y[2] / 2.0,
            (2.0 - 2.0 * y[2]) * y[3],
        ])
    };
    let fate = |k: f64, y: f64| {
        if y.abs() > ctl.y_big {
            SectorFate::Massive
        } else if y.abs() < ctl.y_small && k > 1.0 {
            SectorFate::Massless
        } else if y == 0.0 {
            SectorFate::Massless
        } else {
            SectorFate::Undetermined
        }
    };
    let at = |y: &[f64; 4], ell: f64| RgState {
        k_rho: y[0],
        g_rho: y[1] * PI * s0.u_rho,
        k_sigma: y[2],
        g_sigma: y[3] * PI * s0.u_sigma,
        ell,
        ..s0
    };
    let mut states = Vec::new();
    let (y, ell) = integrate_flow(rhs, [s0.k_rho, s0.y_rho(), s0.k_sigma, s0.y_sigma()], ctl, |y, ell| {
        if ctl.record {
            states.push(at(y, ell));
        }
        let settled = |f: SectorFate| f != SectorFate::Undetermined;
        settled(fate(y[0], y[1])) && settled(fate(y[2], y[3]))
    })?;
    let sectors = (fate(y[0], y[1]), fate(y[2], y[3]));
    Ok(RgTrace {
        states,
        verdict: PhaseVerdict {
            classification: Classification::Decoupled,
            ell_stop: ell,
            final_state: at(&y, ell),
            sectors: Some(sectors),
        },
    })
}

/// Flow at (J^2/B, gamma/B, Delta) with B = 1; picks the decoupled system at Delta = 0.
pub fn flow_point(j2: f64, gamma: f64, delta: f64, ctl: &RgControls) -> Result<RgTrace, RgError> {
    let init = init_luttinger(j2, gamma, 1.0, delta)?;
    let state = RgState::from(&init);
    if delta == 0.0 {
        flow_decoupled(&state, ctl)
    } else {
        flow_dimerized(&state, ctl)
    }
}

fn verdict_only(ctl: &RgControls) -> RgControls {
    RgControls { record: false, ..*ctl }
}

/// J^2_c / B at fixed (gamma/B, Delta) by bisection of the critical side on
/// [lo, hi] to resolution `resolution`.
pub fn critical_j2(gamma: f64, delta: f64, lo: f64, hi: f64, resolution: f64, ctl: &RgControls) -> Result<f64, RgError> {
    let ctl = verdict_only(ctl);
    let side = |j2: f64| -> Result<bool, RgError> { Ok(flow_point(j2, gamma, delta, &ctl)?.verdict.critical_side(ctl.beta)) };
    let (mut a, mut b) = (lo, hi);
    let (sa, sb) = (side(a)?, side(b)?);
    if sa == sb {
        return Err(RgError::NoBoundary { lo, hi });
    }
    while b - a > resolution {
        let m = 0.5 * (a + b);
        if side(m)? == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub j2: f64,
    pub delta: f64,
    pub classification: Classification,
    pub critical_side: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub delta: f64,
    /// Refined boundary, absent when the row has no flip or Delta = 0.
    pub j2_c: Option<f64>,
    /// Number of side changes along the J^2 scan.
    pub flips: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub gamma: f64,
    pub cells: Vec<PhaseCell>,
    pub rows: Vec<PhaseRow>,
}

/// Verdicts on the (J^2/B, Delta) grid at fixed gamma/B, with each
/// row's first flip refined by bisection to `resolution`.
pub fn sweep_phase_diagram(gamma: f64, j2_grid: &[f64], delta_grid: &[f64], resolution: f64, ctl: &RgControls) -> Result<PhaseMap, RgError> {
    let ctl = verdict_only(ctl);
    let points: Vec<(f64, f64)> = delta_grid.iter().flat_map(|&d| j2_grid.iter().map(move |&j| (j, d))).collect();
    let cells = points
        .par_iter()
        .map(|&(j2, delta)| {
            let v = flow_point(j2, gamma, delta, &ctl)?.verdict;
            Ok(PhaseCell { j2, delta, classification: v.classification, critical_side: v.critical_side(ctl.beta) })
        })
        .collect::<Result<Vec<_>, RgError>>()?;
    let rows = delta_grid
        .iter()
        .enumerate()
        .map(|(r, &delta)| {
            let row = &cells[r * j2_grid.len()..(r + 1) * j2_grid.len()];
            let flips = row.windows(2).filter(|w| w[0].critical_side != w[1].critical_side).count();
            let j2_c = if delta == 0.0 {
                None
            } else {
                match row.windows(2).find(|w| w[0].critical_side != w[1].critical_side) {
                    Some(w) => Some(critical_j2(gamma, delta, w[0].j2, w[1].j2, resolution, &ctl)?),
                    None => None,
                }
            };
            Ok(PhaseRow { delta, j2_c, flips })
        })
        .collect::<Result<Vec<_>, RgError>>()?;
    Ok(PhaseMap { gamma, cells, rows })
}
