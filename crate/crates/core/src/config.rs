//! Run configuration: one TOML document with a section per subcommand.
//! Unknown keys are rejected; every validation failure names its field path.

use crate::fss::{CollapseControls, DEFAULT_SLOPE_FLOOR};
use crate::rg::RgControls;
use crate::toy::ToyConfig;
use crate::trajectory::TrajectoryConfig;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Validation { path: String, reason: String },
    #[error("cannot read config {file}: {reason}")]
    Io { file: PathBuf, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation { path: path.into(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSection {
    pub gamma: f64,
    pub dt: f64,
    /// PPS strength; exactly one of `b` and `r_c` must be set.
    pub b: Option<f64>,
    pub r_c: Option<f64>,
    pub expectation: f64,
    pub samples: usize,
    pub seed: u64,
    /// Points of the pdf table.
    pub grid_points: usize,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            gamma: 1.0,
            dt: 0.05,
            b: Some(0.2),
            r_c: None,
            expectation: 0.0,
            samples: 10_000,
            seed: 0,
            grid_points: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RgGrid {
    pub j2_min: f64,
    pub j2_max: f64,
    pub j2_points: usize,
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_points: usize,
    /// Bisection resolution of the boundary in J^2/B.
    pub resolution: f64,
}

impl Default for RgGrid {
    fn default() -> Self {
        RgGrid {
            j2_min: 0.0,
            j2_max: 0.38,
            j2_points: 39,
            delta_min: 0.0,
            delta_max: 0.2,
            delta_points: 5,
            resolution: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RgflowSection {
    /// J^2 / B.
    pub j2: f64,
    /// gamma / B.
    pub gamma: f64,
    pub delta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Phase-map sweep instead of a single flow.
    pub sweep: Option<RgGrid>,
    pub controls: RgControls,
}

impl Default for RgflowSection {
    fn default() -> Self {
        RgflowSection { j2: 0.019, gamma: 0.32, delta: 0.07, b: 1.0, sweep: None, controls: RgControls::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollapseSection {
    pub input: Option<PathBuf>,
    pub alpha_window: (f64, f64),
    pub nu_window: (f64, f64),
    /// When set, the alpha window is centred on the crossing estimate with
    /// this half width.
    pub crossing_half_width: Option<f64>,
    pub controls: CollapseControls,
}

impl Default for CollapseSection {
    fn default() -> Self {
        CollapseSection {
            input: None,
            alpha_window: (0.8, 1.2),
            nu_window: (0.3, 3.0),
            crossing_half_width: None,
            controls: CollapseControls::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeltaScalingSection {
    pub input: Option<PathBuf>,
    pub slope_floor: f64,
}

impl Default for DeltaScalingSection {
    fn default() -> Self {
        DeltaScalingSection { input: None, slope_floor: DEFAULT_SLOPE_FLOOR }
    }
}

/// Ensemble grid over system sizes and the cross-site rate alpha; the other
/// parameters come from `[simulate]`. Drifts follow B_alpha = b alpha and
/// B_gamma = b gamma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    pub alpha: Vec<f64>,
    pub b: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            l: vec![8, 12, 16, 24],
            alpha: (0..9).map(|i| 0.8 + 0.05 * i as f64).collect(),
            b: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub stats: StatsSection,
    pub toy: ToyConfig,
    pub simulate: TrajectoryConfig,
    pub rgflow: RgflowSection,
    pub collapse: CollapseSection,
    pub deltascaling: DeltaScalingSection,
    pub sweep: SweepSection,
}

/// Subcommand whose section is validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Stats,
    Toy,
    Simulate,
    Rgflow,
    Collapse,
    DeltaScaling,
    Sweep,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file; `None` gives all defaults.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        match file {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::Io { file: p.to_path_buf(), reason: e.to_string() })?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn validate(&self, section: Section) -> Result<(), ConfigError> {
        match section {
            Section::Stats => validate_stats(&self.stats),
            Section::Toy => self.toy.validate().map_err(|e| match e {
                crate::toy::ToyError::InvalidConfig { field, reason } => invalid(format!("toy.{field}"), reason),
                other => invalid("toy", other.to_string()),
            }),
            Section::Simulate => validate_trajectory("simulate", &self.simulate),
            Section::Rgflow => validate_rgflow(&self.rgflow),
            Section::Collapse => validate_collapse(&self.collapse),
            Section::DeltaScaling => {
                let d = &self.deltascaling;
                if d.input.is_none() {
                    return Err(invalid("deltascaling.input", "required"));
                }
                if !(d.slope_floor > 0.0) || !d.slope_floor.is_finite() {
                    return Err(invalid("deltascaling.slope_floor", "must be finite and > 0"));
                }
                Ok(())
            }
            Section::Sweep => validate_sweep(self),
        }
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be finite and > 0, got {v}")))
    }
}

fn validate_stats(s: &StatsSection) -> Result<(), ConfigError> {
    positive("stats.gamma", s.gamma)?;
    positive("stats.dt", s.dt)?;
    match (s.b, s.r_c) {
        (Some(_), Some(_)) => return Err(invalid("stats.r_c", "set either b or r_c, not both")),
        (None, None) => return Err(invalid("stats.b", "one of b or r_c is required")),
        (Some(b), None) if !(b >= 0.0) || !b.is_finite() => {
            return Err(invalid("stats.b", format!("must be finite and >= 0, got {b}")))
        }
        (None, Some(r)) if !r.is_finite() => return Err(invalid("stats.r_c", "must be finite")),
        _ => {}
    }
    if !(-1.0..=1.0).contains(&s.expectation) {
        return Err(invalid("stats.expectation", "must lie in [-1, 1]"));
    }
    if s.samples == 0 {
        return Err(invalid("stats.samples", "must be >= 1"));
    }
    if s.grid_points < 2 {
        return Err(invalid("stats.grid_points", "must be >= 2"));
    }
    Ok(())
}

fn validate_trajectory(prefix: &str, t: &TrajectoryConfig) -> Result<(), ConfigError> {
    t.validate().map_err(|e| match e {
        crate::trajectory::TrajectoryError::InvalidConfig { field, reason } => invalid(format!("{prefix}.{field}"), reason),
        other => invalid(prefix, other.to_string()),
    })
}

fn validate_rgflow(r: &RgflowSection) -> Result<(), ConfigError> {
    positive("rgflow.B", r.b)?;
    let window = PI / 8.0;
    let check_ratio = |path: &str, v: f64| -> Result<(), ConfigError> {
        if !(v >= 0.0) || !(v < window) {
            return Err(invalid(path, format!("must lie in [0, pi/8) for a valid bosonized initialization, got {v}")));
        }
        Ok(())
    };
    check_ratio("rgflow.gamma", r.gamma)?;
    let c = &r.controls;
    for (p, v) in [
        ("rgflow.controls.y_big", c.y_big),
        ("rgflow.controls.y_small", c.y_small),
        ("rgflow.controls.ell_max", c.ell_max),
        ("rgflow.controls.tol", c.tol),
        ("rgflow.controls.h_init", c.h_init),
        ("rgflow.controls.h_max", c.h_max),
        ("rgflow.controls.h_min", c.h_min),
        ("rgflow.controls.beta", c.beta),
    ] {
        positive(p, v)?;
    }
    if c.y_small >= c.y_big {
        return Err(invalid("rgflow.controls.y_small", "must be below y_big"));
    }
    match &r.sweep {
        None => {
            check_ratio("rgflow.j2", r.j2)?;
            if !(-1.0 < r.delta && r.delta < 1.0) {
                return Err(invalid("rgflow.delta", "must lie in (-1, 1)"));
            }
        }
        Some(g) => {
            check_ratio("rgflow.sweep.j2_min", g.j2_min)?;
            check_ratio("rgflow.sweep.j2_max", g.j2_max)?;
            if g.j2_max <= g.j2_min || g.j2_points < 2 {
                return Err(invalid("rgflow.sweep.j2_points", "need j2_max > j2_min and >= 2 points"));
            }
            if !(-1.0 < g.delta_min && g.delta_max < 1.0) || g.delta_max < g.delta_min || g.delta_points < 1 {
                return Err(invalid("rgflow.sweep.delta_points", "need -1 < delta_min <= delta_max < 1 and >= 1 point"));
            }
            if g.delta_points > 1 && g.delta_max == g.delta_min {
                return Err(invalid("rgflow.sweep.delta_max", "must exceed delta_min for more than one point"));
            }
            positive("rgflow.sweep.resolution", g.resolution)?;
        }
    }
    Ok(())
}

fn validate_collapse(c: &CollapseSection) -> Result<(), ConfigError> {
    if c.input.is_none() {
        return Err(invalid("collapse.input", "required"));
    }
    let (a0, a1) = c.alpha_window;
    if !(a1 > a0) || !a0.is_finite() || !a1.is_finite() {
        return Err(invalid("collapse.alpha_window", "must be an increasing finite pair"));
    }
    let (n0, n1) = c.nu_window;
    if !(n1 > n0) || !(n0 > 0.0) || !n1.is_finite() {
        return Err(invalid("collapse.nu_window", "must be an increasing pair with nu > 0"));
    }
    if let Some(h) = c.crossing_half_width {
        positive("collapse.crossing_half_width", h)?;
    }
    let k = &c.controls;
    if k.alpha_points < 3 {
        return Err(invalid("collapse.controls.alpha_points", "must be >= 3"));
    }
    if k.nu_points < 3 {
        return Err(invalid("collapse.controls.nu_points", "must be >= 3"));
    }
    positive("collapse.controls.nu_error_step", k.nu_error_step)
}

fn validate_sweep(cfg: &RunConfig) -> Result<(), ConfigError> {
    let s = &cfg.sweep;
    if s.l.is_empty() {
        return Err(invalid("sweep.L", "must list at least one size"));
    }
    if s.alpha.is_empty() {
        return Err(invalid("sweep.alpha", "must list at least one coupling"));
    }
    if !(s.b >= 0.0) || !s.b.is_finite() {
        return Err(invalid("sweep.b", "must be finite and >= 0"));
    }
    for (i, &a) in s.alpha.iter().enumerate() {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(invalid(format!("sweep.alpha[{i}]"), format!("must be finite and >= 0, got {a}")));
        }
    }
    for (i, &l) in s.l.iter().enumerate() {
        let point = sweep_point(&cfg.simulate, s.b, l, s.alpha[0]);
        validate_trajectory(&format!("sweep.L[{i}]"), &point).map_err(|e| match e {
            ConfigError::Validation { reason, .. } => invalid(format!("sweep.L[{i}]"), reason),
            other => other,
        })?;
    }
    validate_trajectory("simulate", &sweep_point(&cfg.simulate, s.b, s.l[0], s.alpha[0]))
}

/// Trajectory config at one (L, alpha) grid point.
pub fn sweep_point(base: &TrajectoryConfig, b: f64, l: usize, alpha: f64) -> TrajectoryConfig {
    TrajectoryConfig { l, alpha, b_gamma: b * base.gamma, b_alpha: b * alpha, ..base.clone() }
}
