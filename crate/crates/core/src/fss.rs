//! Finite-size scaling: crossing points of S_TEE(alpha) curves, the
//! data-collapse objective for S_TEE = F[(alpha - alpha_c) L^(1/nu)], and the
//! half-cut entropy doubling test separating log L from (log L)^2 growth.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FssError {
    #[error("need at least {needed} {what}, got {got}")]
    TooFewPoints { what: &'static str, needed: usize, got: usize },
    #[error("curves L = {l1} and L = {l2} do not cross on their common range")]
    NoCrossing { l1: usize, l2: usize },
    #[error("coincident abscissae leave fewer than 3 distinct points")]
    DegenerateAbscissa,
    #[error("minimum of {param} at {value} lies on the window edge")]
    WindowTooNarrow { param: &'static str, value: f64 },
    #[error("invalid data: {0}")]
    InvalidData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    #[serde(rename = "L")]
    pub l: usize,
    pub alpha: f64,
    #[serde(rename = "S_TEE")]
    pub s_tee: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingDataset {
    pub records: Vec<ScalingRecord>,
}

impl ScalingDataset {
    pub fn new(records: Vec<ScalingRecord>) -> Self {
        ScalingDataset { records }
    }

    /// Records grouped by L, each sorted by alpha.
    pub fn curves(&self) -> BTreeMap<usize, Vec<(f64, f64)>> {
        let mut m: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &self.records {
            m.entry(r.l).or_default().push((r.alpha, r.s_tee));
        }
        for c in m.values_mut() {
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        m
    }

    /// Checks the fit preconditions: >= 3 sizes, >= 5 alphas per size,
    /// finite values and positive standard errors.
    pub fn validate(&self) -> Result<(), FssError> {
        for r in &self.records {
            if !(r.alpha.is_finite() && r.s_tee.is_finite()) {
                return Err(FssError::InvalidData(format!("non-finite record at L = {}", r.l)));
            }
            if !(r.stderr > 0.0) {
                return Err(FssError::InvalidData(format!("stderr must be > 0 at L = {}, alpha = {}", r.l, r.alpha)));
            }
        }
        let curves = self.curves();
        if curves.len() < 3 {
            return Err(FssError::TooFewPoints { what: "system sizes", needed: 3, got: curves.len() });
        }
        for c in curves.values() {
            if c.len() < 5 {
                return Err(FssError::TooFewPoints { what: "alpha values per size", needed: 5, got: c.len() });
            }
        }
        Ok(())
    }
}

fn interp(curve: &[(f64, f64)], x: f64) -> f64 {
    let k = curve.partition_point(|p| p.0 < x).clamp(1, curve.len() - 1);
    let (x0, y0) = curve[k - 1];
    let (x1, y1) = curve[k];
    if x1 == x0 {
        return 0.5 * (y0 + y1);
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Crossing of two piecewise-linear curves on their common range; with
/// several sign changes the one with the largest jump in the difference wins.
fn pair_crossing(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<f64> {
    let lo = a[0].0.max(b[0].0);
    let hi = a[a.len() - 1].0.min(b[b.len() - 1].0);
    if !(hi > lo) {
        return None;
    }
    let mut xs: Vec<f64> = a.iter().chain(b).map(|p| p.0).filter(|&x| x >= lo && x <= hi).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let d: Vec<f64> = xs.iter().map(|&x| interp(a, x) - interp(b, x)).collect();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..xs.len() {
        let cand = if d[i] == 0.0 {
            let left = if i > 0 { d[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < xs.len() { d[i + 1].abs() } else { 0.0 };
            Some((xs[i], left + right))
        } else if i + 1 < xs.len() && d[i] * d[i + 1] < 0.0 {
            let t = d[i] / (d[i] - d[i + 1]);
            Some((xs[i] + t * (xs[i + 1] - xs[i]), (d[i] - d[i + 1]).abs()))
        } else {
            None
        };
        if let Some(c) = cand {
            if best.is_none_or(|b| c.1 > b.1) {
                best = Some(c);
            }
        }
    }
    best.map(|b| b.0)
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEstimate {
    pub alpha_crit: f64,
    /// Interquartile range of the pairwise crossings.
    pub uncertainty: f64,
    /// (L1, L2, crossing) for every pair of sizes.
    pub pairs: Vec<(usize, usize, f64)>,
}

pub fn crossing_point(dataset: &ScalingDataset) -> Result<CrossingEstimate, FssError> {
    let curves = dataset.curves();
    if curves.len() < 2 {
        return Err(FssError::TooFewPoints { what: "system sizes", needed: 2, got: curves.len() });
    }
    let sizes: Vec<usize> = curves.keys().copied().collect();
    let mut pairs = Vec::new();
    for (i, &l1) in sizes.iter().enumerate() {
        for &l2 in &sizes[i + 1..] {
            let (a, b) = (&curves[&l1], &curves[&l2]);
            if a.len() < 2 || b.len() < 2 {
                return Err(FssError::TooFewPoints { what: "alpha values per size", needed: 2, got: a.len().min(b.len()) });
            }
            let x = pair_crossing(a, b).ok_or(FssError::NoCrossing { l1, l2 })?;
            pairs.push((l1, l2, x));
        }
    }
    let mut xs: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    xs.sort_by(f64::total_cmp);
    Ok(CrossingEstimate {
        alpha_crit: quantile(&xs, 0.5),
        uncertainty: quantile(&xs, 0.75) - quantile(&xs, 0.25),
        pairs,
    })
}

/// (x, y, L) with x = (alpha - alpha_c) L^(1/nu), sorted by (x, L).
pub fn collapsed_coordinates(dataset: &ScalingDataset, alpha_crit: f64, nu: f64) -> Vec<(f64, f64, usize)> {
    let mut pts: Vec<(f64, f64, usize)> = dataset
        .records
        .iter()
        .map(|r| ((r.alpha - alpha_crit) * (r.l as f64).powf(1.0 / nu), r.s_tee, r.l))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.total_cmp(&b.1)));
    pts
}

/// eps = sum_{i=2}^{n-1} (y_i - ybar_i)^2 with ybar_i the straight line
/// through the neighbours of point i in x order. Points sharing an
/// abscissa are replaced by their mean.
pub fn collapse_objective(dataset: &ScalingDataset, alpha_crit: f64, nu: f64) -> Result<f64, FssError> {
    if !(nu > 0.0) || !nu.is_finite() || !alpha_crit.is_finite() {
        return Err(FssError::InvalidData(format!("need finite alpha_crit and nu > 0, got ({alpha_crit}, {nu})")));
    }
    let pts = collapsed_coordinates(dataset, alpha_crit, nu);
    let mut merged: Vec<(f64, f64, usize)> = Vec::with_capacity(pts.len());
    for (x, y, _) in pts {
        match merged.last_mut() {
            Some(last) if x == last.0 => {
                last.1 += y;
                last.2 += 1;
            }
            _ => merged.push((x, y, 1)),
        }
    }
    if merged.len() < 3 {
        return Err(FssError::DegenerateAbscissa);
    }
    let p: Vec<(f64, f64)> = merged.iter().map(|&(x, s, n)| (x, s / n as f64)).collect();
    let eps = p
        .windows(3)
        .map(|w| {
            let ((x0, y0), (x1, y1), (x2, y2)) = (w[0], w[1], w[2]);
            let ybar = ((x2 - x1) * y0 - (x0 - x1) * y2) / (x2 - x0);
            (y1 - ybar).powi(2)
        })
        .sum();
    Ok(eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub alpha_crit: f64,
    pub nu: f64,
    pub nu_err_lo: f64,
    pub nu_err_hi: f64,
    pub epsilon_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollapseControls {
    pub alpha_points: usize,
    pub nu_points: usize,
    /// Step of the nu grid on which the eps < 2 eps_min interval is read.
    pub nu_error_step: f64,
    pub refine_rounds: usize,
}

impl Default for CollapseControls {
    fn default() -> Self {
        CollapseControls { alpha_points: 41, nu_points: 61, nu_error_step: 0.01, refine_rounds: 6 }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_895;

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd { (c, fc) } else { (d, fd) }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Global minimization of eps over alpha_window x nu_window: coarse grid,
/// then alternating golden-section refinement; the nu error bars are the
/// connected eps < 2 eps_min region on a fixed-step nu grid at the best alpha.
pub fn fit_collapse(
    dataset: &ScalingDataset,
    alpha_window: (f64, f64),
    nu_window: (f64, f64),
    ctl: &CollapseControls,
) -> Result<CollapseResult, FssError> {
    dataset.validate()?;
    let (a_lo, a_hi) = alpha_window;
    let (n_lo, n_hi) = nu_window;
    if !(a_hi > a_lo) || !(n_hi > n_lo) || !(n_lo > 0.0) || ctl.alpha_points < 3 || ctl.nu_points < 3 {
        return Err(FssError::InvalidData("windows must be increasing with nu > 0 and >= 3 grid points".into()));
    }
    let eps = |a: f64, n: f64| collapse_objective(dataset, a, n).unwrap_or(f64::INFINITY);
    let alphas = linspace(a_lo, a_hi, ctl.alpha_points);
    let nus = linspace(n_lo, n_hi, ctl.nu_points);
    let (mut ia, mut inu, mut best) = (0, 0, f64::INFINITY);
    for (i, &a) in alphas.iter().enumerate() {
        for (j, &n) in nus.iter().enumerate() {
            let e = eps(a, n);
            if e < best {
                (ia, inu, best) = (i, j, e);
            }
        }
    }
    if !best.is_finite() {
        return Err(FssError::DegenerateAbscissa);
    }
    if ia == 0 || ia == alphas.len() - 1 {
        return Err(FssError::WindowTooNarrow { param: "alpha_crit", value: alphas[ia] });
    }
    if inu == 0 || inu == nus.len() - 1 {
        return Err(FssError::WindowTooNarrow { param: "nu", value: nus[inu] });
    }
    let (da, dn) = (alphas[1] - alphas[0], nus[1] - nus[0]);
    let (mut a, mut n) = (alphas[ia], nus[inu]);
    for _ in 0..ctl.refine_rounds {
        let (a_new, _) = golden_min(|x| eps(x, n), (a - da).max(a_lo), (a + da).min(a_hi), 1e-7);
        let (n_new, _) = golden_min(|x| eps(a_new, x), (n - dn).max(n_lo), (n + dn).min(n_hi), 1e-7);
        (a, n) = (a_new, n_new);
    }
    let mut eps_min = eps(a, n);
    if best < eps_min {
        (a, n, eps_min) = (alphas[ia], nus[inu], best);
    }
    let (lo, hi) = nu_error_interval(|x| eps(a, x), n, eps_min, nu_window, ctl.nu_error_step);
    Ok(CollapseResult { alpha_crit: a, nu: n, nu_err_lo: lo, nu_err_hi: hi, epsilon_min: eps_min })
}

/// Connected region around nu where eps < 2 eps_min, read on the grid
/// nu + k step and clipped to the window.
fn nu_error_interval<F: Fn(f64) -> f64>(f: F, nu: f64, eps_min: f64, window: (f64, f64), step: f64) -> (f64, f64) {
    let inside = |x: f64| f(x) < 2.0 * eps_min;
    let walk = |dir: f64| {
        let mut edge = nu;
        let mut k = 1;
        loop {
            let x = nu + dir * k as f64 * step;
            if x < window.0 - 1e-12 || x > window.1 + 1e-12 || !inside(x) {
                return edge;
            }
            edge = x;
            k += 1;
        }
    };
    (walk(-1.0), walk(1.0))
}

/// fit_collapse with the alpha window centred on the crossing estimate.
pub fn fit_collapse_from_crossing(
    dataset: &ScalingDataset,
    half_width: f64,
    nu_window: (f64, f64),
    ctl: &CollapseControls,
) -> Result<(CrossingEstimate, CollapseResult), FssError> {
    let cross = crossing_point(dataset)?;
    let c = cross.alpha_crit;
    let fit = fit_collapse(dataset, (c - half_width, c + half_width), nu_window, ctl)?;
    Ok((cross, fit))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSRecord {
    #[serde(rename = "L")]
    pub l: usize,
    pub delta_s: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaSSeries {
    pub records: Vec<DeltaSRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfCutRecord {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "S_half")]
    pub s_half: f64,
    pub stderr: f64,
}

impl DeltaSSeries {
    /// delta S(L) = S(2L) - S(L) for every L whose double is present;
    /// errors add in quadrature.
    pub fn from_half_cut(table: &[HalfCutRecord]) -> DeltaSSeries {
        let by_l: BTreeMap<usize, &HalfCutRecord> = table.iter().map(|r| (r.l, r)).collect();
        let records = by_l
            .iter()
            .filter_map(|(&l, r)| {
                by_l.get(&(2 * l)).map(|d| DeltaSRecord {
                    l,
                    delta_s: d.s_half - r.s_half,
                    stderr: (d.stderr.powi(2) + r.stderr.powi(2)).sqrt(),
                })
            })
            .collect();
        DeltaSSeries { records }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglementScaling {
    LogSquared,
    Logarithmic,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSVerdict {
    pub classification: EntanglementScaling,
    /// d(delta S)/d(log2 L), bits per doubling.
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub weighted: bool,
}

pub const DEFAULT_SLOPE_FLOOR: f64 = 0.05;

/// Straight-line fit of delta S against log2 L, weighted by 1/stderr^2
/// when every stderr is positive and ordinary least squares otherwise.
pub fn classify_delta_s(series: &DeltaSSeries, slope_floor: f64) -> Result<DeltaSVerdict, FssError> {
    let n = series.records.len();
    if n < 3 {
        return Err(FssError::TooFewPoints { what: "doubling points", needed: 3, got: n });
    }
    let xs: Vec<f64> = series.records.iter().map(|r| (r.l as f64).log2()).collect();
    let ys: Vec<f64> = series.records.iter().map(|r| r.delta_s).collect();
    if ys.iter().chain(&xs).any(|v| !v.is_finite()) {
        return Err(FssError::InvalidData("non-finite delta S record".into()));
    }
    let weighted = series.records.iter().all(|r| r.stderr > 0.0 && r.stderr.is_finite());
    let w: Vec<f64> = if weighted { series.records.iter().map(|r| r.stderr.powi(-2)).collect() } else { vec![1.0; n] };
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FssError::DegenerateAbscissa);
    }
    let sxy: f64 = xs.iter().zip(&ys).zip(&w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    };
    let excludes_zero = (slope - 2.0 * slope_stderr > 0.0) || (slope + 2.0 * slope_stderr < 0.0);
    let classification = if excludes_zero && slope > 0.0 {
        EntanglementScaling::LogSquared
    } else if !excludes_zero && slope.abs() < slope_floor {
        EntanglementScaling::Logarithmic
    } else {
        EntanglementScaling::Undetermined
    };
    Ok(DeltaSVerdict { classification, slope, slope_stderr, intercept, weighted })
}
