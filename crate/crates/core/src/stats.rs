//! Gaussian-pointer readout statistics: the two-Gaussian readout mixture,
//! truncation at a cutoff r_c, the shifted-Gaussian continuum approximation,
//! the r_c <-> b map and a two-sample Kolmogorov-Smirnov test.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

/// Retained probability mass below which a truncation is treated as degenerate.
pub const MIN_RETAINED_MASS: f64 = 1e-12;

/// Pointer width at which the Kraus update is exactly exp(2 x lambda O).
pub const SSE_POINTER_WIDTH: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("retained mass {mass:e} below {MIN_RETAINED_MASS:e}: truncation is degenerate")]
    DegenerateTruncation { mass: f64 },
    #[error("no sign change for b = {b} on the cutoff search interval")]
    NoBracket { b: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> StatsError {
    StatsError::InvalidParameter { name, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub lambda: f64,
    pub pointer_width: f64,
    pub gamma: f64,
    pub dt: f64,
    pub b: f64,
    pub r_c: f64,
    /// PPS drift rate b*gamma.
    pub big_b: f64,
}

impl TruncationParams {
    /// Parameters for a given PPS strength b; the cutoff is solved at the
    /// reference expectation value `expectation`.
    pub fn from_b(gamma: f64, dt: f64, b: f64, expectation: f64) -> Result<Self, StatsError> {
        check_rates(gamma, dt)?;
        if !(b >= 0.0) || !b.is_finite() {
            return Err(invalid("b", format!("must be finite and >= 0, got {b}")));
        }
        let r_c = solve_rc_from_b(b, dt, gamma, expectation, SSE_POINTER_WIDTH)?;
        Ok(Self::assemble(gamma, dt, b, r_c))
    }

    /// Parameters for a given cutoff; b is evaluated at `expectation`.
    pub fn from_rc(gamma: f64, dt: f64, r_c: f64, expectation: f64) -> Result<Self, StatsError> {
        check_rates(gamma, dt)?;
        let b = solve_b_from_rc(r_c, dt, gamma, expectation, SSE_POINTER_WIDTH)?;
        Ok(Self::assemble(gamma, dt, b, r_c))
    }

    fn assemble(gamma: f64, dt: f64, b: f64, r_c: f64) -> Self {
        TruncationParams {
            lambda: (gamma * dt).sqrt(),
            pointer_width: SSE_POINTER_WIDTH,
            gamma,
            dt,
            b,
            r_c,
            big_b: b * gamma,
        }
    }
}

fn check_rates(gamma: f64, dt: f64) -> Result<(), StatsError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(invalid("gamma", format!("must be > 0, got {gamma}")));
    }
    Ok(())
}

/// Two-Gaussian readout density with peaks at +-lambda.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutDistribution {
    pub mean_plus: f64,
    pub mean_minus: f64,
    pub weight_plus: f64,
    pub weight_minus: f64,
    pub width: f64,
}

impl ReadoutDistribution {
    pub fn new(lambda: f64, weight_plus: f64, width: f64) -> Result<Self, StatsError> {
        if !(0.0..=1.0).contains(&weight_plus) {
            return Err(invalid("weight_plus", format!("must lie in [0,1], got {weight_plus}")));
        }
        if !(width > 0.0) {
            return Err(invalid("width", format!("must be > 0, got {width}")));
        }
        Ok(ReadoutDistribution {
            mean_plus: lambda,
            mean_minus: -lambda,
            weight_plus,
            weight_minus: 1.0 - weight_plus,
            width,
        })
    }

    /// Mixture for an observable with spectrum +-1 and expectation value `expectation`.
    pub fn from_expectation(lambda: f64, expectation: f64, width: f64) -> Result<Self, StatsError> {
        if !(-1.0..=1.0).contains(&expectation) {
            return Err(invalid("expectation", format!("must lie in [-1,1], got {expectation}")));
        }
        Self::new(lambda, 0.5 * (1.0 + expectation), width)
    }

    /// A single Gaussian, stored as a mixture with all weight on the plus peak.
    pub fn single(mean: f64, width: f64) -> Result<Self, StatsError> {
        if !(width > 0.0) {
            return Err(invalid("width", format!("must be > 0, got {width}")));
        }
        Ok(ReadoutDistribution {
            mean_plus: mean,
            mean_minus: mean,
            weight_plus: 1.0,
            weight_minus: 0.0,
            width,
        })
    }

    fn components(&self) -> [(f64, f64); 2] {
        [(self.weight_plus, self.mean_plus), (self.weight_minus, self.mean_minus)]
    }

    pub fn mean(&self) -> f64 {
        self.weight_plus * self.mean_plus + self.weight_minus * self.mean_minus
    }

    /// Probability mass at x >= r_c.
    pub fn retained_mass(&self, r_c: f64) -> f64 {
        self.components()
            .iter()
            .map(|&(w, m)| w * upper_tail((r_c - m) / self.width))
            .sum()
    }
}

fn gaussian(x: f64, mean: f64, width: f64) -> f64 {
    let z = (x - mean) / width;
    (-0.5 * z * z).exp() / (width * (2.0 * PI).sqrt())
}

/// P(Z >= z) for a standard normal Z.
fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn mixture_pdf(dist: &ReadoutDistribution, x: f64) -> f64 {
    dist.components()
        .iter()
        .map(|&(w, m)| if w > 0.0 { w * gaussian(x, m, dist.width) } else { 0.0 })
        .sum()
}

/// Density of the mixture restricted to x >= r_c and renormalized.
pub fn truncated_pdf(dist: &ReadoutDistribution, r_c: f64, x: f64) -> Result<f64, StatsError> {
    let mass = dist.retained_mass(r_c);
    if mass < MIN_RETAINED_MASS {
        return Err(StatsError::DegenerateTruncation { mass });
    }
    Ok(if x >= r_c { mixture_pdf(dist, x) / mass } else { 0.0 })
}

fn mean_shift_raw(r_c: f64, center: f64, width: f64) -> Result<f64, StatsError> {
    let z = (center - r_c) / (SQRT_2 * width);
    // 1 + erf(z) written as erfc(-z) so deep truncation keeps its digits
    let denom = erfc(-z);
    let mass = 0.5 * denom;
    if !(mass >= MIN_RETAINED_MASS) {
        return Err(StatsError::DegenerateTruncation { mass });
    }
    Ok(width * (2.0 / PI).sqrt() * (-z * z).exp() / denom)
}

/// Mean shift of the continuum readout Gaussian N(lambda<O>, width^2) when
/// truncated at r_c.
pub fn mean_shift(params: &TruncationParams, expectation: f64) -> Result<f64, StatsError> {
    mean_shift_raw(params.r_c, params.lambda * expectation, params.pointer_width)
}

/// PPS strength b produced by cutoff r_c, i.e. mean_shift / lambda.
pub fn solve_b_from_rc(
    r_c: f64,
    dt: f64,
    gamma: f64,
    expectation: f64,
    width: f64,
) -> Result<f64, StatsError> {
    check_rates(gamma, dt)?;
    let lambda = (gamma * dt).sqrt();
    if r_c == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok(mean_shift_raw(r_c, lambda * expectation, width)? / lambda)
}

/// Cutoff r_c whose truncation shifts the mean by exactly b*lambda.
///
/// Searches x = r_c / (sqrt(2) width) on [-40, 40] with a bisection/secant
/// hybrid to 1e-10 in x. b = 0 maps to r_c = -inf.
pub fn solve_rc_from_b(
    b: f64,
    dt: f64,
    gamma: f64,
    expectation: f64,
    width: f64,
) -> Result<f64, StatsError> {
    check_rates(gamma, dt)?;
    if !(b >= 0.0) || !b.is_finite() {
        return Err(invalid("b", format!("must be finite and >= 0, got {b}")));
    }
    if b == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let lambda = (gamma * dt).sqrt();
    let target = b * lambda;
    let scale = SQRT_2 * width;
    // the shift is increasing in r_c; work with its logarithm for range
    let f = |x: f64| -> Option<f64> {
        mean_shift_raw(x * scale, lambda * expectation, width).ok().map(|s| s.ln() - target.ln())
    };
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    let mut flo = f(lo).ok_or(StatsError::NoBracket { b })?;
    if flo > 0.0 {
        return Err(StatsError::NoBracket { b });
    }
    // largest cutoff whose retained mass is still representable
    let mut fhi = f(hi);
    if fhi.is_none() {
        let (mut good, mut bad) = (lo, hi);
        while bad - good > 1e-9 {
            let mid = 0.5 * (good + bad);
            if f(mid).is_some() {
                good = mid;
            } else {
                bad = mid;
            }
        }
        hi = good;
        fhi = f(hi);
    }
    let mut fhi = fhi.ok_or(StatsError::NoBracket { b })?;
    if fhi < 0.0 {
        return Err(StatsError::NoBracket { b });
    }
    for iter in 0..400 {
        if hi - lo < 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let secant = hi - fhi * (hi - lo) / (fhi - flo);
        // every third step bisects so the bracket shrinks geometrically
        let trial = if iter % 3 != 2 && secant.is_finite() && secant > lo && secant < hi {
            secant
        } else {
            mid
        };
        let ft = f(trial).ok_or(StatsError::NoBracket { b })?;
        if ft == 0.0 {
            return Ok(trial * scale);
        }
        if ft < 0.0 {
            lo = trial;
            flo = ft;
        } else {
            hi = trial;
            fhi = ft;
        }
    }
    Ok(0.5 * (lo + hi) * scale)
}

/// Single Gaussian with mean lambda(<O> + b) and the unshifted pointer width.
pub fn shifted_gaussian_approx(params: &TruncationParams, expectation: f64) -> Result<ReadoutDistribution, StatsError> {
    if !(-1.0..=1.0).contains(&expectation) {
        return Err(invalid("expectation", format!("must lie in [-1,1], got {expectation}")));
    }
    ReadoutDistribution::single(params.lambda * (expectation + params.b), params.pointer_width)
}

/// Standard normal quantile of an upper-tail probability q in (0,1).
fn upper_tail_inv(q: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * q)
}

/// Uniform draw on the open interval (0, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Draws from N(mean, width^2) restricted to x >= r_c by inverse CDF,
/// working with upper-tail probabilities so deep cutoffs keep their digits.
fn sample_truncated_normal<R: Rng + ?Sized>(mean: f64, width: f64, r_c: f64, rng: &mut R) -> f64 {
    let a = (r_c - mean) / width;
    let q = upper_tail(a) * open_unit(rng);
    let z = upper_tail_inv(q.max(f64::MIN_POSITIVE));
    (mean + width * z.max(a)).max(r_c)
}

/// One draw from the mixture restricted to x >= r_c.
pub fn sample_truncated<R: Rng + ?Sized>(dist: &ReadoutDistribution, r_c: f64, rng: &mut R) -> Result<f64, StatsError> {
    let comps = dist.components();
    let masses: Vec<f64> = comps
        .iter()
        .map(|&(w, m)| w * upper_tail((r_c - m) / dist.width))
        .collect();
    let total: f64 = masses.iter().sum();
    if !(total >= MIN_RETAINED_MASS) {
        return Err(StatsError::DegenerateTruncation { mass: total });
    }
    let pick = open_unit(rng) * total;
    let idx = if pick < masses[0] || masses[1] == 0.0 { 0 } else { 1 };
    Ok(sample_truncated_normal(comps[idx].1, dist.width, r_c, rng))
}

/// Draws from the untruncated mixture.
pub fn sample_mixture<R: Rng + ?Sized>(dist: &ReadoutDistribution, rng: &mut R) -> f64 {
    sample_truncated(dist, f64::NEG_INFINITY, rng).expect("untruncated mixture has unit mass")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ks2Result {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Survival function of the Kolmogorov distribution, P(K > t).
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.0 {
        // theta-function form converges fast for small t
        let mut s = 0.0;
        for k in 1..=100 {
            let kk = (2 * k - 1) as f64;
            let term = (-kk * kk * PI * PI / (8.0 * t * t)).exp();
            s += term;
            if term < 1e-10 * s.max(1e-300) {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / t * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * t * t).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-10 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

pub fn ks2_test(a: &[f64], b: &[f64]) -> Result<Ks2Result, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(invalid("sample", "contains NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    Ok(Ks2Result { statistic: d, p_value: kolmogorov_sf(ne.sqrt() * d), n1, n2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_enumerated_ks_statistic() {
        let r = ks2_test(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((r.statistic - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for t in [0.95, 1.0, 1.05] {
            let mut s = 0.0;
            for k in 1..200 {
                let kf = k as f64;
                s += if k % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * kf * kf * t * t).exp();
            }
            assert!((kolmogorov_sf(t) - 2.0 * s).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_at_center() {
        let s = mean_shift_raw(0.3, 0.3, 0.5).unwrap();
        assert!((s - 0.5 * (2.0 / PI).sqrt()).abs() < 1e-15);
    }
}
