//! C ABI over the pps-sse toolkit.
//!
//! Every function returns a `PpsStatus`; results go through out-pointers.
//! Objects are opaque handles released with their `*_free` function.
//! The message of the most recent failure on the calling thread is
//! available through `pps_last_error`.

use pps_sse::fss::{fit_collapse, CollapseControls, FssError, ScalingDataset, ScalingRecord};
use pps_sse::gaussian::{EntropyConvention, GaussianError, GaussianState};
use pps_sse::rg::{flow_point, Classification, RgControls, RgError};
use pps_sse::stats::{ks2_test, solve_rc_from_b, StatsError, SSE_POINTER_WIDTH};
use pps_sse::trajectory::{run_ensemble, EnsembleResult, TrajectoryConfig, TrajectoryError};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpsObservable {
    HalfCut = 0,
    Tee = 1,
    FullSystem = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpsRgVerdict {
    RelevantG2 = 0,
    IrrelevantG2 = 1,
    Decoupled = 2,
    Undetermined = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpsCollapseResult {
    pub alpha_crit: f64,
    pub nu: f64,
    pub nu_err_lo: f64,
    pub nu_err_hi: f64,
    pub epsilon_min: f64,
}

/// Opaque Gaussian state.
pub struct PpsState(GaussianState);

/// Opaque trajectory configuration.
pub struct PpsConfig(TrajectoryConfig);

/// Opaque ensemble result.
pub struct PpsEnsemble(EnsembleResult);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(PpsStatus, String);

impl From<GaussianError> for Failure {
    fn from(e: GaussianError) -> Self {
        let status = match e {
            GaussianError::BadLength { .. }
            | GaussianError::IndexOutOfRange { .. }
            | GaussianError::DuplicateSite(_)
            | GaussianError::RenyiOrder(_) => PpsStatus::InvalidArgument,
            _ => PpsStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

impl From<TrajectoryError> for Failure {
    fn from(e: TrajectoryError) -> Self {
        let status = if e.is_numerical() { PpsStatus::Numerical } else { PpsStatus::InvalidArgument };
        Failure(status, e.to_string())
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        let status = match e {
            StatsError::InvalidParameter { .. } | StatsError::EmptySample => PpsStatus::InvalidArgument,
            _ => PpsStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

impl From<RgError> for Failure {
    fn from(e: RgError) -> Self {
        let status = match e {
            RgError::InvalidParameter { .. } | RgError::Domain { .. } => PpsStatus::InvalidArgument,
            _ => PpsStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

impl From<FssError> for Failure {
    fn from(e: FssError) -> Self {
        let status = match e {
            FssError::TooFewPoints { .. } | FssError::InvalidData(_) => PpsStatus::InvalidArgument,
            _ => PpsStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PpsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records failures and converts panics into `PpsStatus::Panic`.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> PpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PpsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            PpsStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated).
/// `len` receives the required size including the terminator.
///
/// # Safety
/// `buf` must point to `cap` writable bytes or be null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn pps_last_error(buf: *mut c_char, cap: usize, len: *mut usize) -> PpsStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let need = msg.len() + 1;
    if let Some(l) = len.as_mut() {
        *l = need;
    }
    if cap < need {
        return PpsStatus::BufferTooSmall;
    }
    if buf.is_null() {
        return PpsStatus::NullPointer;
    }
    std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, msg.len());
    *buf.add(msg.len()) = 0;
    PpsStatus::Ok
}

/// Crate version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Fermionic vacuum of `l` sites.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pps_state_vacuum(l: usize, out: *mut *mut PpsState) -> PpsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(PpsState(GaussianState::vacuum(l)?)));
        Ok(())
    })
}

/// # Safety
/// `state` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pps_state_free(state: *mut PpsState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_state_len(state: *const PpsState, out: *mut usize) -> PpsStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(state, "state")?.0.len();
        Ok(())
    })
}

/// Von Neumann entropy (bits) of the sites `sites[0..n]`.
///
/// # Safety
/// `sites` must point to `n` entries; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_state_entropy(
    state: *const PpsState,
    sites: *const usize,
    n: usize,
    out: *mut f64,
) -> PpsStatus {
    guard(|| {
        let s = in_ref(state, "state")?;
        let idx: &[usize] = if n == 0 {
            &[]
        } else if sites.is_null() {
            return Err(null("sites"));
        } else {
            std::slice::from_raw_parts(sites, n)
        };
        *out_ref(out, "out")? = s.0.entropy(idx, EntropyConvention::Physical)?;
        Ok(())
    })
}

/// Topological entanglement entropy (bits) on the four quarters.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_state_tee(state: *const PpsState, out: *mut f64) -> PpsStatus {
    guard(|| {
        *out_ref(out, "out")? = in_ref(state, "state")?.0.tee(EntropyConvention::Physical)?;
        Ok(())
    })
}

/// Default trajectory configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pps_config_default(out: *mut *mut PpsConfig) -> PpsStatus {
    guard(|| {
        *out_ref(out, "out")? = Box::into_raw(Box::new(PpsConfig(TrajectoryConfig::default())));
        Ok(())
    })
}

/// Configuration from TOML text with the trajectory fields at top level.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_config_from_toml(toml_text: *const c_char, out: *mut *mut PpsConfig) -> PpsStatus {
    guard(|| {
        if toml_text.is_null() {
            return Err(null("toml_text"));
        }
        let out = out_ref(out, "out")?;
        let text = CStr::from_ptr(toml_text)
            .to_str()
            .map_err(|e| Failure(PpsStatus::InvalidArgument, e.to_string()))?;
        let cfg: TrajectoryConfig =
            toml::from_str(text).map_err(|e| Failure(PpsStatus::InvalidArgument, e.to_string()))?;
        cfg.validate()?;
        *out = Box::into_raw(Box::new(PpsConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pps_config_free(cfg: *mut PpsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets size, trajectory count and seed.
///
/// # Safety
/// `cfg` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_config_set_run(cfg: *mut PpsConfig, l: usize, n_traj: usize, seed: u64) -> PpsStatus {
    guard(|| {
        let c = &mut out_ref(cfg, "cfg")?.0;
        c.l = l;
        c.n_traj = n_traj;
        c.seed = seed;
        Ok(())
    })
}

/// Sets the physical rates and drifts.
///
/// # Safety
/// `cfg` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_config_set_rates(
    cfg: *mut PpsConfig,
    j2: f64,
    gamma: f64,
    alpha: f64,
    b_gamma: f64,
    b_alpha: f64,
) -> PpsStatus {
    guard(|| {
        let c = &mut out_ref(cfg, "cfg")?.0;
        (c.j2, c.gamma, c.alpha, c.b_gamma, c.b_alpha) = (j2, gamma, alpha, b_gamma, b_alpha);
        Ok(())
    })
}

/// Sets dt, burn-in (negative = automatic), sampling horizon and interval.
///
/// # Safety
/// `cfg` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_config_set_times(
    cfg: *mut PpsConfig,
    dt: f64,
    t_burn: f64,
    t_sample: f64,
    sample_interval: f64,
) -> PpsStatus {
    guard(|| {
        let c = &mut out_ref(cfg, "cfg")?.0;
        c.dt = dt;
        c.t_burn = (t_burn >= 0.0).then_some(t_burn);
        c.t_sample = t_sample;
        c.sample_interval = sample_interval;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_config_set_tee(cfg: *mut PpsConfig, enabled: bool) -> PpsStatus {
    guard(|| {
        out_ref(cfg, "cfg")?.0.tee = enabled;
        Ok(())
    })
}

/// Runs the ensemble described by `cfg`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_run_ensemble(cfg: *const PpsConfig, out: *mut *mut PpsEnsemble) -> PpsStatus {
    guard(|| {
        let c = in_ref(cfg, "cfg")?;
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(PpsEnsemble(run_ensemble(&c.0)?)));
        Ok(())
    })
}

/// # Safety
/// `ens` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pps_ensemble_free(ens: *mut PpsEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Steady-state mean and standard error of one observable; `which` takes
/// a `PpsObservable` value.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_ensemble_steady(
    ens: *const PpsEnsemble,
    which: u32,
    mean: *mut f64,
    stderr: *mut f64,
) -> PpsStatus {
    guard(|| {
        let e = &in_ref(ens, "ens")?.0;
        let series = match which {
            w if w == PpsObservable::HalfCut as u32 => &e.s_half,
            w if w == PpsObservable::FullSystem as u32 => &e.s_full,
            w if w == PpsObservable::Tee as u32 => e
                .tee
                .as_ref()
                .ok_or_else(|| Failure(PpsStatus::InvalidArgument, "ensemble was run without TEE".into()))?,
            w => return Err(Failure(PpsStatus::InvalidArgument, format!("unknown observable {w}"))),
        };
        let (m, s) = (out_ref(mean, "mean")?, out_ref(stderr, "stderr")?);
        *m = series.steady.mean;
        *s = series.steady.stderr;
        Ok(())
    })
}

/// Cutoff r_c realizing PPS strength b at the reference expectation value.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_solve_rc_from_b(b: f64, dt: f64, gamma: f64, expectation: f64, out: *mut f64) -> PpsStatus {
    guard(|| {
        *out_ref(out, "out")? = solve_rc_from_b(b, dt, gamma, expectation, SSE_POINTER_WIDTH)?;
        Ok(())
    })
}

/// Two-sample Kolmogorov-Smirnov statistic and p-value.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` values.
#[no_mangle]
pub unsafe extern "C" fn pps_ks2(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    statistic: *mut f64,
    p_value: *mut f64,
) -> PpsStatus {
    guard(|| {
        let r = ks2_test(slice(a, na, "a")?, slice(b, nb, "b")?)?;
        *out_ref(statistic, "statistic")? = r.statistic;
        *out_ref(p_value, "p_value")? = r.p_value;
        Ok(())
    })
}

/// RG verdict at (J^2/B, gamma/B, Delta) with default controls.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_rg_flow_point(j2: f64, gamma: f64, delta: f64, out: *mut PpsRgVerdict) -> PpsStatus {
    guard(|| {
        let ctl = RgControls { record: false, ..RgControls::default() };
        let v = flow_point(j2, gamma, delta, &ctl)?.verdict;
        *out_ref(out, "out")? = match v.classification {
            Classification::RelevantG2 => PpsRgVerdict::RelevantG2,
            Classification::IrrelevantG2 => PpsRgVerdict::IrrelevantG2,
            Classification::Decoupled => PpsRgVerdict::Decoupled,
            Classification::Undetermined => PpsRgVerdict::Undetermined,
        };
        Ok(())
    })
}

/// Data-collapse fit of `n` records (sizes, couplings, S_TEE, stderr) over
/// the given windows with default grid controls.
///
/// # Safety
/// Array pointers must point to `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pps_fit_collapse(
    sizes: *const usize,
    alpha: *const f64,
    s_tee: *const f64,
    stderr: *const f64,
    n: usize,
    alpha_lo: f64,
    alpha_hi: f64,
    nu_lo: f64,
    nu_hi: f64,
    out: *mut PpsCollapseResult,
) -> PpsStatus {
    guard(|| {
        if n > 0 && sizes.is_null() {
            return Err(null("sizes"));
        }
        let ls: &[usize] = if n == 0 { &[] } else { std::slice::from_raw_parts(sizes, n) };
        let (a, s, e) = (slice(alpha, n, "alpha")?, slice(s_tee, n, "s_tee")?, slice(stderr, n, "stderr")?);
        let records = (0..n)
            .map(|i| ScalingRecord { l: ls[i], alpha: a[i], s_tee: s[i], stderr: e[i] })
            .collect();
        let r = fit_collapse(&ScalingDataset::new(records), (alpha_lo, alpha_hi), (nu_lo, nu_hi), &CollapseControls::default())?;
        *out_ref(out, "out")? = PpsCollapseResult {
            alpha_crit: r.alpha_crit,
            nu: r.nu,
            nu_err_lo: r.nu_err_lo,
            nu_err_hi: r.nu_err_hi,
            epsilon_min: r.epsilon_min,
        };
        Ok(())
    })
}
