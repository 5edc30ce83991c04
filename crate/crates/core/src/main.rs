use clap::{Args, Parser, Subcommand};
use pps_sse::config::{sweep_point, ConfigError, RgGrid, RunConfig, Section};
use pps_sse::fss::{
    classify_delta_s, collapsed_coordinates, crossing_point, fit_collapse, DeltaSSeries, FssError, HalfCutRecord,
    ScalingDataset, ScalingRecord,
};
use pps_sse::gaussian::EntropyConvention;
use pps_sse::manifest::{versions, RunManifest};
use pps_sse::rg::{flow_decoupled, flow_dimerized, init_luttinger, sweep_phase_diagram, RgError, RgState};
use pps_sse::stats::{
    mixture_pdf, sample_mixture, sample_truncated, shifted_gaussian_approx, truncated_pdf, ks2_test,
    ReadoutDistribution, StatsError, TruncationParams,
};
use pps_sse::toy::{entropy_histogram, ToyError, ToyInitial, ToyMethod};
use pps_sse::trajectory::{run_ensemble, EnsembleResult, ObservableSeries, TrajectoryError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const OUT_DIR_ENV: &str = "PPS_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "pps-sse", version, about = "Partially post-selected monitored free fermions")]
struct Cli {
    /// TOML config with one section per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $PPS_OUT_DIR or ./out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Readout statistics: truncated vs shifted-Gaussian pdfs and their KS2 distance.
    Stats(StatsArgs),
    /// Two-qubit Kraus vs SSE entropy histograms.
    Toy(ToyArgs),
    /// One trajectory ensemble.
    Simulate(SimulateArgs),
    /// RG flow at one point or a phase-map sweep.
    Rgflow(RgflowArgs),
    /// Data collapse of a (L, alpha, S_TEE, stderr) table.
    Collapse(CollapseArgs),
    /// delta S log vs log^2 discriminator on a (L, S_half, stderr) table.
    Deltascaling(DeltaArgs),
    /// Ensembles over an (L, alpha) grid, written as scaling tables.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, conflicts_with = "r_c")]
    b: Option<f64>,
    #[arg(long = "r-c", allow_negative_numbers = true)]
    r_c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    expectation: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ToyArgs {
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_steps: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    n_trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// up_down, up_up or plus_plus.
    #[arg(long)]
    initial: Option<String>,
}

#[derive(Args, Debug, Default)]
struct TrajectoryOverrides {
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    j2: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    b_gamma: Option<f64>,
    #[arg(long)]
    b_alpha: Option<f64>,
    /// Mean rate r with gamma = r(1 - delta), alpha = r(1 + delta).
    #[arg(long, requires_all = ["drift", "delta"])]
    rate: Option<f64>,
    /// Mean drift with B_gamma = drift(1 - delta), B_alpha = drift(1 + delta).
    #[arg(long, requires_all = ["rate", "delta"])]
    drift: Option<f64>,
    #[arg(long, requires_all = ["rate", "drift"], allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_burn: Option<f64>,
    #[arg(long)]
    t_sample: Option<f64>,
    #[arg(long)]
    sample_interval: Option<f64>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tee: Option<bool>,
    /// physical or nambu_sum.
    #[arg(long)]
    entropy: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    traj: TrajectoryOverrides,
}

#[derive(Args, Debug)]
struct RgflowArgs {
    /// J^2 / B.
    #[arg(long)]
    j2: Option<f64>,
    /// gamma / B.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long = "B")]
    b: Option<f64>,
    /// Sweep the (J^2/B, Delta) grid of the config (or its default).
    #[arg(long)]
    sweep: bool,
}

#[derive(Args, Debug)]
struct CollapseArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    alpha_window: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    nu_window: Option<Vec<f64>>,
    #[arg(long)]
    crossing_half_width: Option<f64>,
}

#[derive(Args, Debug)]
struct DeltaArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    slope_floor: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated system sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Comma-separated cross-site rates alpha.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// PPS ratio b with B_gamma = b gamma and B_alpha = b alpha.
    #[arg(long)]
    b: Option<f64>,
    #[command(flatten)]
    traj: TrajectoryOverrides,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(format!("malformed table: {e}"))
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::InvalidParameter { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ToyError> for CliError {
    fn from(e: ToyError) -> Self {
        match e {
            ToyError::InvalidConfig { .. } => CliError::Validation(e.to_string()),
            ToyError::Stats(s) => s.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<RgError> for CliError {
    fn from(e: RgError) -> Self {
        match e {
            RgError::InvalidParameter { .. } | RgError::Domain { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FssError> for CliError {
    fn from(e: FssError) -> Self {
        match e {
            FssError::TooFewPoints { .. } | FssError::InvalidData(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(flag: &str, value: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| CliError::Validation(format!("--{flag}: unknown value `{value}`")))
}

fn apply_trajectory(cfg: &mut pps_sse::trajectory::TrajectoryConfig, o: &TrajectoryOverrides) -> Result<(), CliError> {
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = o.$f { cfg.$f = v; } )* };
    }
    set!(l, j2, gamma, alpha, b_gamma, b_alpha, dt, t_sample, sample_interval, n_traj, seed, tee);
    if let Some(t) = o.t_burn {
        cfg.t_burn = Some(t);
    }
    if let (Some(r), Some(d), Some(delta)) = (o.rate, o.drift, o.delta) {
        cfg.set_dimerized(r, d, delta);
    }
    if let Some(e) = &o.entropy {
        cfg.entropy = parse_enum::<EntropyConvention>("entropy", e)?;
    }
    Ok(())
}

/// Collects written files for the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Outputs { dir, files: Vec::new() })
    }

    fn csv<R: Serialize>(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)?;
        std::fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn read_table<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}

fn run_stats(cfg: &RunConfig, out: &mut Outputs) -> Result<u64, CliError> {
    let s = &cfg.stats;
    let params = match (s.b, s.r_c) {
        (Some(b), _) => TruncationParams::from_b(s.gamma, s.dt, b, s.expectation)?,
        (None, Some(r)) => TruncationParams::from_rc(s.gamma, s.dt, r, s.expectation)?,
        (None, None) => unreachable!("validated"),
    };
    let dist = ReadoutDistribution::from_expectation(params.lambda, s.expectation, params.pointer_width)?;
    let shifted = shifted_gaussian_approx(&params, s.expectation)?;
    let w = params.pointer_width;
    let lo = (-params.lambda - 6.0 * w).min(params.r_c.max(-params.lambda - 6.0 * w));
    let hi = params.lambda * (1.0 + params.b) + 6.0 * w;
    let n = s.grid_points;
    let rows = (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            Ok((x, truncated_pdf(&dist, params.r_c, x)?, mixture_pdf(&shifted, x)))
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    out.csv("pdf.csv", &["x", "pdf_truncated", "pdf_shifted"], rows)?;

    let mut rng_t = ChaCha8Rng::seed_from_u64(s.seed);
    rng_t.set_stream(0);
    let mut rng_s = ChaCha8Rng::seed_from_u64(s.seed);
    rng_s.set_stream(1);
    let a = (0..s.samples).map(|_| sample_truncated(&dist, params.r_c, &mut rng_t)).collect::<Result<Vec<_>, _>>()?;
    let b: Vec<f64> = (0..s.samples).map(|_| sample_mixture(&shifted, &mut rng_s)).collect();
    let ks = ks2_test(&a, &b)?;
    #[derive(Serialize)]
    struct Record {
        #[serde(rename = "D")]
        d: f64,
        p_value: f64,
        n1: usize,
        n2: usize,
        seed: u64,
        params: TruncationParams,
    }
    out.json("ks2.json", &Record { d: ks.statistic, p_value: ks.p_value, n1: ks.n1, n2: ks.n2, seed: s.seed, params })?;
    Ok(s.seed)
}

fn run_toy(cfg: &RunConfig, out: &mut Outputs) -> Result<u64, CliError> {
    let t = &cfg.toy;
    let kraus = entropy_histogram(t, ToyMethod::Kraus)?;
    let sse = entropy_histogram(t, ToyMethod::Sse)?;
    let rows = kraus.iter().map(|&e| ("kraus", e)).chain(sse.iter().map(|&e| ("sse", e)));
    out.csv("toy_entropy.csv", &["method", "entropy"], rows)?;
    let ks = ks2_test(&kraus, &sse)?;
    #[derive(Serialize)]
    struct Verdict {
        #[serde(rename = "D")]
        d: f64,
        p_value: f64,
        n1: usize,
        n2: usize,
        seed: u64,
        same_distribution_at_5pct: bool,
    }
    out.json(
        "toy_ks2.json",
        &Verdict { d: ks.statistic, p_value: ks.p_value, n1: ks.n1, n2: ks.n2, seed: t.seed, same_distribution_at_5pct: ks.p_value > 0.05 },
    )?;
    Ok(t.seed)
}

fn series_rows<'a>(times: &'a [f64], s: &'a ObservableSeries, n: usize) -> impl Iterator<Item = (f64, f64, f64, usize)> + 'a {
    times.iter().zip(&s.mean).zip(&s.stderr).map(move |((&t, &m), &e)| (t, m, e, n))
}

#[derive(Serialize)]
struct SteadyRow {
    #[serde(rename = "L")]
    l: usize,
    alpha: f64,
    gamma: f64,
    #[serde(rename = "J2")]
    j2: f64,
    #[serde(rename = "B_gamma")]
    b_gamma: f64,
    #[serde(rename = "B_alpha")]
    b_alpha: f64,
    #[serde(rename = "S_TEE")]
    s_tee: f64,
    stderr: f64,
    #[serde(rename = "S_half")]
    s_half: f64,
    #[serde(rename = "S_half_stderr")]
    s_half_stderr: f64,
    n_traj: usize,
}

fn steady_row(c: &pps_sse::trajectory::TrajectoryConfig, r: &EnsembleResult) -> SteadyRow {
    let (s_tee, stderr) = r.tee.as_ref().map_or((f64::NAN, f64::NAN), |t| (t.steady.mean, t.steady.stderr));
    SteadyRow {
        l: c.l,
        alpha: c.alpha,
        gamma: c.gamma,
        j2: c.j2,
        b_gamma: c.b_gamma,
        b_alpha: c.b_alpha,
        s_tee,
        stderr,
        s_half: r.s_half.steady.mean,
        s_half_stderr: r.s_half.steady.stderr,
        n_traj: r.n_traj,
    }
}

const SERIES_HEADER: [&str; 4] = ["time", "mean", "stderr", "n_traj"];

fn run_simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<u64, CliError> {
    let c = &cfg.simulate;
    let r = run_ensemble(c)?;
    out.csv("s_half.csv", &SERIES_HEADER, series_rows(&r.times, &r.s_half, r.n_traj))?;
    out.csv("s_full.csv", &SERIES_HEADER, series_rows(&r.times, &r.s_full, r.n_traj))?;
    if let Some(t) = &r.tee {
        out.csv("tee.csv", &SERIES_HEADER, series_rows(&r.times, t, r.n_traj))?;
    }
    out.csv(
        "steady.csv",
        &["L", "alpha", "gamma", "J2", "B_gamma", "B_alpha", "S_TEE", "stderr", "S_half", "S_half_stderr", "n_traj"],
        [steady_row(c, &r)],
    )?;
    Ok(c.seed)
}

fn run_sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<u64, CliError> {
    let s = &cfg.sweep;
    let mut rows = Vec::new();
    for &l in &s.l {
        for &a in &s.alpha {
            let point = sweep_point(&cfg.simulate, s.b, l, a);
            let r = run_ensemble(&point)?;
            eprintln!("sweep L={l} alpha={a}: S_half={:.4}", r.s_half.steady.mean);
            rows.push(steady_row(&point, &r));
        }
    }
    out.csv("scaling.csv", &["L", "alpha", "S_TEE", "stderr"], rows.iter().map(|r| (r.l, r.alpha, r.s_tee, r.stderr)))?;
    out.csv(
        "halfcut.csv",
        &["L", "alpha", "S_half", "stderr"],
        rows.iter().map(|r| (r.l, r.alpha, r.s_half, r.s_half_stderr)),
    )?;
    Ok(cfg.simulate.seed)
}

fn run_rgflow(cfg: &RunConfig, out: &mut Outputs) -> Result<u64, CliError> {
    let r = &cfg.rgflow;
    if let Some(g) = &r.sweep {
        let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        };
        let map = sweep_phase_diagram(
            r.gamma,
            &lin(g.j2_min, g.j2_max, g.j2_points),
            &lin(g.delta_min, g.delta_max, g.delta_points),
            g.resolution,
            &r.controls,
        )?;
        out.csv(
            "phase_map.csv",
            &["J2", "delta", "verdict", "critical_side"],
            map.cells.iter().map(|c| (c.j2, c.delta, verdict_name(&c.classification), c.critical_side)),
        )?;
        out.csv(
            "boundary.csv",
            &["delta", "J2_c", "flips"],
            map.rows.iter().map(|row| (row.delta, row.j2_c.map_or(String::new(), |v| v.to_string()), row.flips)),
        )?;
        out.json("phase_map.json", &map)?;
        return Ok(0);
    }
    let init = init_luttinger(r.j2 * r.b, r.gamma * r.b, r.b, r.delta)?;
    let state = RgState::from(&init);
    let trace = if r.delta == 0.0 { flow_decoupled(&state, &r.controls)? } else { flow_dimerized(&state, &r.controls)? };
    out.csv(
        "trace.csv",
        &["ell", "K_rho", "K_sigma", "g2", "y_rho", "y_sigma"],
        trace.states.iter().map(|s| (s.ell, s.k_rho, s.k_sigma, s.g2, s.y_rho(), s.y_sigma())),
    )?;
    #[derive(Serialize)]
    struct Verdict<'a> {
        init: &'a pps_sse::rg::LuttingerInit,
        verdict: &'a pps_sse::rg::PhaseVerdict,
        critical_side: bool,
    }
    let critical_side = trace.verdict.critical_side(r.controls.beta);
    out.json("verdict.json", &Verdict { init: &init, verdict: &trace.verdict, critical_side })?;
    Ok(0)
}

fn verdict_name(c: &pps_sse::rg::Classification) -> String {
    serde_json::to_value(c).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn run_collapse(cfg: &RunConfig, out: &mut Outputs) -> Result<u64, CliError> {
    let c = &cfg.collapse;
    let records: Vec<ScalingRecord> = read_table(c.input.as_deref().expect("validated"))?;
    let data = ScalingDataset::new(records);
    data.validate()?;
    let (crossing, window) = match c.crossing_half_width {
        Some(h) => {
            let x = crossing_point(&data)?;
            let w = (x.alpha_crit - h, x.alpha_crit + h);
            (Some(x), w)
        }
        None => (crossing_point(&data).ok(), c.alpha_window),
    };
    let fit = fit_collapse(&data, window, c.nu_window, &c.controls)?;
    #[derive(Serialize)]
    struct Report {
        #[serde(flatten)]
        fit: pps_sse::fss::CollapseResult,
        alpha_window: (f64, f64),
        crossing: Option<pps_sse::fss::CrossingEstimate>,
    }
    out.json("collapse.json", &Report { fit, alpha_window: window, crossing })?;
    out.csv("collapsed.csv", &["x", "y", "L"], collapsed_coordinates(&data, fit.alpha_crit, fit.nu))?;
    Ok(0)
}

fn run_deltascaling(cfg: &RunConfig, out: &mut Outputs) -> Result<u64, CliError> {
    let d = &cfg.deltascaling;
    let table: Vec<HalfCutRecord> = read_table(d.input.as_deref().expect("validated"))?;
    let series = DeltaSSeries::from_half_cut(&table);
    let verdict = classify_delta_s(&series, d.slope_floor)?;
    #[derive(Serialize)]
    struct Report {
        #[serde(flatten)]
        verdict: pps_sse::fss::DeltaSVerdict,
        slope_floor: f64,
        series: DeltaSSeries,
    }
    out.json("deltascaling.json", &Report { verdict, slope_floor: d.slope_floor, series })?;
    Ok(0)
}

fn resolve(cli: &Cli) -> Result<(RunConfig, Section, &'static str), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let (section, name) = match &cli.command {
        Command::Stats(a) => {
            let s = &mut cfg.stats;
            if let Some(v) = a.gamma {
                s.gamma = v;
            }
            if let Some(v) = a.dt {
                s.dt = v;
            }
            if let Some(v) = a.b {
                s.b = Some(v);
                s.r_c = None;
            }
            if let Some(v) = a.r_c {
                s.r_c = Some(v);
                s.b = None;
            }
            if let Some(v) = a.expectation {
                s.expectation = v;
            }
            if let Some(v) = a.samples {
                s.samples = v;
            }
            if let Some(v) = a.seed {
                s.seed = v;
            }
            (Section::Stats, "stats")
        }
        Command::Toy(a) => {
            let t = &mut cfg.toy;
            if let Some(v) = a.b {
                t.b = v;
            }
            if let Some(v) = a.gamma {
                t.gamma = v;
            }
            if let Some(v) = a.dt {
                t.dt = v;
            }
            if a.n_steps.is_some() {
                t.n_steps = a.n_steps;
            }
            if a.horizon.is_some() {
                t.horizon = a.horizon;
            }
            if let Some(v) = a.n_trajectories {
                t.n_trajectories = v;
            }
            if let Some(v) = a.seed {
                t.seed = v;
            }
            if let Some(v) = &a.initial {
                t.initial = parse_enum::<ToyInitial>("initial", v)?;
            }
            (Section::Toy, "toy")
        }
        Command::Simulate(a) => {
            apply_trajectory(&mut cfg.simulate, &a.traj)?;
            (Section::Simulate, "simulate")
        }
        Command::Sweep(a) => {
            apply_trajectory(&mut cfg.simulate, &a.traj)?;
            if let Some(v) = &a.sizes {
                cfg.sweep.l = v.clone();
            }
            if let Some(v) = &a.alphas {
                cfg.sweep.alpha = v.clone();
            }
            if let Some(v) = a.b {
                cfg.sweep.b = v;
            }
            (Section::Sweep, "sweep")
        }
        Command::Rgflow(a) => {
            let r = &mut cfg.rgflow;
            if let Some(v) = a.j2 {
                r.j2 = v;
            }
            if let Some(v) = a.gamma {
                r.gamma = v;
            }
            if let Some(v) = a.delta {
                r.delta = v;
            }
            if let Some(v) = a.b {
                r.b = v;
            }
            if a.sweep && r.sweep.is_none() {
                r.sweep = Some(RgGrid::default());
            }
            (Section::Rgflow, "rgflow")
        }
        Command::Collapse(a) => {
            let c = &mut cfg.collapse;
            if a.input.is_some() {
                c.input = a.input.clone();
            }
            if let Some(w) = &a.alpha_window {
                c.alpha_window = (w[0], w[1]);
            }
            if let Some(w) = &a.nu_window {
                c.nu_window = (w[0], w[1]);
            }
            if a.crossing_half_width.is_some() {
                c.crossing_half_width = a.crossing_half_width;
            }
            (Section::Collapse, "collapse")
        }
        Command::Deltascaling(a) => {
            let d = &mut cfg.deltascaling;
            if a.input.is_some() {
                d.input = a.input.clone();
            }
            if let Some(v) = a.slope_floor {
                d.slope_floor = v;
            }
            (Section::DeltaScaling, "deltascaling")
        }
    };
    cfg.validate(section)?;
    Ok((cfg, section, name))
}

fn section_json(cfg: &RunConfig, section: Section) -> Result<serde_json::Value, CliError> {
    let v = match section {
        Section::Stats => serde_json::to_value(&cfg.stats)?,
        Section::Toy => serde_json::to_value(&cfg.toy)?,
        Section::Simulate => serde_json::to_value(&cfg.simulate)?,
        Section::Rgflow => serde_json::to_value(&cfg.rgflow)?,
        Section::Collapse => serde_json::to_value(&cfg.collapse)?,
        Section::DeltaScaling => serde_json::to_value(&cfg.deltascaling)?,
        Section::Sweep => serde_json::json!({ "sweep": cfg.sweep, "simulate": cfg.simulate }),
    };
    Ok(v)
}

fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let (cfg, section, name) = resolve(cli)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let mut out = Outputs::new(dir)?;
    let seed = pool.install(|| match section {
        Section::Stats => run_stats(&cfg, &mut out),
        Section::Toy => run_toy(&cfg, &mut out),
        Section::Simulate => run_simulate(&cfg, &mut out),
        Section::Sweep => run_sweep(&cfg, &mut out),
        Section::Rgflow => run_rgflow(&cfg, &mut out),
        Section::Collapse => run_collapse(&cfg, &mut out),
        Section::DeltaScaling => run_deltascaling(&cfg, &mut out),
    })?;
    let manifest = RunManifest {
        subcommand: name.to_string(),
        config: section_json(&cfg, section)?,
        seed,
        versions: versions(),
        started: started.to_rfc3339(),
        finished: chrono::Utc::now().to_rfc3339(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        threads: pool.current_num_threads(),
        outputs: RunManifest::digest_outputs(&out.dir, &out.files)?,
    };
    Ok(manifest.write(&out.dir)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pps-sse: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
