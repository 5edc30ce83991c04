use pps_sse::manifest::RunManifest;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pps-sse"));
    c.env_remove("PPS_OUT_DIR");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_SIM: [&str; 10] = ["--t-burn", "0.5", "--t-sample", "1", "--sample-interval", "0.5", "--n-traj", "2", "--dt", "0.05"];

#[test]
fn stats_with_empty_config_uses_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.toml");
    std::fs::write(&cfg, "").unwrap();
    let out = tmp.path().join("o");
    let o = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).args(["stats", "--samples", "500"]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.subcommand, "stats");
    assert_eq!(m.config["samples"], 500);
    assert_eq!(m.config["gamma"], 1.0);
    let files: Vec<&str> = m.outputs.iter().map(|d| d.file.as_str()).collect();
    assert_eq!(files, ["pdf.csv", "ks2.json"]);
    assert!(m.stale_outputs(&out).is_empty());
    let ks: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("ks2.json")).unwrap()).unwrap();
    assert_eq!(ks["n1"], 500);
    let pdf = std::fs::read_to_string(out.join("pdf.csv")).unwrap();
    assert_eq!(pdf.lines().next().unwrap(), "x,pdf_truncated,pdf_shifted");
    assert_eq!(pdf.lines().count(), 402);
}

#[test]
fn reruns_produce_identical_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = ["stats", "--samples", "300", "--seed", "7"];
    assert_eq!(code(&run_in(&a, &args)), 0);
    assert_eq!(code(&bin().args(["--threads", "2"]).arg("--out").arg(&b).args(args).output().unwrap()), 0);
    let (ma, mb) = (RunManifest::read(&a).unwrap(), RunManifest::read(&b).unwrap());
    assert_eq!(ma.outputs, mb.outputs);
    assert_eq!(mb.threads, 2);
    std::fs::write(a.join("ks2.json"), "{}").unwrap();
    assert_eq!(ma.stale_outputs(&a), ["ks2.json"]);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("env-out");
    let o = bin().env("PPS_OUT_DIR", &dir).args(["stats", "--samples", "100"]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.join("manifest.json").exists());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), dir.join("manifest.json").display().to_string());
}

#[test]
fn validation_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["simulate", "--L", "10", "--tee", "true"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("simulate.L"), "{}", stderr(&o));
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[simulate]\nbogus = 1\n").unwrap();
    let o = bin().arg("--config").arg(&cfg).arg("--out").arg(tmp.path()).arg("simulate").output().unwrap();
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run_in(tmp.path(), &["stats", "--dt", "0"])), 2);
    assert_eq!(code(&run_in(tmp.path(), &["toy", "--initial", "sideways"])), 2);
    assert_eq!(code(&run_in(tmp.path(), &["rgflow", "--j2", "0.5"])), 2);
    assert_eq!(code(&run_in(tmp.path(), &["collapse"])), 2);
    // clap usage errors share the validation code
    assert_eq!(code(&run_in(tmp.path(), &["stats", "--b", "1", "--r-c", "0"])), 2);
}

#[test]
fn io_errors_exit_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    let o = bin().arg("--config").arg(&missing).arg("--out").arg(tmp.path()).arg("stats").output().unwrap();
    assert_eq!(code(&o), 4);
    let o = run_in(tmp.path(), &["deltascaling", "--input", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    let file = tmp.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    assert_eq!(code(&run_in(&file.join("sub"), &["stats", "--samples", "10"])), 4);
}

#[test]
fn numerical_failures_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("flat.csv");
    let mut text = String::from("L,alpha,S_TEE,stderr\n");
    for l in [8, 12, 16] {
        for a in [0.8, 0.9, 1.0, 1.1, 1.2] {
            text += &format!("{l},{a},{},0.01\n", l as f64 * 0.1 + a);
        }
    }
    std::fs::write(&table, text).unwrap();
    let o = run_in(tmp.path(), &["collapse", "--input", table.to_str().unwrap(), "--crossing-half-width", "0.1"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn simulate_overrides_reach_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--L", "8", "--tee", "true", "--dt", "0.025"];
    args.extend(&SMALL_SIM[..8]);
    let o = run_in(tmp.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = RunManifest::read(tmp.path()).unwrap();
    assert_eq!(m.config["dt"], 0.025);
    assert_eq!(m.config["L"], 8);
    let files: Vec<&str> = m.outputs.iter().map(|d| d.file.as_str()).collect();
    assert_eq!(files, ["s_half.csv", "s_full.csv", "tee.csv", "steady.csv"]);
    let steady = std::fs::read_to_string(tmp.path().join("steady.csv")).unwrap();
    assert!(steady.starts_with("L,alpha,gamma,J2,B_gamma,B_alpha,S_TEE,stderr,S_half,S_half_stderr,n_traj\n8,"));
    let dimer = run_in(&tmp.path().join("d"), &["simulate", "--L", "8", "--rate", "1", "--drift", "0.5", "--delta", "-0.5", "--n-traj", "1", "--t-burn", "0", "--t-sample", "0.5", "--sample-interval", "0.5"]);
    assert_eq!(code(&dimer), 0, "{}", stderr(&dimer));
    let m = RunManifest::read(&tmp.path().join("d")).unwrap();
    assert_eq!((m.config["gamma"].as_f64(), m.config["alpha"].as_f64()), (Some(1.5), Some(0.5)));
}

#[test]
fn rgflow_point_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["rgflow", "--j2", "0.2", "--gamma", "0.2", "--delta", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let trace = std::fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    let mut rows = trace.lines().skip(1).map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>());
    let first = rows.next().unwrap();
    for r in rows {
        assert_eq!((r[1], r[2]), (first[1], first[2]));
    }
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"]["classification"], "decoupled");

    let sweep = tmp.path().join("s");
    let cfg = tmp.path().join("grid.toml");
    std::fs::write(&cfg, "[rgflow]\ngamma = 0.32\n[rgflow.sweep]\nj2_min = 0.0\nj2_max = 0.36\nj2_points = 7\ndelta_min = 0.0\ndelta_max = 0.07\ndelta_points = 2\nresolution = 0.01\n").unwrap();
    let o = bin().arg("--config").arg(&cfg).arg("--out").arg(&sweep).arg("rgflow").output().unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let map = std::fs::read_to_string(sweep.join("phase_map.csv")).unwrap();
    assert_eq!(map.lines().count(), 15);
    let boundary = std::fs::read_to_string(sweep.join("boundary.csv")).unwrap();
    assert!(boundary.starts_with("delta,J2_c,flips\n0.0,,"), "{boundary}");
}

#[test]
fn sweep_feeds_collapse() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = tmp.path().join("sweep");
    let mut args = vec!["sweep", "--sizes", "8,12,16", "--alphas", "0.6,0.8,1.0,1.2,1.4", "--b", "0", "--gamma", "1", "--j2", "0"];
    args.extend(&SMALL_SIM);
    let o = run_in(&sweep, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let scaling = std::fs::read_to_string(sweep.join("scaling.csv")).unwrap();
    assert_eq!(scaling.lines().count(), 16);
    assert_eq!(scaling.lines().next().unwrap(), "L,alpha,S_TEE,stderr");
    let half = std::fs::read_to_string(sweep.join("halfcut.csv")).unwrap();
    assert_eq!(half.lines().count(), 16);
    let m = RunManifest::read(&sweep).unwrap();
    assert_eq!(m.config["sweep"]["L"], serde_json::json!([8, 12, 16]));

    // short noisy runs may not collapse; the pipeline must still end in a
    // clean verdict
    let fit = tmp.path().join("fit");
    let o = run_in(&fit, &["collapse", "--input", sweep.join("scaling.csv").to_str().unwrap(), "--alpha-window", "0.6", "1.4"]);
    match code(&o) {
        0 => {
            let c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fit.join("collapse.json")).unwrap()).unwrap();
            assert!(c["nu"].as_f64().unwrap() > 0.0);
            assert_eq!(std::fs::read_to_string(fit.join("collapsed.csv")).unwrap().lines().count(), 16);
        }
        3 => assert!(stderr(&o).contains("numerical"), "{}", stderr(&o)),
        c => panic!("collapse exit {c}: {}", stderr(&o)),
    }
}

#[test]
fn deltascaling_reads_half_cut_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("half.csv");
    let mut text = String::from("L,S_half,stderr\n");
    for l in [8usize, 16, 32, 64] {
        let x = (l as f64).log2();
        text += &format!("{l},{},0.01\n", 0.1 * x * x);
    }
    std::fs::write(&table, text).unwrap();
    let o = run_in(tmp.path(), &["deltascaling", "--input", table.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("deltascaling.json")).unwrap()).unwrap();
    assert_eq!(v["classification"], "log_squared");
    assert_eq!(v["series"]["records"].as_array().unwrap().len(), 3);
}

#[test]
fn toy_writes_both_histograms() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), &["toy", "--n-trajectories", "20", "--horizon", "1", "--dt", "0.02"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let h = std::fs::read_to_string(tmp.path().join("toy_entropy.csv")).unwrap();
    assert_eq!(h.lines().filter(|l| l.starts_with("kraus,")).count(), 20);
    assert_eq!(h.lines().filter(|l| l.starts_with("sse,")).count(), 20);
    assert!(tmp.path().join("toy_ks2.json").exists());
}
