mod common;

use common::*;
use pps_sse::gaussian::{EntropyConvention, GaussianState};
use pps_sse::trajectory::{
    assemble_generator, assemble_generator_dense, exponent_coefficients, pairwise_sum, run_ensemble, run_trajectory,
    run_trajectory_with, step, Estimate, NoiseDraw, NoiseStream, TrajectoryConfig, TrajectoryError,
};

fn small(l: usize) -> TrajectoryConfig {
    TrajectoryConfig {
        l,
        j2: 0.3,
        gamma: 0.8,
        alpha: 1.2,
        b_gamma: 0.5,
        b_alpha: 0.7,
        dt: 0.05,
        t_burn: Some(1.0),
        t_sample: 2.0,
        sample_interval: 0.5,
        n_traj: 4,
        seed: 9,
        tee: l % 4 == 0,
        ..TrajectoryConfig::default()
    }
}

#[test]
fn matches_dense_fock_integrator_with_shared_noise() {
    let cfg = small(4);
    let fock = Fock::new(4);
    let ops = (fock.onsite(), fock.bonds());
    let noise = NoiseStream::new(cfg.seed, 0);
    let mut g = GaussianState::vacuum(4).unwrap();
    let mut v = fock.vacuum();
    let mut worst: f64 = 0.0;
    for s in 0..100 {
        let draw = noise.draw(&cfg, s);
        g = step(&g, &cfg, &draw).unwrap();
        v = fock_sse_step(&fock, &ops, &cfg, &draw, &v);
        let dense = von_neumann_bits(&reduced_density(&v, 4, 2));
        worst = worst.max((dense - g.half_cut_entropy(EntropyConvention::Physical).unwrap()).abs());
        for (j, o) in ops.0.iter().enumerate() {
            assert!((g.onsite_parity()[j] - expectation(o, &v)).abs() < 1e-6);
        }
    }
    assert!(worst < 1e-5, "max entropy deviation {worst:e}");
}

#[test]
fn generator_matches_dense_form_and_exponents() {
    let cfg = small(6);
    let g = GaussianState::vacuum(6).unwrap();
    let draw = NoiseStream::new(1, 2).draw(&cfg, 3);
    let sparse = assemble_generator(&g, &cfg, &draw).to_dense();
    let dense = assemble_generator_dense(&g, &cfg, &draw);
    assert!((&sparse - &dense).norm() < 1e-15);
    let (on, bd) = exponent_coefficients(&cfg, &g.onsite_parity(), &g.bond_parity(), &draw);
    assert_eq!((on.len(), bd.len()), (6, 5));
    // vacuum: <Gamma_j> = 1, <A_j> = 0
    let expect = draw.dw_gamma[0] + 2.0 * cfg.gamma * cfg.dt + cfg.b_gamma * cfg.dt;
    assert!((on[0].re - expect).abs() < 1e-15);
    assert!((on[0].im + draw.dxi1[0]).abs() < 1e-15);
    assert!((bd[2].re - draw.dw_alpha[2] - cfg.b_alpha * cfg.dt).abs() < 1e-15);
}

#[test]
fn noise_is_addressed_by_step_and_channel() {
    let cfg = small(8);
    let a = NoiseStream::new(3, 1);
    let b = NoiseStream::new(3, 1);
    assert_eq!(a.draw(&cfg, 17), b.draw(&cfg, 17));
    assert_ne!(a.draw(&cfg, 17), a.draw(&cfg, 18));
    assert_ne!(a.normals(5, 0, 4), a.normals(5, 1, 4));
    assert_ne!(NoiseStream::new(3, 2).normals(0, 0, 4), a.normals(0, 0, 4));
    let zero = TrajectoryConfig { j2: 0.0, ..cfg };
    assert!(a.draw(&zero, 0).dxi1.iter().all(|&x| x == 0.0));
    // empirical variance of the measurement channel
    let n = 4000;
    let xs: Vec<f64> = (0..n).flat_map(|s| a.draw(&cfg, s).dw_gamma).collect();
    let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    assert!((var / (cfg.gamma * cfg.dt) - 1.0).abs() < 0.03, "variance ratio {}", var / (cfg.gamma * cfg.dt));
}

#[test]
fn trajectories_are_deterministic() {
    let cfg = small(8);
    assert_eq!(run_trajectory(&cfg, 2).unwrap(), run_trajectory(&cfg, 2).unwrap());
    assert_ne!(run_trajectory(&cfg, 2).unwrap(), run_trajectory(&cfg, 3).unwrap());
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| run_ensemble(&cfg).unwrap());
    let b = three.install(|| run_ensemble(&cfg).unwrap());
    assert_eq!(a, b);
}

#[test]
fn snapshots_follow_burn_in_and_stride() {
    let cfg = small(8);
    let snaps = run_trajectory(&cfg, 0).unwrap();
    assert_eq!(snaps.len() as u64, cfg.n_samples());
    assert_eq!(snaps.len(), 4);
    let times: Vec<f64> = snaps.iter().map(|s| s.time).collect();
    for (k, t) in times.iter().enumerate() {
        assert!((t - (1.0 + 0.5 * (k + 1) as f64)).abs() < 1e-9, "{times:?}");
    }
    let mut visited = 0;
    run_trajectory_with(&cfg, 0, |_, s| {
        visited += 1;
        assert!(s.unitarity_defect() < 1e-10);
    })
    .unwrap();
    assert_eq!(visited, 4);
    let auto = TrajectoryConfig { t_burn: None, gamma: 0.5, alpha: 2.0, j2: 0.0, ..cfg.clone() };
    assert!((auto.burn_in_time() - 40.0).abs() < 1e-12);
}

#[test]
fn states_stay_pure_and_orthonormal() {
    let cfg = TrajectoryConfig { t_burn: Some(0.0), t_sample: 50.0, sample_interval: 5.0, ..small(16) };
    run_trajectory_with(&cfg, 0, |_, s| {
        assert!(s.unitarity_defect() < 1e-9);
        assert!(s.full_entropy(EntropyConvention::Physical).unwrap() < 1e-6);
        let mut ev = s.reduced_green(&(0..8).collect::<Vec<_>>()).unwrap().spectrum().unwrap();
        ev.sort_by(f64::total_cmp);
        let n = ev.len();
        for i in 0..n {
            assert!((ev[i] + ev[n - 1 - i] - 1.0).abs() < 1e-8);
        }
    })
    .unwrap();
}

#[test]
fn strong_onsite_monitoring_freezes_the_state() {
    // quantum Zeno: on-site monitoring dominates the unitary noise
    let cfg = TrajectoryConfig {
        l: 8,
        j2: 0.05,
        gamma: 20.0,
        alpha: 0.0,
        dt: 0.005,
        t_burn: Some(0.0),
        t_sample: 5.0,
        sample_interval: 0.5,
        n_traj: 4,
        tee: false,
        ..TrajectoryConfig::default()
    };
    let r = run_ensemble(&cfg).unwrap();
    assert!(r.s_half.steady.mean < 0.05, "S_half = {}", r.s_half.steady.mean);
    let weak = TrajectoryConfig { gamma: 0.2, dt: 0.05, ..cfg };
    assert!(run_ensemble(&weak).unwrap().s_half.steady.mean > 4.0 * r.s_half.steady.mean);
}

#[test]
fn bond_monitoring_reaches_the_topological_stabilizer() {
    // measurement-only at Delta = +1 (alpha only) and Delta = -1 (gamma only)
    let mut topo = TrajectoryConfig { l: 8, j2: 0.0, n_traj: 8, t_burn: Some(20.0), t_sample: 4.0, ..TrajectoryConfig::default() };
    topo.set_dimerized(1.0, 0.0, 1.0);
    let mut pairing = Pairing::vacuum(8);
    for j in 0..7 {
        pairing.measure_bond(j);
    }
    let r = run_ensemble(&topo).unwrap();
    let tee = r.tee.unwrap().steady.mean;
    assert!((tee - pairing.tee(8)).abs() < 0.05, "TEE = {tee}");
    let mut triv = topo.clone();
    triv.set_dimerized(1.0, 0.0, -1.0);
    let tee = run_ensemble(&triv).unwrap().tee.unwrap().steady.mean;
    assert!(tee.abs() < 0.05, "TEE = {tee}");
}

#[test]
fn single_trajectory_flags_zero_variance() {
    let cfg = TrajectoryConfig { n_traj: 1, ..small(8) };
    let r = run_ensemble(&cfg).unwrap();
    assert!(r.s_half.steady.zero_variance);
    let single = run_trajectory(&cfg, 0).unwrap();
    for (m, s) in r.s_half.mean.iter().zip(&single) {
        assert_eq!(*m, s.s_half);
    }
    let e = Estimate::from_samples(&[1.0, 3.0]);
    assert_eq!((e.mean, e.n), (2.0, 2));
    assert!((e.stderr - 1.0).abs() < 1e-15);
    assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = |c: TrajectoryConfig, field: &str| match c.validate() {
        Err(TrajectoryError::InvalidConfig { field: f, .. }) => assert_eq!(f, field),
        other => panic!("expected {field} error, got {other:?}"),
    };
    bad(TrajectoryConfig { l: 7, ..small(8) }, "L");
    bad(TrajectoryConfig { l: 10, tee: true, ..small(8) }, "L");
    bad(TrajectoryConfig { gamma: -1.0, ..small(8) }, "gamma");
    bad(TrajectoryConfig { dt: 0.0, ..small(8) }, "dt");
    bad(TrajectoryConfig { n_traj: 0, ..small(8) }, "n_traj");
    bad(TrajectoryConfig { blowup_bound: 0.5, ..small(8) }, "blowup_bound");
    assert!(TrajectoryConfig { l: 10, tee: false, ..small(8) }.validate().is_ok());
}

#[test]
fn blowup_is_reported_as_numerical() {
    let cfg = TrajectoryConfig { blowup_bound: 1.0 + 1e-12, b_gamma: 50.0, ..small(8) };
    let err = run_trajectory(&cfg, 0).unwrap_err();
    assert!(err.is_numerical(), "{err}");
    let draw = NoiseDraw::zeros(8);
    assert_eq!(draw.dxi2.len(), 7);
}

#[test]
fn dimerization_round_trip() {
    let mut cfg = TrajectoryConfig::default();
    cfg.set_dimerized(2.0, 3.0, 0.25);
    assert!((cfg.gamma - 1.5).abs() < 1e-15 && (cfg.alpha - 2.5).abs() < 1e-15);
    assert!((cfg.b_gamma - 2.25).abs() < 1e-15 && (cfg.b_alpha - 3.75).abs() < 1e-15);
    assert!((cfg.dimerization().unwrap() - 0.25).abs() < 1e-15);
}
