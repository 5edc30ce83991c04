use pps_sse::rg::{
    angular_integral, angular_integral_with, critical_j2, flow_decoupled, flow_dimerized, flow_point, init_luttinger,
    sweep_phase_diagram, AngularKernel, Classification, RgControls, RgError, RgState, SectorFate,
};
use proptest::prelude::*;
use std::f64::consts::{PI, SQRT_2};

/// Periodic trapezoid rule on [-pi, pi]; spectrally accurate for smooth integrands.
fn trapezoid(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    (0..n).map(|i| f(-PI + i as f64 * h)).sum::<f64>() * h
}

#[test]
fn angular_integral_matches_trapezoid() {
    let (mu, k, beta) = (0.5, 1.0, SQRT_2);
    let p = -beta * beta * k / 4.0;
    let oracle = trapezoid(|t| (1.0 + mu * t.cos()).powf(p), 1_000_000);
    assert!((angular_integral(mu, k, beta).unwrap() - oracle).abs() < 1e-8);
    let oracle = trapezoid(|t| (1.0 + 1.7 * t.cos().powi(2)).powf(-0.8), 1_000_000);
    let got = angular_integral_with(AngularKernel::CosSquared, 1.7, 1.6, SQRT_2).unwrap();
    assert!((got - oracle).abs() < 1e-8);
}

#[test]
fn angular_integral_limits_and_domain() {
    assert_eq!(angular_integral(0.0, 3.0, SQRT_2).unwrap(), 2.0 * PI);
    assert_eq!(angular_integral(0.7, 0.0, SQRT_2).unwrap(), 2.0 * PI);
    assert!(matches!(angular_integral(1.0, 1.0, SQRT_2), Err(RgError::Domain { .. })));
    assert!(matches!(angular_integral_with(AngularKernel::CosSquared, -1.0, 1.0, SQRT_2), Err(RgError::Domain { .. })));
    assert!(angular_integral_with(AngularKernel::CosSquared, 3.0, 1.0, SQRT_2).is_ok());
}

#[test]
fn luttinger_initialization() {
    let i = init_luttinger(0.05, 0.1, 1.0, 0.0).unwrap();
    assert!((i.k_sigma - (4.0 / (4.0 - 3.2 / PI)).sqrt()).abs() < 1e-14);
    assert!((i.k_rho - (4.0 / (4.0 - 1.6 / PI)).sqrt()).abs() < 1e-14);
    assert_eq!(i.vf, 4.0);
    assert_eq!(i.g2, 0.0);
    assert!((i.g_sigma - 0.8).abs() < 1e-14 && (i.g_rho + 0.8).abs() < 1e-14);
    let d = init_luttinger(0.05, 0.1, 1.0, 0.2).unwrap();
    assert!((d.g2 - 16.0 * 0.2 * (PI - 0.1)).abs() < 1e-12);
    // velocities times K reproduce v_F
    assert!((d.u_rho * d.k_rho - d.vf).abs() < 1e-12 && (d.u_sigma * d.k_sigma - d.vf).abs() < 1e-12);
}

#[test]
fn bosonization_breakdown_at_pi_over_eight() {
    let edge = PI / 8.0;
    assert!(matches!(init_luttinger(edge, 0.1, 1.0, 0.1), Err(RgError::BosonizationBreakdown { sector: "rho", .. })));
    assert!(matches!(init_luttinger(0.1, edge, 1.0, 0.1), Err(RgError::BosonizationBreakdown { sector: "sigma", .. })));
    assert!(init_luttinger(edge - 1e-6, edge - 1e-6, 1.0, 0.1).is_ok());
    assert!(init_luttinger(0.1, 0.1, 0.0, 0.1).is_err());
    assert!(init_luttinger(2.0 * edge - 1e-3, 0.1, 2.0, 0.1).is_ok());
}

#[test]
fn decoupled_flow_without_couplings_is_fixed() {
    let t = flow_point(0.2, 0.2, 0.0, &RgControls::default()).unwrap();
    assert_eq!(t.verdict.classification, Classification::Decoupled);
    assert_eq!(t.verdict.sectors, Some((SectorFate::Massless, SectorFate::Massless)));
    let first = t.states[0];
    for s in &t.states {
        assert_eq!((s.k_rho, s.k_sigma), (first.k_rho, first.k_sigma));
    }
    let mut coupled = first;
    coupled.g2 = 1.0;
    assert!(flow_decoupled(&coupled, &RgControls::default()).is_err());
}

#[test]
fn decoupled_sector_in_the_strong_coupling_basin_is_massive() {
    // small K and large y: the BKT flow runs away
    let init = RgState { k_rho: 0.5, k_sigma: 1.5, u_rho: 1.0, u_sigma: 1.0, g_rho: 0.5 * PI, g_sigma: 0.0, g2: 0.0, ell: 0.0 };
    let t = flow_decoupled(&init, &RgControls::default()).unwrap();
    assert_eq!(t.verdict.sectors, Some((SectorFate::Massive, SectorFate::Massless)));
}

#[test]
fn dimerized_flow_verdicts_at_weak_and_strong_hopping() {
    let ctl = RgControls::default();
    for (j2, want) in [(0.019, Classification::RelevantG2), (0.38, Classification::IrrelevantG2)] {
        let t = flow_point(j2, 0.32, 0.07, &ctl).unwrap();
        assert_eq!(t.verdict.classification, want, "J2 = {j2}");
        let g0 = t.states[0].g2;
        assert!(g0 > 0.0);
        let mut last = t.states[0];
        for s in &t.states[1..] {
            assert!(s.g2 * g0 > 0.0, "g2 changed sign at ell = {}", s.ell);
            assert!(s.k_rho <= last.k_rho + 1e-15 && s.k_sigma <= last.k_sigma + 1e-15);
            assert!(s.ell > last.ell);
            last = *s;
        }
    }
    // negative dimerization flips the sign of g2 but not the verdict
    let neg = flow_point(0.019, 0.32, -0.07, &ctl).unwrap();
    assert_eq!(neg.verdict.classification, Classification::RelevantG2);
    assert!(neg.states.iter().all(|s| s.g2 < 0.0));
}

#[test]
fn step_halving_converges() {
    let loose = RgControls { tol: 1e-9, y_big: 1e12, y_small: 0.0, ell_max: 3.0, ..RgControls::default() };
    let tight = RgControls { tol: 1e-12, h_max: 0.02, ..loose };
    let a = flow_point(0.1, 0.32, 0.07, &loose).unwrap().verdict.final_state;
    let b = flow_point(0.1, 0.32, 0.07, &tight).unwrap().verdict.final_state;
    assert!((a.ell - 3.0).abs() < 1e-12 && (b.ell - 3.0).abs() < 1e-12);
    for (x, y) in [(a.k_rho, b.k_rho), (a.k_sigma, b.k_sigma), (a.g2, b.g2)] {
        assert!((x - y).abs() < 1e-6 * (1.0 + y.abs()), "{x} vs {y}");
    }
}

#[test]
fn free_flow_has_analytic_solution() {
    // large velocities suppress the K feedback, so g2 grows as exp((2 - (K_rho + K_sigma)/2) ell)
    let init = RgState { k_rho: 1.2, k_sigma: 1.1, u_rho: 1e4, u_sigma: 1e4, g_rho: 0.0, g_sigma: 0.0, g2: 1.0, ell: 0.0 };
    let ctl = RgControls { y_big: 1e12, y_small: 0.0, ell_max: 2.0, ..RgControls::default() };
    let t = flow_dimerized(&init, &ctl).unwrap();
    let f = t.verdict.final_state;
    let want = ((2.0 - 2.3 / 2.0) * 2.0f64).exp();
    assert!((f.g2 / want - 1.0).abs() < 1e-7, "{f:?} {want}");
    assert!((f.k_rho - 1.2).abs() < 1e-8);
}

#[test]
fn phase_map_has_one_boundary_per_dimerized_row() {
    let ctl = RgControls::default();
    let j2: Vec<f64> = (0..20).map(|i| 0.02 * i as f64).collect();
    let map = sweep_phase_diagram(0.32, &j2, &[0.0, 0.07], 1e-3, &ctl).unwrap();
    assert_eq!(map.cells.len(), 40);
    let row = &map.rows[1];
    assert_eq!(row.flips, 1);
    let j2_c = row.j2_c.unwrap();
    let direct = critical_j2(0.32, 0.07, 0.02, 0.38, 1e-3, &ctl).unwrap();
    assert!((j2_c - direct).abs() < 2e-3);
    assert!(j2_c > 0.019 && j2_c < 0.38);
    assert_eq!(map.rows[0].j2_c, None);
    for c in &map.cells[20..] {
        assert_eq!(c.critical_side, c.j2 > j2_c, "J2 = {}", c.j2);
    }
    assert!(matches!(critical_j2(0.32, 0.07, 0.001, 0.01, 1e-3, &ctl), Err(RgError::NoBoundary { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn angular_integral_is_even_in_mu(mu in -0.95f64..0.95, k in 0.0f64..4.0) {
        let a = angular_integral(mu, k, SQRT_2).unwrap();
        let b = angular_integral(-mu, k, SQRT_2).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn angular_integral_is_monotone_in_k(mu in 0.05f64..0.95, k in 0.0f64..4.0) {
        // Jensen: the cos kernel grows with K; the cos^2 integrand is pointwise below 1 and shrinks
        let a = angular_integral(mu, k, SQRT_2).unwrap();
        let b = angular_integral(mu, k + 0.1, SQRT_2).unwrap();
        prop_assert!(b > a && a >= 2.0 * PI - 1e-12);
        let a = angular_integral_with(AngularKernel::CosSquared, mu, k, SQRT_2).unwrap();
        let b = angular_integral_with(AngularKernel::CosSquared, mu, k + 0.1, SQRT_2).unwrap();
        prop_assert!(b < a && a <= 2.0 * PI + 1e-12);
    }
}
