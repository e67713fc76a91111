use fbnoise::coefficients::{closed, gamma_int, gamma_quad, Channel};
use fbnoise::dynamics::{evolve_cm, make_twb, ChannelSnapshot, Mode, TwbSpec};
use fbnoise::entanglement::{
    invariants, kappa_secular_paper, kappa_symmetric, negativity, nu_min_pt, sudden_death_time,
};
use fbnoise::oracle::finite_diff;
use fbnoise::{EnvironmentParams, KappaCurve, Method, SpectralDensity, Temperature};
use proptest::prelude::*;

fn env(j0: f64, omega: f64, delta: f64) -> EnvironmentParams {
    EnvironmentParams::low_t(j0, omega, delta).unwrap()
}

fn twb(r: f64) -> fbnoise::TwoModeGaussianState {
    make_twb(TwbSpec::new(r).unwrap()).unwrap()
}

const FIG2_SETS: [(f64, f64, f64); 13] = [
    // (r, J₀δ, Ω)
    (10.0, 0.01, 1.0),
    (2.0, 0.01, 1.0),
    (1.0, 0.01, 1.0),
    (0.5, 0.01, 1.0),
    (0.1, 0.01, 1.0),
    (1.0, 1e-3, 1.0),
    (1.0, 0.0031622776601683794, 1.0),
    (1.0, 0.031622776601683791, 1.0),
    (1.0, 0.1, 1.0),
    (1.0, 0.01, 10.0),
    (1.0, 0.01, 2.0),
    (1.0, 0.01, 0.5),
    (1.0, 0.01, 0.1),
];

fn grid(n: usize, stop: f64) -> Vec<f64> {
    (0..n).map(|i| stop * i as f64 / (n - 1) as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_cos_low_t_is_large_beta_limit(lo in 0.1f64..5.0, d in 1e-3f64..1.0, s in 0.0f64..10.0) {
        let j = SpectralDensity::new(1.0, lo, d).unwrap();
        let cold = j.kernel_cos_thermal(s, Temperature::LowT).unwrap();
        let warm = j.kernel_cos_thermal(s, Temperature::Beta(1e4 / lo)).unwrap();
        prop_assert!((cold - warm).abs() <= 1e-6 * cold.abs().max(1e-12 * d));
    }

    #[test]
    fn damping_integral_derivative(tau in 0.1f64..10.0, lo in 0.2f64..3.0, d in 1e-4f64..0.5) {
        let e = env(1.0, lo, d);
        let fd = finite_diff(|t| gamma_int(&e, t, Method::Quadrature), tau, 1e-3).unwrap();
        let g = 2.0 * gamma_quad(&e, tau).unwrap();
        // near a zero of γ the relative form is meaningless; compare to its scale
        let scale = g.abs().max(1e-3 * d * lo);
        prop_assert!((fd - g).abs() <= 1e-4 * scale, "{} vs {}", fd, g);
    }

    #[test]
    fn diagonal_blocks_stay_identical(r in 0.0f64..3.0, tau in 0.0f64..20.0, lo in 0.1f64..5.0, d in 1e-4f64..0.1) {
        let snap = Channel::new(env(1.0, lo, d), Method::ClosedForm, tau).unwrap().snapshot(tau).unwrap();
        for mode in [Mode::Secular, Mode::Full] {
            let s = evolve_cm(&twb(r), &snap, mode).unwrap();
            prop_assert!((s.block_a() - s.block_b()).abs().max() <= 1e-12 * s.cm().abs().max().max(1.0));
        }
    }

    #[test]
    fn correlation_norm_follows_damping(r in 0.0f64..3.0, tau in 0.0f64..20.0, lo in 0.1f64..5.0, d in 1e-4f64..0.1) {
        let snap = Channel::new(env(1.0, lo, d), Method::ClosedForm, tau).unwrap().snapshot(tau).unwrap();
        let s = evolve_cm(&twb(r), &snap, Mode::Full).unwrap();
        let expected = (2.0 * r).sinh() * (-snap.big_gamma).exp() * 2f64.sqrt();
        prop_assert!((s.block_c().norm() - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn purity_decay_bound(r in 0.0f64..3.0, tau in 0.0f64..30.0, lo in 0.1f64..10.0, jd in 1e-4f64..0.1) {
        let snap = Channel::new(env(1.0, lo, jd), Method::ClosedForm, tau).unwrap().snapshot(tau).unwrap();
        let s0 = twb(r);
        let st = evolve_cm(&s0, &snap, Mode::Secular).unwrap();
        let bound = s0.cm().determinant() * (-4.0 * snap.big_gamma).exp();
        prop_assert!(st.cm().determinant() >= bound * (1.0 - 1e-9));
    }

    #[test]
    fn free_rotation_keeps_symmetric_kappa(r in 0.0f64..3.0, tau in 0.0f64..30.0) {
        let s = twb(r);
        let k0 = kappa_symmetric(&invariants(&s).unwrap()).unwrap();
        let out = evolve_cm(&s, &ChannelSnapshot::noiseless(tau, 0.0), Mode::Full).unwrap();
        let k = kappa_symmetric(&invariants(&out).unwrap()).unwrap();
        prop_assert!((k - k0).abs() <= 1e-10 * k0.max(1.0));
    }

    #[test]
    fn pt_spectrum_of_twin_beam(r in 0.0f64..3.0) {
        prop_assert!((nu_min_pt(&twb(r)).unwrap() - (-2.0 * r).exp()).abs() <= 1e-10);
    }

    #[test]
    fn negativity_is_non_increasing(a in 1e-6f64..10.0, b in 1e-6f64..10.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(negativity(lo).unwrap() >= negativity(hi).unwrap());
    }

    #[test]
    fn smaller_kappa_dies_later(r in 0.1f64..3.0, jd in 2e-3f64..0.1, factor in 1.01f64..4.0, lo in 0.5f64..5.0) {
        // κ is increasing in J₀δ pointwise once the Γ term is negligible, and
        // the formula is exact, so compare curves ordered by a larger J₀δ
        let small = KappaCurve::secular_formula(r, jd, lo).unwrap();
        let large = KappaCurve::secular_formula(r, jd * factor, lo).unwrap();
        let taus = grid(2001, 100.0);
        let (ks, kl) = (small.values(&taus).unwrap(), large.values(&taus).unwrap());
        prop_assume!(ks.iter().zip(&kl).all(|(a, b)| a <= b));
        let ts = sudden_death_time(&small, 100.0).unwrap();
        let tl = sudden_death_time(&large, 100.0).unwrap();
        match (ts, tl) {
            (Some(ts), Some(tl)) => prop_assert!(ts >= tl - 1e-6),
            (None, _) => {}
            (Some(_), None) => prop_assert!(false, "larger κ curve outlived the smaller one"),
        }
    }
}

#[test]
fn small_time_coefficients_vanish_linearly() {
    let e = env(1.0, 1.0, 1e-2);
    for f in [closed::gamma, closed::delta, closed::pi, closed::r_shift] {
        assert!(f(&e, 1e-6).abs() <= 1e-5 * f(&e, 1e-1).abs().max(f64::MIN_POSITIVE));
    }
}

#[test]
fn channel_states_stay_positive_on_figure_scenarios() {
    let taus = grid(600, 30.0);
    let mut sets: Vec<(f64, f64, f64)> = FIG2_SETS.to_vec();
    for (d, o) in [(1e-4, 1.0), (1e-3, 1.0), (1e-3, 3.0)] {
        for r in [0.01, 0.1, 0.3, 0.5, 0.9] {
            sets.push((r, d, o));
        }
    }
    for (r, jd, lo) in sets {
        let snaps = Channel::new(env(1.0, lo, jd), Method::ClosedForm, 30.0).unwrap().snapshots(&taus).unwrap();
        for snap in &snaps {
            for mode in [Mode::Secular, Mode::Full] {
                let s = evolve_cm(&twb(r), snap, mode).unwrap();
                assert!(s.min_eigenvalue() >= -1e-10 * s.cm().abs().max().max(1.0), "{r} {jd} {lo} {} {mode}", snap.tau);
            }
        }
    }
}

#[test]
fn secular_kappa_has_one_interior_minimum() {
    let taus = grid(600, 30.0);
    for (d, o) in [(1e-4, 1.0), (1e-3, 1.0), (1e-3, 3.0)] {
        for r in [0.01, 0.1, 0.3, 0.5, 0.9] {
            let k: Vec<f64> = taus.iter().map(|&t| kappa_secular_paper(r, d, o, t).unwrap()).collect();
            let slope: Vec<f64> = k.windows(2).map(|w| w[1] - w[0]).collect();
            let changes: Vec<bool> = slope.windows(2).map(|w| (w[0] > 0.0) != (w[1] > 0.0)).collect();
            assert_eq!(changes.iter().filter(|&&c| c).count(), 2, "{d} {o} {r}");
            assert!(slope[0] > 0.0 && *slope.last().unwrap() > 0.0);
        }
    }
}

#[test]
fn oracle_reports_are_reproducible() {
    let s = fbnoise::scenario::SweepScenario::default();
    let a = fbnoise::commands::cmd_verify(&s).unwrap();
    let b = fbnoise::commands::cmd_verify(&s).unwrap();
    assert_eq!(a.csv, b.csv);
}
