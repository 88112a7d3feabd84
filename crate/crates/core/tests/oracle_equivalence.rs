mod common;

use common::{physical_channel, separable_state, two_mode_state};
use cvbell_core::circuit::{analyze, build_bell_state, BellAngles, CircuitConfig};
use cvbell_core::correlation::{bell_from_config, bell_from_state, e_value, p_values, r_from_moments, r_table, SecondMoments};
use cvbell_core::gaussian::ChannelParams;
use cvbell_oracle::{fock_e_value, tmsv_nn, wick_fourth_moment, FockCircuit, PairMoments};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI, SQRT_2};

fn moments_of(gamma: &cvbell_core::gaussian::CovarianceMatrix) -> SecondMoments {
    SecondMoments {
        xx: gamma.get(0, 2),
        pp: gamma.get(1, 3),
        xp: gamma.get(0, 3),
        px: gamma.get(1, 2),
        va_x: gamma.get(0, 0),
        va_p: gamma.get(1, 1),
        vb_x: gamma.get(2, 2),
        vb_p: gamma.get(3, 3),
        v_v: 1.0,
    }
}

fn as_oracle(m: &SecondMoments) -> PairMoments {
    PairMoments {
        xx: m.xx,
        pp: m.pp,
        xp: m.xp,
        px: m.px,
        va_x: m.va_x,
        va_p: m.va_p,
        vb_x: m.vb_x,
        vb_p: m.vb_p,
        v_v: m.v_v,
    }
}

/// Every relabelling of the canonical angle set.
fn canonical_variants() -> Vec<BellAngles> {
    let c = BellAngles::canonical();
    let mut out = Vec::new();
    for swap_a in [false, true] {
        for swap_b in [false, true] {
            let (a, ap) = if swap_a { (c.theta_a_prime, c.theta_a) } else { (c.theta_a, c.theta_a_prime) };
            let (b, bp) = if swap_b { (c.theta_b_prime, c.theta_b) } else { (c.theta_b, c.theta_b_prime) };
            out.push(BellAngles {
                theta_a: a,
                theta_a_prime: ap,
                theta_b: b,
                theta_b_prime: bp,
            });
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn photon_correlation_matches_wick_enumeration(gamma in two_mode_state()) {
        let m = moments_of(&gamma);
        m.validate().unwrap();
        let r = r_from_moments(&m);
        let w = wick_fourth_moment(&as_oracle(&m));
        prop_assert!((r - w).abs() < 1e-12, "{r} vs {w}");
    }

    #[test]
    fn p_values_are_normalized(db in 0.1..6.0f64, ch in physical_channel(), ta in -PI..PI, tb in -PI..PI) {
        let gamma = build_bell_state(&CircuitConfig::from_squeezing_db(db, 0.9, ch)).unwrap();
        let p = p_values(&r_table(&analyze(&gamma, ta, tb).unwrap()).unwrap()).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn classical_states_obey_the_local_bound(gamma in separable_state()) {
        for set in canonical_variants() {
            let b = bell_from_state(&gamma, &set).unwrap().b;
            prop_assert!(b <= 2.0 + 1e-6, "B = {b}");
        }
    }

    #[test]
    fn source_states_obey_the_tsirelson_bound(
        db in 0.0..15.0f64,
        purity in 0.5..=1.0f64,
        ch in physical_channel(),
        qwp in -PI..PI,
        arm in -PI..PI,
    ) {
        // Zero squeezing with a pure-loss channel has no photons at all.
        prop_assume!(db > 1e-3 || ch.epsilon > 1.0 - ch.eta + 1e-6);
        let cfg = CircuitConfig { qwp_phase: qwp, arm_phase: arm, ..CircuitConfig::from_squeezing_db(db, purity, ch) };
        for set in canonical_variants() {
            let b = bell_from_config(&cfg, &set).unwrap().b;
            prop_assert!(b <= 2.0 * SQRT_2 + 1e-6, "B = {b}");
        }
    }
}

#[test]
fn tmsv_closed_form_matches_the_gaussian_formula() {
    for r in [0.1f64, 0.5, 1.0] {
        let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        let m = SecondMoments {
            xx: s,
            pp: -s,
            ..SecondMoments::uncorrelated(c, c, c, c)
        };
        assert!((r_from_moments(&m) - tmsv_nn(r)).abs() < 1e-10, "r = {r}");
    }
    assert!((tmsv_nn(0.5) - 0.419_008_6).abs() < 1e-7);
}

fn gaussian_e(v_sqz: f64, ta: f64, tb: f64) -> f64 {
    let cfg = CircuitConfig::pure(v_sqz, ChannelParams::ideal());
    e_value(&r_table(&analyze(&build_bell_state(&cfg).unwrap(), ta, tb).unwrap()).unwrap()).unwrap()
}

#[test]
fn fock_expansion_agrees_in_the_weak_squeezing_limit() {
    // The pure-state deviation from the photon-pair value −cos 2(θ_A − θ_B)
    // is second order in 1 − V_sqz; the four-photon expansion captures it.
    let pairs = [(FRAC_PI_8, 0.0), (3.0 * FRAC_PI_8, FRAC_PI_4), (0.3, 1.1), (FRAC_PI_8, FRAC_PI_4)];
    for &(ta, tb) in &pairs {
        let limit = -(2.0 * (ta - tb)).cos();
        let mut curvature = Vec::new();
        for v_sqz in [0.999, 0.995, 0.99] {
            let g = gaussian_e(v_sqz, ta, tb);
            let f = fock_e_value(&FockCircuit::new(v_sqz, 4), ta, tb).unwrap();
            let dv = 1.0 - v_sqz;
            assert!((g - limit).abs() <= dv, "({ta},{tb}) at {v_sqz}: {g} vs {limit}");
            assert!((g - f).abs() <= 0.05 * (g - limit).abs(), "({ta},{tb}) at {v_sqz}: gaussian {g}, fock {f}");
            curvature.push((g - limit) / (dv * dv));
        }
        let (lo, hi) = curvature.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &c| (l.min(c), h.max(c)));
        assert!(hi - lo <= 0.05 * hi.abs(), "({ta},{tb}): {curvature:?}");
    }
}
