//! Property checks tying the gain-law closed forms to their defining ODEs
//! and to each other. Oracles are local to this file: a scalar RK4 stepper
//! and high-order finite differences, independent of the library internals.

use proptest::prelude::*;
use spthecl::gain::{GainExponent, GainLaw};

fn law_grid() -> Vec<GainLaw> {
    let mut laws = Vec::new();
    for upsilon in [1.0, 8.0] {
        for ell in [
            GainExponent::Finite(1.0),
            GainExponent::Finite(2.0),
            GainExponent::Finite(5.0),
            GainExponent::Infinite,
        ] {
            laws.push(GainLaw::with_exponent(ell, upsilon).unwrap());
        }
    }
    laws
}

/// End of the test window: just short of blow-up, or a few time constants
/// for complete laws.
fn window_end(law: &GainLaw, mu0: f64) -> f64 {
    let blow_up = law.blow_up_time(mu0);
    if blow_up.is_finite() {
        0.99 * blow_up
    } else {
        3.0 * law.upsilon()
    }
}

/// Scalar RK4 over `dy/dt = f(y)` with `n` fixed steps.
fn rk4_scalar(f: impl Fn(f64) -> f64, y0: f64, t_end: f64, n: usize) -> f64 {
    let dt = t_end / n as f64;
    let mut y = y0;
    for _ in 0..n {
        let k1 = f(y);
        let k2 = f(y + 0.5 * dt * k1);
        let k3 = f(y + 0.5 * dt * k2);
        let k4 = f(y + dt * k3);
        y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

#[test]
fn ode_consistency_numeric_integration_matches_closed_forms() {
    for law in law_grid() {
        for mu0 in [1.0, 2.0] {
            let t_end = window_end(&law, mu0);
            // checkpoints along the window, integrated from scratch each time
            for frac in [0.25, 0.5, 0.75, 1.0] {
                let t = t_end * frac;
                let numeric = rk4_scalar(|mu| law.rate(mu).unwrap(), mu0, t, 200_000);
                let exact = law.solution(mu0, t).unwrap();
                let rel = ((numeric - exact) / exact).abs();
                assert!(
                    rel <= 1e-6,
                    "{law:?} mu0={mu0} t={t}: numeric {numeric} vs exact {exact} (rel {rel:.2e})"
                );
            }
        }
    }
}

#[test]
fn round_trip_contract_of_dilate_is_identity() {
    for law in law_grid() {
        for c in [1.0, 2.0, 10.0] {
            let t_end = window_end(&law, c);
            for k in 0..=40 {
                let t = t_end * k as f64 / 40.0;
                let s = law.dilate(c, t).unwrap();
                let back = law.contract(c, s).unwrap();
                assert!(
                    (back - t).abs() <= 1e-9 * (1.0 + t),
                    "{law:?} c={c} t={t}: round trip gave {back}"
                );
            }
        }
    }
}

#[test]
fn matching_equation_derivative_of_dilation_is_dilated_gain() {
    // dD/dt at t must equal mu_hat(D(t)), with mu_hat integrated numerically
    // from the dilated-clock ODE; the derivative is a 5-point 4th-order
    // stencil on the dilation
    for law in law_grid() {
        for mu0 in [1.0, 2.0] {
            let blow_up = law.blow_up_time(mu0);
            let t_end = if blow_up.is_finite() {
                0.9 * blow_up
            } else {
                2.5 * law.upsilon()
            };
            for k in 1..=10 {
                let t = t_end * k as f64 / 10.0;
                let room = if blow_up.is_finite() {
                    (blow_up - t) / 4.0
                } else {
                    f64::INFINITY
                };
                let h = 1e-3 * (1.0 + t).min(room);
                let d = |x: f64| law.dilate(mu0, x).unwrap();
                let derivative = (-d(t + 2.0 * h) + 8.0 * d(t + h) - 8.0 * d(t - h)
                    + d(t - 2.0 * h))
                    / (12.0 * h);
                let s = law.dilate(mu0, t).unwrap();
                let mu_hat = rk4_scalar(|m| law.dilated_rate(m).unwrap(), mu0, s, 100_000);
                let rel = ((derivative - mu_hat) / mu_hat).abs();
                assert!(
                    rel <= 1e-5,
                    "{law:?} mu0={mu0} t={t}: dD/dt {derivative} vs mu_hat(D) {mu_hat} (rel {rel:.2e})"
                );
            }
        }
    }
}

#[test]
fn composition_identity_gain_equals_dilated_gain_of_dilation() {
    // mu(t) = mu_hat(D(t)) with mu_hat integrated from the dilated ODE
    for law in law_grid() {
        for mu0 in [1.0, 2.0] {
            let t_end = window_end(&law, mu0);
            for k in 1..=8 {
                let t = t_end * k as f64 / 8.0;
                let s = law.dilate(mu0, t).unwrap();
                let mu_hat = rk4_scalar(|m| law.dilated_rate(m).unwrap(), mu0, s, 200_000);
                let mu = law.solution(mu0, t).unwrap();
                let rel = ((mu_hat - mu) / mu).abs();
                assert!(
                    rel <= 1e-6,
                    "{law:?} mu0={mu0} t={t}: mu {mu} vs mu_hat(D) {mu_hat} (rel {rel:.2e})"
                );
            }
        }
    }
}

#[test]
fn solution_and_dilation_are_strictly_increasing() {
    for law in law_grid() {
        for mu0 in [1.0, 2.0] {
            let t_end = window_end(&law, mu0);
            let mut previous_mu = f64::NEG_INFINITY;
            let mut previous_s = f64::NEG_INFINITY;
            for k in 0..=200 {
                let t = t_end * k as f64 / 200.0;
                let mu = law.solution(mu0, t).unwrap();
                let s = law.dilate(mu0, t).unwrap();
                assert!(mu > previous_mu, "{law:?}: mu not increasing at t={t}");
                assert!(s > previous_s, "{law:?}: dilation not increasing at t={t}");
                previous_mu = mu;
                previous_s = s;
            }
        }
    }
}

#[test]
fn dilation_escapes_to_infinity_at_blow_up() {
    // s -> infinity as t -> T: at the guard edge the dilation is already huge
    for law in law_grid().into_iter().filter(GainLaw::has_finite_blow_up) {
        let blow_up = law.blow_up_time(1.0);
        let near = blow_up * (1.0 - 1e-9);
        let s = law.dilate(1.0, near).unwrap();
        assert!(
            s > 5.0 * law.upsilon(),
            "{law:?}: dilation only reached {s}"
        );
    }
}

proptest! {
    #[test]
    fn prop_round_trip_arbitrary_laws(
        ell in prop_oneof![(1.0f64..6.0).boxed(), Just(f64::INFINITY).boxed()],
        upsilon in 0.5f64..10.0,
        c in 1.0f64..10.0,
        frac in 0.0f64..0.99,
    ) {
        let law = if ell.is_infinite() {
            GainLaw::prescribed_time(upsilon).unwrap()
        } else {
            GainLaw::new(ell, upsilon).unwrap()
        };
        let t_end = window_end(&law, c);
        let t = t_end * frac;
        let s = law.dilate(c, t).unwrap();
        prop_assert!(s >= 0.0);
        let back = law.contract(c, s).unwrap();
        prop_assert!((back - t).abs() <= 1e-9 * (1.0 + t));
    }

    #[test]
    fn prop_gain_state_monotone(
        ell in 1.0f64..6.0,
        upsilon in 0.5f64..10.0,
        mu0 in 1.0f64..5.0,
        frac in 0.0f64..0.95,
    ) {
        let law = GainLaw::new(ell, upsilon).unwrap();
        let t = window_end(&law, mu0) * frac;
        let state = spthecl::gain::GainState::new(mu0).unwrap().flowed(&law, t).unwrap();
        prop_assert!(state.mu() >= state.mu0());
    }
}
