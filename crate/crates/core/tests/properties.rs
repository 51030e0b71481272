use invexit::{
    exponent_derivatives, make_exit_model, p_invest, reward_h, solve_thresholds, tech_switch,
    Outcome, Params, Salvage, SolverConfig,
};
use proptest::prelude::*;

fn declining_exit() -> impl Strategy<Value = (f64, f64, f64)> {
    (-3.0..-0.05f64, 0.1..3.0f64, 0.05..3.0f64)
}

fn any_exit() -> impl Strategy<Value = (f64, f64, f64)> {
    (-5.0..5.0f64, 0.01..5.0f64, 0.01..5.0f64)
}

/// Admissible parameters with a positive net gain.
fn investing_params() -> impl Strategy<Value = Params> {
    (
        0.3..2.0f64,
        -2.0..-0.1f64,
        0.1..2.0f64,
        0.0..0.8f64,
        0.05..4.0f64,
        0.1..1.5f64,
    )
        .prop_map(|(a, mu, s2, d, g, k)| Params::from_gain(a, mu, s2, d, g, k).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn roots_solve_the_quadratic((nu, a, s2) in any_exit()) {
        let m = make_exit_model(nu, a, s2).unwrap();
        for root in [m.psi, m.phi] {
            let scale = a + (nu * root).abs() + 0.5 * s2 * root * root;
            prop_assert!(m.characteristic(root).abs() < 1e-12 * scale);
        }
        prop_assert!(m.psi > 0.0 && m.phi < 0.0);
        prop_assert_eq!(m.xi, -1.0 / m.psi);
    }

    #[test]
    fn exponent_monotonicity((nu, a, s2) in declining_exit()) {
        let h = 1e-3;
        let at = |nu: f64, a: f64, s2: f64| make_exit_model(nu, a, s2).unwrap();
        let base = at(nu, a, s2);
        let up_s = at(nu, a, s2 + h);
        let up_n = at(nu + h, a, s2);
        let up_a = at(nu, a + h, s2);
        prop_assert!(up_s.psi < base.psi && up_s.phi > base.phi && up_s.xi < base.xi);
        prop_assert!(up_n.psi < base.psi && up_n.phi < base.phi && up_n.xi < base.xi);
        prop_assert!(up_a.psi > base.psi && up_a.phi < base.phi && up_a.xi > base.xi);
        for x in [base.xi + 0.01, base.xi + 0.5, 0.0, 1.0] {
            if x > base.xi {
                prop_assert!(up_s.value(x) > base.value(x));
                prop_assert!(up_n.value(x) > base.value(x));
            }
        }
    }

    #[test]
    fn exponent_derivatives_match_differences((nu, a, s2) in declining_exit()) {
        let h = 1e-6;
        let d = exponent_derivatives(nu, a, s2);
        let at = |nu: f64, a: f64, s2: f64| make_exit_model(nu, a, s2).unwrap();
        let diff = |up: (f64, f64), dn: (f64, f64)| ((up.0 - dn.0) / (2.0 * h), (up.1 - dn.1) / (2.0 * h));
        let pair = |m: invexit::Exit| (m.psi, m.phi);
        let s = diff(pair(at(nu, a, s2 + h)), pair(at(nu, a, s2 - h)));
        let n = diff(pair(at(nu + h, a, s2)), pair(at(nu - h, a, s2)));
        let al = diff(pair(at(nu, a + h, s2)), pair(at(nu, a - h, s2)));
        for (exact, fd) in [
            (d.dpsi_dsigma2, s.0), (d.dphi_dsigma2, s.1),
            (d.dpsi_dnu, n.0), (d.dphi_dnu, n.1),
            (d.dpsi_dalpha, al.0), (d.dphi_dalpha, al.1),
        ] {
            prop_assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1e-3), "{} vs {}", exact, fd);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solved_value_is_convex_and_dominant(p in investing_params()) {
        let cfg = SolverConfig::default();
        let Outcome::Invest(s) = solve_thresholds(&p, &cfg).unwrap() else {
            panic!("positive gain must invest");
        };
        prop_assert!(s.report.passed(), "{}", s.report);
        let sol = s.solution;
        let v0 = p.base_exit();
        let (lo, hi) = (sol.xi_e - 1.0, sol.xi_i + 1.0);
        let n = 1000;
        let h = (hi - lo) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|&x| sol.value(x)).collect();
        let scale = 1.0 + vs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for w in vs.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-7 * scale);
        }
        for (&x, &v) in xs.iter().zip(&vs) {
            let floor = v0.value(x).max(reward_h(&p, x));
            prop_assert!(v >= floor - 1e-9 * scale, "x = {}: {} < {}", x, v, floor);
        }
    }

    #[test]
    fn thresholds_are_ordered(p in investing_params()) {
        let s = solve_thresholds(&p, &SolverConfig::default()).unwrap().into_solved().unwrap();
        let sol = s.solution;
        prop_assert!(sol.xi_e < sol.x_plus && sol.x_plus < sol.xi_i);
        prop_assert!(sol.xi_e <= sol.xi0());
        prop_assert!(sol.a1 > 0.0 && sol.a2 > 0.0);
        for r in sol.residuals() {
            prop_assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn investment_probability_is_increasing(p in investing_params()) {
        let sol = solve_thresholds(&p, &SolverConfig::default()).unwrap().into_solved().unwrap().solution;
        let mut last = -1.0;
        for i in 0..=50 {
            let x = sol.xi_e + (sol.xi_i - sol.xi_e) * i as f64 / 50.0;
            let v = p_invest(&sol, x.min(sol.xi_i)).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(v > last || (v == 1.0 && last == 1.0));
            last = v;
        }
    }

    #[test]
    fn salvage_shifts_thresholds_linearly(p in investing_params(), s in -1.0..1.0f64) {
        let sol = solve_thresholds(&p, &SolverConfig::default()).unwrap().into_solved().unwrap().solution;
        let (v, xi_i, xi_e) = tech_switch(&sol, &Salvage::new(s).unwrap(), sol.x_plus);
        prop_assert!((xi_i - sol.xi_i - p.alpha() * s).abs() < 1e-12 * (1.0 + sol.xi_i.abs()));
        prop_assert!((xi_e - sol.xi_e - p.alpha() * s).abs() < 1e-12 * (1.0 + sol.xi_e.abs()));
        prop_assert!(v >= s - 1e-12);
    }
}

#[test]
fn never_invest_below_zero_gain() {
    for g in [-2.0, -0.5, -1e-9, 0.0] {
        let p = Params::reference(1.0).with_gain(g).unwrap();
        assert!(matches!(
            solve_thresholds(&p, &SolverConfig::default()).unwrap(),
            Outcome::NeverInvest { .. }
        ));
    }
}
