use invexit::mc::{
    crossing_shift, estimate_p_invest, grid_search, simulate_policy, PathConfig, PolicySpec,
};
use invexit::{p_invest, solve_thresholds, Params, Solution, SolverConfig};

fn cfg(x0: f64, dt: f64, n: usize, seed: u64) -> PathConfig {
    PathConfig {
        x0,
        dt,
        horizon: 30.0,
        n_paths: n,
        seed,
    }
}

fn reference() -> Solution {
    solve_thresholds(&Params::reference(1.0), &SolverConfig::default())
        .unwrap()
        .into_solved()
        .unwrap()
        .solution
}

#[test]
fn exit_only_policy_matches_exit_value() {
    let p = Params::reference(1.0);
    let pol = PolicySpec::exit_only(p.base_exit().xi).unwrap();
    let est = simulate_policy(&p, &pol, &cfg(0.0, 1e-3, 20_000, 1)).unwrap();
    let exact = p.base_exit().value(0.0);
    assert!(
        (est.mean - exact).abs() < 3.0 * est.std_error,
        "{} vs {exact}",
        est.mean
    );
    assert_eq!(est.p_invest_hat, 0.0);
}

#[test]
fn halving_dt_stays_within_noise() {
    let p = Params::reference(1.0);
    let pol = PolicySpec::from_solution(&reference());
    let coarse = simulate_policy(&p, &pol, &cfg(0.0, 2e-3, 20_000, 2)).unwrap();
    let fine = simulate_policy(&p, &pol, &cfg(0.0, 1e-3, 20_000, 3)).unwrap();
    let band = 3.0 * coarse.std_error.hypot(fine.std_error);
    assert!((coarse.mean - fine.mean).abs() < band);
}

#[test]
fn exit_only_value_increases_with_start() {
    let p = Params::reference(1.0);
    let pol = PolicySpec::exit_only(p.base_exit().xi).unwrap();
    let means: Vec<f64> = [-0.1, 0.0, 0.1, 0.2, 0.4]
        .iter()
        .map(|&x0| {
            simulate_policy(&p, &pol, &cfg(x0, 1e-3, 5_000, 4))
                .unwrap()
                .mean
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
}

#[test]
fn driftless_walk_splits_evenly() {
    let p = Params::new(1.0, 0.0, 0.5, 0.0, 1.0, 0.5).unwrap();
    let pol = PolicySpec::new(-0.5, 0.5, -1.0).unwrap();
    let f = estimate_p_invest(&p, &pol, &cfg(0.0, 1e-3, 20_000, 5)).unwrap();
    assert!((f.p_hat - 0.5).abs() < 3.0 * f.std_error);
}

#[test]
fn first_passage_frequency_matches_closed_form() {
    let p = Params::reference(1.0);
    let sol = reference();
    let dt = 1e-3;
    let f = estimate_p_invest(
        &p,
        &PolicySpec::from_solution(&sol),
        &cfg(0.0, dt, 50_000, 6),
    )
    .unwrap();
    let beta = crossing_shift(p.sigma(), dt);
    let corrected = Solution::from_thresholds(&p, sol.xi_e - beta, sol.xi_i + beta).unwrap();
    let closed = p_invest(&corrected, 0.0).unwrap();
    assert!(
        (f.p_hat - closed).abs() < 3.0 * f.std_error,
        "{} vs {closed}",
        f.p_hat
    );
}

#[test]
fn more_volatility_invests_more_often_at_small_gain() {
    let p = Params::reference(1.0).with_gain(0.05).unwrap();
    let x0 = 2.0;
    let mut freqs = Vec::new();
    for s2 in [0.5, 1.0] {
        let q = p.with_sigma2(s2).unwrap();
        let sol = solve_thresholds(&q, &SolverConfig::default())
            .unwrap()
            .into_solved()
            .unwrap()
            .solution;
        let f = estimate_p_invest(
            &q,
            &PolicySpec::from_solution(&sol),
            &cfg(x0, 1e-3, 20_000, 7),
        )
        .unwrap();
        freqs.push((f.p_hat, f.std_error, p_invest(&sol, x0).unwrap()));
    }
    assert!(freqs[1].2 > freqs[0].2);
    assert!(
        freqs[1].0 - freqs[0].0 > 3.0 * freqs[0].1.hypot(freqs[1].1),
        "{freqs:?}"
    );
}

#[test]
fn grid_moves_back_from_late_exit() {
    let p = Params::reference(1.0);
    let sol = reference();
    let shifted = PolicySpec::new(sol.xi_e + 0.3, sol.xi_i + 0.3, sol.xi1).unwrap();
    let grid = grid_search(&p, &shifted, 0.15, 3, &cfg(0.3, 1e-3, 10_000, 8)).unwrap();
    assert!(grid.best.exit_pre < shifted.exit_pre);
    assert!(grid.best.exit_pre < sol.xi_e + 0.2);
}
