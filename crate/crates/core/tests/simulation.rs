use duallife::felicity::{crra, Felicity};
use duallife::market::{merton_constant, MarketParams};
use duallife::montecarlo::{
    estimate_transversality, simulate_discounted_flow, simulate_labor_value, verify_budget_constraint,
    SimulationConfig,
};
use duallife::quadrature::QuadOptions;
use duallife::scenario::Scenario;

fn market() -> MarketParams {
    MarketParams::new(0.02, 0.07, 0.2, 0.03, 1.0).unwrap()
}

fn weekly(n_paths: usize, horizon: f64) -> SimulationConfig {
    SimulationConfig {
        n_paths,
        dt: 1.0 / 52.0,
        horizon,
        seed: 7,
        antithetic: true,
        workers: 0,
    }
}

#[test]
fn feynman_kac_matches_resolvent() {
    // For CRRA the truncated value is Xi(y) (1 - e^{-M T}) exactly.
    let m = market();
    let u = crra(2.0).unwrap();
    let mm = merton_constant(&m, 2.0).unwrap().value;
    let horizon = 100.0;
    let e = simulate_discounted_flow(&m, |v| u.conjugate(v), 1.0, &weekly(4_000, horizon)).unwrap();
    let xi = -2.0 / mm;
    let target = xi * (1.0 - (-mm * horizon).exp());
    assert!(e.within(target, 3.0, 0.0), "{e:?} vs {target}");
}

#[test]
fn retiring_at_once_spends_threshold_wealth() {
    let p = Scenario::crra(market(), 2.0, 0.5, 1.0, 0.0, QuadOptions::default())
        .unwrap()
        .solve(1e-13)
        .unwrap();
    let r = verify_budget_constraint(&p, p.x_r(), &weekly(2_000, 200.0)).unwrap();
    assert!(r.passed, "{r:?}");
    assert_eq!(r.y_star, p.z_r());
}

#[test]
fn labor_value_and_transversality_small_run() {
    let p = Scenario::crra(market(), 2.0, 0.5, 1.0, 0.0, QuadOptions::default())
        .unwrap()
        .solve(1e-13)
        .unwrap();
    let sol = p.solution();
    let cfg = weekly(4_000, 200.0);
    let e = simulate_labor_value(sol, 1.0, &cfg).unwrap();
    let exact = sol.labor_value(1.0).unwrap();
    assert!(e.estimate.within(exact, 3.0, e.truncated_tail.abs()), "{e:?} vs {exact}");
    let t = estimate_transversality(sol, 1.0, &[10.0, 20.0, 40.0], &cfg).unwrap();
    assert!(t.windows(2).all(|w| w[1].estimate.mean < w[0].estimate.mean));
}

#[test]
fn seeds_change_samples_not_validity() {
    let m = market();
    let a = simulate_discounted_flow(&m, |v| v, 1.0, &weekly(200, 5.0)).unwrap();
    let b = simulate_discounted_flow(&m, |v| v, 1.0, &SimulationConfig { seed: 8, ..weekly(200, 5.0) }).unwrap();
    assert_ne!(a.mean, b.mean);
    let again = simulate_discounted_flow(&m, |v| v, 1.0, &weekly(200, 5.0)).unwrap();
    assert_eq!(a.mean.to_bits(), again.mean.to_bits());
}
