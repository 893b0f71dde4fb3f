use std::sync::{Arc, OnceLock};

use duallife::dual::Regime;
use duallife::felicity::{
    crra, log_grid, make_post_retirement, make_pre_retirement, Felicity, FelicityRef, PreferencePair,
};
use duallife::market::{solve_characteristic_roots, MarketParams};
use duallife::operators::central_differences;
use duallife::policy::PolicySet;
use duallife::quadrature::QuadOptions;
use duallife::retirement::gee;
use duallife::scenario::Scenario;
use proptest::prelude::*;

fn ref1() -> &'static (Scenario, PolicySet) {
    static CELL: OnceLock<(Scenario, PolicySet)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = MarketParams::new(0.02, 0.07, 0.2, 0.03, 1.0).unwrap();
        let s = Scenario::crra(m, 2.0, 0.5, 1.0, 0.0, QuadOptions::default()).unwrap();
        let p = s.solve(1e-13).unwrap();
        (s, p)
    })
}

fn with_floor() -> &'static PolicySet {
    // Post-retirement floor b > 0 puts a kink in I_A.
    static CELL: OnceLock<PolicySet> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = MarketParams::new(0.02, 0.07, 0.2, 0.03, 1.0).unwrap();
        Scenario::crra(m, 2.0, 0.5, 1.0, 1.0, QuadOptions::default())
            .unwrap()
            .solve(1e-13)
            .unwrap()
    })
}

fn market_strategy() -> impl Strategy<Value = MarketParams> {
    (0.001f64..0.1, 0.0f64..0.2, 0.05f64..0.6, 0.001f64..0.15)
        .prop_filter_map("mu must differ from r", |(r, excess, sigma, rho)| {
            (excess > 1e-3).then(|| MarketParams::new(r, r + excess, sigma, rho, 1.0).ok()).flatten()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn characteristic_roots_bracket_zero_and_one(m in market_strategy()) {
        let q = solve_characteristic_roots(&m).unwrap();
        prop_assert!(q.n1 > 1.0 && q.n2 < 0.0);
        prop_assert!(m.characteristic(q.n1).abs() <= 1e-12 * m.rho().max(1.0));
        prop_assert!(m.characteristic(q.n2).abs() <= 1e-12 * m.rho().max(1.0));
    }

    #[test]
    fn inverse_marginal_case_split(gamma in 0.3f64..5.0, k in 1.0f64..2.5, b in 0.0f64..2.0, t in -6.0f64..6.0) {
        prop_assume!((gamma - 1.0).abs() > 1e-3);
        let base: FelicityRef = Arc::new(crra(gamma).unwrap());
        let ua = make_post_retirement(base, k, b).unwrap();
        let y = 10f64.powf(t);
        let c = ua.inverse_marginal(y);
        if y >= ua.marginal_at_zero() {
            prop_assert_eq!(c, 0.0);
        } else {
            prop_assert!(c > 0.0);
            prop_assert!((ua.marginal(c) - y).abs() <= 1e-10 * y);
        }
    }

    #[test]
    fn dual_is_convex(a in -3.0f64..3.0, b in -3.0f64..3.0, w in 0.05f64..0.95) {
        prop_assume!((a - b).abs() > 1e-3);
        let dual = ref1().1.dual();
        let (y1, y3) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
        let y2 = y1 + w * (y3 - y1);
        let chord = ((y3 - y2) * dual.j(y1).unwrap() + (y2 - y1) * dual.j(y3).unwrap()) / (y3 - y1);
        prop_assert!(dual.j(y2).unwrap() <= chord + 1e-10);
    }

    #[test]
    fn duality_inequality(x in -45.0f64..400.0) {
        let p = &ref1().1;
        let d = p.optimal_policy(x).unwrap();
        for y in [d.y_star / 2.0, d.y_star * 2.0] {
            prop_assert!(d.value < p.dual().j(y).unwrap() + y * x);
        }
        prop_assert!(d.c >= 0.0);
        prop_assert_eq!(d.retired, x >= p.x_r());
    }

    #[test]
    fn wealth_decomposition(t in -2.0f64..3.0) {
        let p = &ref1().1;
        let y = p.z_r() * 10f64.powf(t);
        let total = -p.dual().j_a_prime(y).unwrap();
        let lhs = p.wealth(y).unwrap() + p.human_wealth(y).unwrap();
        prop_assert!((lhs - total).abs() <= 1e-9 * total.abs().max(1.0));
        if y <= p.z_r() {
            prop_assert_eq!(p.human_wealth(y).unwrap(), 0.0);
        } else {
            prop_assert!(p.human_wealth(y).unwrap() > 0.0);
        }
    }
}

#[test]
fn wealth_strictly_decreasing_in_marginal_value() {
    for p in [&ref1().1, with_floor()] {
        let grid = log_grid(1e-4, 1e4, 200);
        let xs: Vec<f64> = grid.iter().map(|&y| p.wealth(y).unwrap()).collect();
        assert!(xs.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn labor_value_nonnegative_and_increasing() {
    let sol = ref1().1.solution();
    let grid = log_grid(sol.z_r() / 10.0, sol.z_r() * 1e4, 200);
    let mut last = 0.0;
    for &y in &grid {
        let v = sol.labor_value(y).unwrap();
        if y <= sol.z_r() {
            assert_eq!(v, 0.0);
        } else {
            assert!(v > last, "y {y}");
        }
        last = v;
    }
}

#[test]
fn labor_value_growth_chain() {
    let (s, p) = ref1();
    let sol = p.solution();
    let n2 = s.roots.n2;
    for y in log_grid(sol.z_r(), 1e4, 40) {
        let bound = sol.d().abs() * sol.z_r().powf(n2)
            + p.dual().j_a(y).unwrap().abs()
            + s.kernel.xi(|v| s.pair.u_b.conjugate(v), y).unwrap().abs()
            + y / 0.02;
        assert!(sol.labor_value(y).unwrap() <= bound);
    }
}

#[test]
fn marginal_benefit_increasing() {
    let sol = ref1().1.solution();
    let grid = log_grid(1e-6, 1e8, 300);
    let psi: Vec<f64> = grid.iter().map(|&y| sol.psi(y)).collect();
    assert!(psi.windows(2).all(|w| w[1] > w[0]));
    assert!((psi.last().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn gee_unimodal_around_zbar() {
    let (s, p) = ref1();
    let zb = p.solution().z_bar();
    let g = |y| gee(&s.pair, &s.kernel, y).unwrap();
    let below = log_grid(zb * 1e-3, zb, 40);
    let above = log_grid(zb, zb * 1e3, 40);
    assert!(below.windows(2).all(|w| g(w[1]) > g(w[0])));
    assert!(above.windows(2).all(|w| g(w[1]) < g(w[0])));
}

#[test]
fn gamma_operator_decreasing() {
    let (s, _) = ref1();
    let ib = |v: f64| s.pair.u_b.inverse_marginal(v);
    let grid = log_grid(1e-8, 1e8, 60);
    let vals: Vec<f64> = grid.iter().map(|&y| s.kernel.gamma(ib, y).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
    let at_one = s.kernel.gamma(ib, 1.0).unwrap();
    assert!(s.kernel.gamma(ib, 1e8).unwrap() < 1e-3 * at_one);
    assert!(s.kernel.gamma(ib, 1e-8).unwrap() > 1e3 * at_one);
}

#[test]
fn xi_derivative_growth_bound() {
    // Fit C on [0.1, 10], then check a grid 100 times wider on each side.
    let (s, _) = ref1();
    let n1 = s.roots.n1;
    let n2 = s.roots.n2;
    let f = |v: f64| s.pair.u_b.conjugate(v);
    let weight = |y: f64| y.powf(n1 - 1.0) + y.powf(n2 - 1.0);
    let c = log_grid(0.1, 10.0, 30)
        .into_iter()
        .map(|y| s.kernel.xi_prime(f, y).unwrap().abs() / weight(y))
        .fold(0.0, f64::max);
    for y in log_grid(1e-3, 1e3, 60) {
        assert!(s.kernel.xi_prime(f, y).unwrap().abs() <= 1.01 * c * weight(y), "y {y}");
    }
}

#[test]
fn analytic_second_derivative_matches_differences() {
    let p = with_floor();
    let dual = p.dual();
    for y in log_grid(p.z_r() * 1.5, 50.0, 12) {
        if (y - 1.0).abs() < 0.05 {
            continue;
        }
        let d = central_differences(&|v| dual.j(v), y, 1e-3 * y).unwrap();
        let exact = dual.j_second(y, Regime::Working).unwrap();
        assert!((d.second - exact).abs() <= 1e-5 * exact.abs(), "y {y}");
        assert!((d.first - dual.j_prime(y).unwrap()).abs() <= 1e-7 * d.first.abs().max(1.0));
    }
}

#[test]
fn boundary_wealth_reports_retired_branch() {
    let p = &ref1().1;
    let d = p.optimal_policy(p.x_r()).unwrap();
    assert!(d.retired);
    assert_eq!(d.y_star, p.z_r());
    let t = p.retirement_wealth_threshold().unwrap();
    assert!(t.relative_gap() < 1e-8);
}

#[test]
fn custom_pair_matches_family() {
    let base: FelicityRef = Arc::new(crra(3.0).unwrap());
    let ub: FelicityRef = Arc::new(make_pre_retirement(base.clone(), 0.5).unwrap());
    let ua: FelicityRef = Arc::new(make_post_retirement(base, 1.5, 0.0).unwrap());
    let m = MarketParams::new(0.02, 0.07, 0.2, 0.03, 1.0).unwrap();
    let custom = Scenario::new(m, PreferencePair::custom(ub, ua), QuadOptions::default())
        .unwrap()
        .solve(1e-13)
        .unwrap();
    let family = Scenario::crra(m, 3.0, 0.5, 1.5, 0.0, QuadOptions::default())
        .unwrap()
        .solve(1e-13)
        .unwrap();
    assert_eq!(custom.z_r(), family.z_r());
}
