//! Market environment and the law of the dual process.
//!
//! The dual (marginal-value) process is `Y_t = y e^{rho t} xi_t`, a geometric
//! Brownian motion with log-drift `rho - r - theta^2/2` and volatility `-theta`.
//! Its generator `(theta^2/2) y^2 d^2/dy^2 + (rho - r) y d/dy - rho` acting on
//! `y^n` gives the characteristic quadratic whose roots drive every resolvent
//! formula in the crate.

use crate::error::{require, Error, Result};

/// Constant market and preference-environment parameters, all per year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    r: f64,
    mu: f64,
    sigma: f64,
    rho: f64,
    epsilon: f64,
    theta: f64,
}

impl MarketParams {
    /// Validates `r, sigma, rho, epsilon > 0` and derives the Sharpe ratio.
    pub fn new(r: f64, mu: f64, sigma: f64, rho: f64, epsilon: f64) -> Result<Self> {
        require(r.is_finite() && r > 0.0, "r", r, "risk-free rate must be positive")?;
        require(mu.is_finite(), "mu", mu, "drift must be finite")?;
        require(sigma.is_finite() && sigma > 0.0, "sigma", sigma, "volatility must be positive")?;
        require(rho.is_finite() && rho > 0.0, "rho", rho, "discount rate must be positive")?;
        require(
            epsilon.is_finite() && epsilon > 0.0,
            "epsilon",
            epsilon,
            "wage rate must be positive",
        )?;
        Ok(Self {
            r,
            mu,
            sigma,
            rho,
            epsilon,
            theta: (mu - r) / sigma,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Sharpe ratio `(mu - r) / sigma`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Same market with a different wage rate.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.r, self.mu, self.sigma, self.rho, epsilon)
    }

    /// Present value of a perpetual wage stream, `epsilon / r`; also the
    /// natural borrowing limit in absolute value.
    pub fn wage_annuity(&self) -> f64 {
        self.epsilon / self.r
    }

    /// Coefficients `(a, b, c)` of `a n^2 + b n + c`.
    pub fn characteristic_coefficients(&self) -> (f64, f64, f64) {
        let half_theta_sq = 0.5 * self.theta * self.theta;
        (half_theta_sq, self.rho - self.r - half_theta_sq, -self.rho)
    }

    /// Evaluates the characteristic polynomial at `n`.
    pub fn characteristic(&self, n: f64) -> f64 {
        let (a, b, c) = self.characteristic_coefficients();
        (a * n + b) * n + c
    }
}

/// Roots of the characteristic quadratic: `n1 > 1` and `n2 < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticRoots {
    pub n1: f64,
    pub n2: f64,
}

/// Solves `(theta^2/2) n^2 + (rho - r - theta^2/2) n - rho = 0`.
///
/// The larger-magnitude root comes from the quadratic formula with the sign
/// chosen to avoid cancellation; the other follows from the product of roots.
pub fn solve_characteristic_roots(params: &MarketParams) -> Result<QuadraticRoots> {
    if params.theta() == 0.0 {
        return Err(Error::DegenerateMarket);
    }
    let (a, b, c) = params.characteristic_coefficients();
    let disc = b * b - 4.0 * a * c;
    let sign = if b >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (b + sign * disc.sqrt());
    let (x1, x2) = (q / a, c / q);
    let (n1, n2) = if x1 > x2 { (x1, x2) } else { (x2, x1) };
    Ok(QuadraticRoots { n1, n2 })
}

/// Merton constant of a CRRA agent together with its admissibility flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonConstant {
    pub value: f64,
}

impl MertonConstant {
    /// Positive Merton constant is equivalent to CRRA integrability.
    pub fn is_admissible(&self) -> bool {
        self.value > 0.0
    }
}

/// `M = r + (rho - r)/gamma + ((gamma - 1)/gamma^2)(theta^2/2)`.
pub fn merton_constant(params: &MarketParams, gamma: f64) -> Result<MertonConstant> {
    require(gamma.is_finite() && gamma > 0.0, "gamma", gamma, "risk aversion must be positive")?;
    require(gamma != 1.0, "gamma", gamma, "log utility (gamma = 1) is not supported")?;
    let half_theta_sq = 0.5 * params.theta() * params.theta();
    let value = params.r() + (params.rho() - params.r()) / gamma
        + (gamma - 1.0) / (gamma * gamma) * half_theta_sq;
    Ok(MertonConstant { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ref1() -> MarketParams {
        MarketParams::new(0.02, 0.07, 0.20, 0.03, 1.0).unwrap()
    }

    #[test]
    fn ref1_roots_match_oracle() {
        let roots = solve_characteristic_roots(&ref1()).unwrap();
        assert!((roots.n1 - 1.377_111_372_997_133_8).abs() < 1e-12);
        assert!((roots.n2 + 0.697_111_372_997_133_8).abs() < 1e-12);
        assert!((roots.n1 * roots.n2 + 0.96).abs() < 1e-12);
    }

    #[test]
    fn theta_is_exact() {
        let m = ref1();
        assert_eq!(m.theta(), (0.07 - 0.02) / 0.20);
    }

    #[test]
    fn zero_sharpe_is_degenerate() {
        let m = MarketParams::new(0.03, 0.03, 0.2, 0.04, 1.0).unwrap();
        assert_eq!(solve_characteristic_roots(&m), Err(Error::DegenerateMarket));
    }

    #[test]
    fn rho_equal_r_with_matching_volatility() {
        // rho = r and theta^2/2 = rho: quadratic is rho n^2 - rho n - rho.
        let rho: f64 = 0.04;
        let theta = (2.0 * rho).sqrt();
        let m = MarketParams::new(rho, rho + theta * 0.3, 0.3, rho, 1.0).unwrap();
        let roots = solve_characteristic_roots(&m).unwrap();
        assert!(m.characteristic(roots.n1).abs() <= 1e-12 * rho);
        assert!(m.characteristic(roots.n2).abs() <= 1e-12 * rho);
        let golden = 0.5 * (1.0 + 5f64.sqrt());
        assert!((roots.n1 - golden).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(MarketParams::new(0.0, 0.07, 0.2, 0.03, 1.0).is_err());
        assert!(MarketParams::new(0.02, 0.07, 0.0, 0.03, 1.0).is_err());
        assert!(MarketParams::new(0.02, 0.07, 0.2, -0.01, 1.0).is_err());
        assert!(MarketParams::new(0.02, 0.07, 0.2, 0.03, 0.0).is_err());
        assert!(MarketParams::new(0.02, f64::NAN, 0.2, 0.03, 1.0).is_err());
    }

    #[test]
    fn merton_ref1() {
        let m = merton_constant(&ref1(), 2.0).unwrap();
        assert!((m.value - 0.0328125).abs() < 1e-15);
        assert!(m.is_admissible());
        assert!(merton_constant(&ref1(), 1.0).is_err());
        assert!(merton_constant(&ref1(), 0.0).is_err());
    }

    #[test]
    fn merton_sign_change_on_grid() {
        // Scan gamma in (0, 1): M(gamma) = 2 rho - r - theta^2 at gamma = 1/2 for REF1
        // is negative; a large rho flips the sign.
        let m = merton_constant(&ref1(), 0.5).unwrap();
        assert!((m.value - (2.0 * 0.03 - 0.02 - 0.0625)).abs() < 1e-15);
        assert!(!m.is_admissible());
        let flipped = MarketParams::new(0.02, 0.07, 0.2, 0.06, 1.0).unwrap();
        assert!(merton_constant(&flipped, 0.5).unwrap().is_admissible());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn roots_satisfy_quadratic_and_vieta(
                r in 0.001f64..0.1,
                excess in prop_oneof![-0.3f64..-0.005, 0.005f64..0.3],
                sigma in 0.05f64..0.6,
                rho in 0.001f64..0.2,
            ) {
                let m = MarketParams::new(r, r + excess, sigma, rho, 1.0).unwrap();
                let roots = solve_characteristic_roots(&m).unwrap();
                let (a, b, c) = m.characteristic_coefficients();
                prop_assert!(roots.n1 > 1.0);
                prop_assert!(roots.n2 < 0.0);
                let tol = 1e-12 * rho.max(1.0);
                prop_assert!(m.characteristic(roots.n1).abs() <= tol * roots.n1.abs().max(1.0));
                prop_assert!(m.characteristic(roots.n2).abs() <= tol * roots.n2.abs().max(1.0));
                prop_assert!(((roots.n1 * roots.n2) - c / a).abs() <= 1e-12 * (c / a).abs());
                prop_assert!(((roots.n1 + roots.n2) + b / a).abs() <= 1e-12 * (b / a).abs().max(1.0));
            }
        }
    }
}
