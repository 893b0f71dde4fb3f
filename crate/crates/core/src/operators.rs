//! Resolvent operators of the dual process.
//!
//! `Xi_f(y) = E int_0^inf e^{-rho t} f(Y_t^y) dt` and its companion `Gamma_g`,
//! written after the substitutions `nu = y e^{-s}` (below `y`) and
//! `nu = y e^{s}` (above `y`):
//!
//! ```text
//! Xi_f(y)    = c [ int_0^inf e^{n2 s} f(y e^{-s}) ds + int_0^inf e^{-n1 s} f(y e^{s}) ds ]
//! Gamma_g(y) = c [ int_0^inf e^{(n2-1) s} g(y e^{-s}) ds + int_0^inf e^{(1-n1) s} g(y e^{s}) ds ]
//! ```
//!
//! with `c = 2 / (theta^2 (n1 - n2))`. Both derivatives follow from the same
//! two integrals because the boundary terms cancel.

use crate::error::{Error, Result};
use crate::market::{MarketParams, QuadraticRoots};
use crate::quadrature::{integrate_half_line, QuadOptions};

const NU_MIN: f64 = 1e-300;
const NU_MAX: f64 = 1e300;

/// The two half-line integrals behind one operator value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parts {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventKernel {
    market: MarketParams,
    roots: QuadraticRoots,
    prefactor: f64,
    breakpoints: Vec<f64>,
    opts: QuadOptions,
}

impl ResolventKernel {
    pub fn new(market: MarketParams, roots: QuadraticRoots, breakpoints: &[f64], opts: QuadOptions) -> Self {
        let theta = market.theta();
        let mut kernel = Self {
            market,
            roots,
            prefactor: 2.0 / (theta * theta * (roots.n1 - roots.n2)),
            breakpoints: Vec::new(),
            opts,
        };
        for &b in breakpoints {
            kernel.add_breakpoint(b);
        }
        kernel
    }

    /// Inserts a kink location, keeping the list sorted and positive.
    pub fn add_breakpoint(&mut self, b: f64) {
        if b.is_finite() && b > 0.0 && !self.breakpoints.contains(&b) {
            self.breakpoints.push(b);
            self.breakpoints.sort_by(|x, y| x.total_cmp(y));
        }
    }

    pub fn with_breakpoint(&self, b: f64) -> Self {
        let mut k = self.clone();
        k.add_breakpoint(b);
        k
    }

    pub fn market(&self) -> &MarketParams {
        &self.market
    }

    pub fn roots(&self) -> &QuadraticRoots {
        &self.roots
    }

    pub fn theta(&self) -> f64 {
        self.market.theta()
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn options(&self) -> &QuadOptions {
        &self.opts
    }

    pub fn with_options(&self, opts: QuadOptions) -> Self {
        Self {
            opts,
            ..self.clone()
        }
    }

    fn lower_splits(&self, y: f64) -> Vec<f64> {
        self.breakpoints
            .iter()
            .filter(|&&b| b < y)
            .map(|&b| (y / b).ln())
            .collect()
    }

    fn upper_splits(&self, y: f64) -> Vec<f64> {
        self.breakpoints
            .iter()
            .filter(|&&b| b > y)
            .map(|&b| (b / y).ln())
            .collect()
    }

    /// `int_0^inf e^{a s} f(y e^{-s}) ds`.
    pub fn lower_integral<F: Fn(f64) -> f64>(&self, f: F, y: f64, a: f64) -> Result<f64> {
        check_y(y)?;
        integrate_half_line(
            |s: f64| {
                let w = (a * s).exp();
                if w == 0.0 {
                    0.0
                } else {
                    w * f(y * (-s).exp())
                }
            },
            &self.lower_splits(y),
            (y / NU_MIN).ln(),
            &self.opts,
        )
    }

    /// `int_0^inf e^{b s} f(y e^{s}) ds`.
    pub fn upper_integral<F: Fn(f64) -> f64>(&self, f: F, y: f64, b: f64) -> Result<f64> {
        check_y(y)?;
        integrate_half_line(
            |s: f64| {
                let w = (b * s).exp();
                if w == 0.0 {
                    0.0
                } else {
                    w * f(y * s.exp())
                }
            },
            &self.upper_splits(y),
            (NU_MAX / y).ln(),
            &self.opts,
        )
    }

    pub fn weighted_parts<F: Fn(f64) -> f64>(&self, f: F, y: f64, a: f64, b: f64) -> Result<Parts> {
        Ok(Parts {
            lower: self.lower_integral(&f, y, a)?,
            upper: self.upper_integral(&f, y, b)?,
        })
    }

    pub fn xi_parts<F: Fn(f64) -> f64>(&self, f: F, y: f64) -> Result<Parts> {
        self.weighted_parts(f, y, self.roots.n2, -self.roots.n1)
    }

    pub fn gamma_parts<F: Fn(f64) -> f64>(&self, g: F, y: f64) -> Result<Parts> {
        self.weighted_parts(g, y, self.roots.n2 - 1.0, 1.0 - self.roots.n1)
    }

    pub fn xi_from(&self, p: Parts) -> f64 {
        self.prefactor * (p.lower + p.upper)
    }

    pub fn xi_prime_from(&self, p: Parts, y: f64) -> f64 {
        self.prefactor * (self.roots.n2 * p.lower + self.roots.n1 * p.upper) / y
    }

    pub fn gamma_from(&self, p: Parts) -> f64 {
        self.prefactor * (p.lower + p.upper)
    }

    pub fn gamma_prime_from(&self, p: Parts, y: f64) -> f64 {
        self.prefactor * ((self.roots.n2 - 1.0) * p.lower + (self.roots.n1 - 1.0) * p.upper) / y
    }

    /// `Xi_f(y)`.
    pub fn xi<F: Fn(f64) -> f64>(&self, f: F, y: f64) -> Result<f64> {
        Ok(self.xi_from(self.xi_parts(f, y)?))
    }

    /// `Xi_f'(y)` from the integral representation.
    pub fn xi_prime<F: Fn(f64) -> f64>(&self, f: F, y: f64) -> Result<f64> {
        Ok(self.xi_prime_from(self.xi_parts(f, y)?, y))
    }

    /// `Gamma_g(y)`.
    pub fn gamma<F: Fn(f64) -> f64>(&self, g: F, y: f64) -> Result<f64> {
        Ok(self.gamma_from(self.gamma_parts(g, y)?))
    }

    /// `Gamma_g'(y)` from the integral representation.
    pub fn gamma_prime<F: Fn(f64) -> f64>(&self, g: F, y: f64) -> Result<f64> {
        Ok(self.gamma_prime_from(self.gamma_parts(g, y)?, y))
    }

    /// `(theta^2/2) y^2 v'' + (rho - r) y v' - rho v`.
    pub fn generator(&self, y: f64, v: f64, v1: f64, v2: f64) -> f64 {
        let half_theta_sq = 0.5 * self.theta() * self.theta();
        half_theta_sq * y * y * v2 + (self.market.rho() - self.market.r()) * y * v1 - self.market.rho() * v
    }

    /// Rejects probes within `10 h` of a breakpoint.
    pub fn check_probe(&self, y: f64, h: f64) -> Result<()> {
        for &b in &self.breakpoints {
            if (y - b).abs() <= 10.0 * h {
                return Err(Error::ProbeNearBreakpoint {
                    y,
                    breakpoint: b,
                    margin: 10.0 * h,
                });
            }
        }
        Ok(())
    }

    /// `L Xi_f + f` at `y` from fourth-order central differences of `xi_f`
    /// with step `h_rel * y`.
    pub fn hjb_residual<F, X>(&self, f: F, xi_f: X, y: f64, h_rel: f64) -> Result<f64>
    where
        F: Fn(f64) -> f64,
        X: Fn(f64) -> Result<f64>,
    {
        let h = h_rel * y;
        self.check_probe(y, h)?;
        let d = central_differences(&xi_f, y, h)?;
        Ok(self.generator(y, d.value, d.first, d.second) + f(y))
    }
}

fn check_y(y: f64) -> Result<()> {
    if y.is_finite() && y > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "y",
            value: y,
            reason: "marginal value must be positive and finite",
        })
    }
}

/// Value and fourth-order central first/second differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Differences {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

pub fn central_differences<X: Fn(f64) -> Result<f64>>(g: &X, y: f64, h: f64) -> Result<Differences> {
    let f0 = g(y)?;
    let fp1 = g(y + h)?;
    let fm1 = g(y - h)?;
    let fp2 = g(y + 2.0 * h)?;
    let fm2 = g(y - 2.0 * h)?;
    Ok(Differences {
        value: f0,
        first: (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h),
        second: (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::felicity::{crra, log_grid, Felicity};
    use crate::market::solve_characteristic_roots;

    fn kernel() -> ResolventKernel {
        let m = MarketParams::new(0.02, 0.07, 0.2, 0.03, 1.0).unwrap();
        let roots = solve_characteristic_roots(&m).unwrap();
        ResolventKernel::new(m, roots, &[], QuadOptions::default())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn constants_and_linear() {
        let k = kernel();
        for y in [1e-3, 0.5, 1.0, 40.0] {
            assert!(rel(k.xi(|_| 1.0, y).unwrap(), 1.0 / 0.03) < 1e-10);
            assert!(rel(k.xi(|v| v, y).unwrap(), y / 0.02) < 1e-10);
            assert_eq!(k.xi(|_| 0.0, y).unwrap(), 0.0);
            assert_eq!(k.gamma(|_| 0.0, y).unwrap(), 0.0);
        }
    }

    #[test]
    fn crra_closed_forms() {
        let k = kernel();
        let u = crra(2.0).unwrap();
        let m = 0.0328125;
        assert!(rel(k.xi(|v| u.conjugate(v), 1.0).unwrap(), -60.952_380_952_380_952) < 1e-10);
        assert!(rel(k.gamma(|v| u.inverse_marginal(v), 1.0).unwrap(), 30.476_190_476_190_476) < 1e-10);
        for y in log_grid(1e-4, 1e4, 9) {
            let g = k.gamma(|v| u.inverse_marginal(v), y).unwrap();
            assert!(rel(g, y.powf(-0.5) / m) < 1e-10);
            let gp = k.gamma_prime(|v| u.inverse_marginal(v), y).unwrap();
            assert!(rel(gp, -0.5 * y.powf(-1.5) / m) < 1e-9);
            let xp = k.xi_prime(|v| u.conjugate(v), y).unwrap();
            assert!(rel(xp, -g) < 1e-9);
        }
    }

    #[test]
    fn hjb_residual_examples() {
        let k = kernel();
        let u = crra(2.0).unwrap();
        let r = k
            .hjb_residual(|v| u.conjugate(v), |v| k.xi(|t| u.conjugate(t), v), 1.0, 1e-2)
            .unwrap();
        assert!(r.abs() < 1e-4 * 2.0);
        let r = k.hjb_residual(|_| 1.0, |v| k.xi(|_| 1.0, v), 3.0, 1e-2).unwrap();
        assert!(r.abs() < 1e-8);
        let r = k.hjb_residual(|v| v, |v| k.xi(|t| t, v), 1.0, 1e-2).unwrap();
        assert!(r.abs() < 1e-8);
    }

    #[test]
    fn probe_near_breakpoint_refused() {
        let k = kernel().with_breakpoint(1.0);
        let e = k.hjb_residual(|_| 1.0, |v| k.xi(|_| 1.0, v), 1.05, 1e-2);
        assert!(matches!(e, Err(Error::ProbeNearBreakpoint { .. })));
    }

    #[test]
    fn kinked_integrand_with_breakpoint() {
        // f(v) = max(v - 1, 0): Xi equals the perpetual call on the dual process.
        let k = kernel().with_breakpoint(1.0);
        let y = 0.5;
        let v = k.xi(|t| (t - 1.0).max(0.0), y).unwrap();
        // Upper integral only: c y^{n1} int_1^inf nu^{-n1-1} (nu - 1) d nu.
        let n1 = k.roots().n1;
        let exact = k.prefactor() * y.powf(n1) * (1.0 / (n1 - 1.0) - 1.0 / n1);
        assert!(rel(v, exact) < 1e-10);
    }

    #[test]
    fn rejects_non_positive_y() {
        assert!(kernel().xi(|_| 1.0, 0.0).is_err());
    }
}
