//! Closed forms for a CRRA base felicity, used as an independent oracle for
//! the quadrature pipeline.
//!
//! With cutoff `c* = k b^{-gamma}` the post-retirement dual value is `phi_1`
//! below `c*` and `phi_2` above it, and the free boundary falls into Case 1
//! (`z_R < c*`, equivalently `G(c*) > 0`) or Case 2 (`z_R >= c*`).

use crate::error::{Error, Result};
use crate::felicity::PreferencePair;
use crate::market::{merton_constant, solve_characteristic_roots, MarketParams, QuadraticRoots};
use crate::roots::{brent, RootOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrraScenario {
    pub gamma: f64,
    pub l: f64,
    pub k: f64,
    pub b: f64,
    pub market: MarketParams,
    pub roots: QuadraticRoots,
    /// Merton constant, positive.
    pub m: f64,
    /// `k b^{-gamma}`, infinite when `b = 0`.
    pub cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCase {
    /// `z_R < c*`.
    One,
    /// `z_R >= c*`.
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrraBoundary {
    pub case: BoundaryCase,
    pub z_r: f64,
    pub d: f64,
    /// `G(c*)`; `None` when the cutoff is infinite.
    pub gee_at_cutoff: Option<f64>,
    /// Case 2 only: `D` read literally from the printed display, whose last
    /// bracket carries a `+-` sign. Kept for comparison with `d`.
    pub d_printed: Option<f64>,
}

impl CrraBoundary {
    /// Relative gap between the literal printed Case 2 `D` and the derived one.
    pub fn printed_mismatch(&self) -> Option<f64> {
        self.d_printed.map(|p| (p - self.d).abs() / self.d.abs())
    }
}

impl CrraScenario {
    pub fn new(market: MarketParams, gamma: f64, l: f64, k: f64, b: f64) -> Result<Self> {
        // Reuse the family validation for (l, k, b) and gamma.
        PreferencePair::crra_family(gamma, l, k, b)?;
        let roots = solve_characteristic_roots(&market)?;
        let m = merton_constant(&market, gamma)?;
        if !m.is_admissible() {
            return Err(Error::AssumptionViolation(format!(
                "Merton constant {:e} is not positive for gamma = {gamma}",
                m.value
            )));
        }
        let cutoff = if b == 0.0 { f64::INFINITY } else { k * b.powf(-gamma) };
        Ok(Self {
            gamma,
            l,
            k,
            b,
            market,
            roots,
            m: m.value,
            cutoff,
        })
    }

    pub fn pair(&self) -> Result<PreferencePair> {
        PreferencePair::crra_family(self.gamma, self.l, self.k, self.b)
    }

    fn prefactor(&self) -> f64 {
        let t = self.market.theta();
        2.0 / (t * t * (self.roots.n1 - self.roots.n2))
    }

    /// `u(b) = b^{1-gamma} / (1 - gamma)`.
    fn u_b(&self) -> f64 {
        self.b.powf(1.0 - self.gamma) / (1.0 - self.gamma)
    }

    /// `Xi_{u~_B}(y) = (1/M)(gamma/(1-gamma)) y^{-(1-gamma)/gamma} - l / rho`.
    pub fn xi_ub(&self, y: f64) -> f64 {
        let g = self.gamma;
        g / (1.0 - g) * y.powf(-(1.0 - g) / g) / self.m - self.l / self.market.rho()
    }

    fn phi_coefficients(&self) -> (f64, f64) {
        let (g, r, rho, m) = (self.gamma, self.market.r(), self.market.rho(), self.m);
        let (n1, n2) = (self.roots.n1, self.roots.n2);
        let bracket = |n: f64| (g * n / (1.0 - g) + 1.0) / m + (n - 1.0) / r - n / (rho * (1.0 - g));
        (bracket(n2) / (n1 - n2), bracket(n1) / (n1 - n2))
    }

    /// `Xi_{u~_A}(y)`: `phi_1` for `y <= c*`, `phi_2` above.
    pub fn xi_ua(&self, y: f64) -> f64 {
        let (g, r, rho) = (self.gamma, self.market.r(), self.market.rho());
        let (n1, n2) = (self.roots.n1, self.roots.n2);
        let (c1, c2) = self.phi_coefficients();
        let z = y / self.k;
        let b = self.b;
        if y <= self.cutoff {
            let homogeneous = if b == 0.0 {
                0.0
            } else {
                c1 * b.powf(1.0 - g + g * n1) * z.powf(n1)
            };
            homogeneous + g / (1.0 - g) * z.powf(-(1.0 - g) / g) / self.m + b / r * z
        } else {
            c2 * b.powf(1.0 - g + g * n2) * z.powf(n2) + b.powf(1.0 - g) / (rho * (1.0 - g))
        }
    }

    /// Derivative of [`Self::xi_ua`].
    pub fn xi_ua_prime(&self, y: f64) -> f64 {
        let (g, r) = (self.gamma, self.market.r());
        let (n1, n2) = (self.roots.n1, self.roots.n2);
        let (c1, c2) = self.phi_coefficients();
        let z = y / self.k;
        let b = self.b;
        let dz = if y <= self.cutoff {
            let homogeneous = if b == 0.0 {
                0.0
            } else {
                c1 * b.powf(1.0 - g + g * n1) * n1 * z.powf(n1 - 1.0)
            };
            homogeneous - z.powf(-1.0 / g) / self.m + b / r
        } else {
            c2 * b.powf(1.0 - g + g * n2) * n2 * z.powf(n2 - 1.0)
        };
        dz / self.k
    }

    // Antiderivatives of nu^{-n-1} h(nu) below (F1) and above (F2) the cutoff.
    fn below(&self, n: f64, nu: f64) -> f64 {
        let g = self.gamma;
        let e = 1.0 - n - 1.0 / g;
        g / (1.0 - g) * (1.0 - self.k.powf((1.0 - g) / g)) * nu.powf(e) / e + self.l * nu.powf(-n) / n
            - (self.market.epsilon() - self.b / self.k) * nu.powf(1.0 - n) / (n - 1.0)
    }

    fn above(&self, n: f64, nu: f64) -> f64 {
        let g = self.gamma;
        let e = 1.0 - n - 1.0 / g;
        g / (1.0 - g) * nu.powf(e) / e + (self.l + self.u_b()) * nu.powf(-n) / n
            - self.market.epsilon() * nu.powf(1.0 - n) / (n - 1.0)
    }

    /// `G(z) = int_z^inf nu^{-n1-1} h(nu) d nu` in closed form.
    pub fn gee(&self, z: f64) -> f64 {
        let n1 = self.roots.n1;
        let c = self.cutoff;
        if c.is_infinite() {
            -self.below(n1, z)
        } else if z < c {
            self.below(n1, c) - self.below(n1, z) - self.above(n1, c)
        } else {
            -self.above(n1, z)
        }
    }

    /// Free boundary and coefficient from the Case 1 / Case 2 equations.
    pub fn free_boundary(&self) -> Result<CrraBoundary> {
        let n1 = self.roots.n1;
        let n2 = self.roots.n2;
        let c = self.cutoff;
        let pref = self.prefactor();
        let opts = RootOptions {
            rel_tol: 0.0,
            abs_tol: 1e-15,
            max_iter: 400,
        };
        let scaled = |t: f64| {
            let z = t.exp();
            Ok(self.gee(z) * z.powf(n1))
        };
        let gee_at_cutoff = c.is_finite().then(|| self.gee(c));
        let case = match gee_at_cutoff {
            Some(g) if g <= 0.0 => BoundaryCase::Two,
            _ => BoundaryCase::One,
        };
        let (lo, hi) = match case {
            BoundaryCase::One => {
                let mut hi = if c.is_finite() { c.ln() } else { 0.0 };
                while scaled(hi)? <= 0.0 {
                    hi += 1.0;
                    if hi > 700.0 {
                        return Err(Error::NoBracket { what: "crra z_R", lo: 0.0, hi: hi.exp() });
                    }
                }
                let mut lo = hi - 1.0;
                while scaled(lo)? >= 0.0 {
                    lo -= 1.0;
                    if lo < -700.0 {
                        return Err(Error::NoBracket { what: "crra z_R", lo: lo.exp(), hi: hi.exp() });
                    }
                }
                (lo, hi)
            }
            BoundaryCase::Two => {
                let lo = c.ln();
                let mut hi = lo + 1.0;
                while scaled(hi)? <= 0.0 {
                    hi += 1.0;
                    if hi > 700.0 {
                        return Err(Error::NoBracket { what: "crra z_R", lo: c, hi: hi.exp() });
                    }
                }
                (lo, hi)
            }
        };
        let z_r = brent(scaled, lo, hi, &opts, "crra z_R")?.exp();
        let (d, d_printed) = match case {
            BoundaryCase::One => (-pref * self.below(n2, z_r), None),
            BoundaryCase::Two => {
                let h1c = self.below(n2, c);
                let h2z = self.above(n2, z_r);
                let h2c = self.above(n2, c);
                (-pref * (h1c + h2z - h2c), Some(-pref * (h1c + h2z + h2c)))
            }
        };
        Ok(CrraBoundary {
            case,
            z_r,
            d,
            gee_at_cutoff,
            d_printed,
        })
    }
}
