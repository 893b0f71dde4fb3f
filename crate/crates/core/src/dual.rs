//! Dual value function `J = J_A + P` with analytic derivatives.

use std::sync::Arc;

use crate::error::Result;
use crate::felicity::PreferencePair;
use crate::operators::ResolventKernel;
use crate::retirement::RetirementSolution;

/// Which side of the free boundary a one-sided quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `y > z_R`; at `y = z_R` the right limit.
    Working,
    /// `y <= z_R`; at `y = z_R` the left limit.
    Retired,
}

impl Regime {
    /// Retired on and below the boundary.
    pub fn at(y: f64, z_r: f64) -> Self {
        if y <= z_r {
            Regime::Retired
        } else {
            Regime::Working
        }
    }
}

/// `J_A(y) = Xi_{u~_A}(y)`.
pub fn dual_after(pair: &PreferencePair, kernel: &ResolventKernel, y: f64) -> Result<f64> {
    kernel.xi(|v| pair.u_a.conjugate(v), y)
}

/// `J_A'(y) = -Gamma_{I_A}(y)`.
pub fn dual_after_prime(pair: &PreferencePair, kernel: &ResolventKernel, y: f64) -> Result<f64> {
    Ok(-kernel.gamma(|v| pair.u_a.inverse_marginal(v), y)?)
}

/// `J_A''(y) = -Gamma_{I_A}'(y)`.
pub fn dual_after_second(pair: &PreferencePair, kernel: &ResolventKernel, y: f64) -> Result<f64> {
    Ok(-kernel.gamma_prime(|v| pair.u_a.inverse_marginal(v), y)?)
}

#[derive(Debug, Clone)]
pub struct DualValueFunction {
    sol: Arc<RetirementSolution>,
}

impl DualValueFunction {
    pub fn new(sol: RetirementSolution) -> Self {
        Self { sol: Arc::new(sol) }
    }

    pub fn solution(&self) -> &RetirementSolution {
        &self.sol
    }

    pub fn z_r(&self) -> f64 {
        self.sol.z_r()
    }

    fn kernel(&self) -> &ResolventKernel {
        self.sol.kernel()
    }

    fn pair(&self) -> &PreferencePair {
        self.sol.pair()
    }

    pub fn j_a(&self, y: f64) -> Result<f64> {
        dual_after(self.pair(), self.kernel(), y)
    }

    pub fn j_a_prime(&self, y: f64) -> Result<f64> {
        dual_after_prime(self.pair(), self.kernel(), y)
    }

    pub fn j_a_second(&self, y: f64) -> Result<f64> {
        dual_after_second(self.pair(), self.kernel(), y)
    }

    /// `D y^{n2} + Xi_{u~_B}(y) + eps y / r`, valid on `y >= z_R`.
    pub fn j_working(&self, y: f64) -> Result<f64> {
        let k = self.kernel();
        let xi_b = k.xi(|v| self.pair().u_b.conjugate(v), y)?;
        Ok(self.sol.d() * y.powf(k.roots().n2) + xi_b + k.market().wage_annuity() * y)
    }

    pub fn j_working_prime(&self, y: f64) -> Result<f64> {
        let k = self.kernel();
        let n2 = k.roots().n2;
        let g_b = k.gamma(|v| self.pair().u_b.inverse_marginal(v), y)?;
        Ok(n2 * self.sol.d() * y.powf(n2 - 1.0) - g_b + k.market().wage_annuity())
    }

    pub fn j_working_second(&self, y: f64) -> Result<f64> {
        let k = self.kernel();
        let n2 = k.roots().n2;
        let gp_b = k.gamma_prime(|v| self.pair().u_b.inverse_marginal(v), y)?;
        Ok(n2 * (n2 - 1.0) * self.sol.d() * y.powf(n2 - 2.0) - gp_b)
    }

    pub fn j(&self, y: f64) -> Result<f64> {
        match Regime::at(y, self.z_r()) {
            Regime::Retired => self.j_a(y),
            Regime::Working => self.j_working(y),
        }
    }

    pub fn j_prime(&self, y: f64) -> Result<f64> {
        match Regime::at(y, self.z_r()) {
            Regime::Retired => self.j_a_prime(y),
            Regime::Working => self.j_working_prime(y),
        }
    }

    /// One-sided second derivative; the caller chooses the side.
    pub fn j_second(&self, y: f64, side: Regime) -> Result<f64> {
        match side {
            Regime::Retired => self.j_a_second(y),
            Regime::Working => self.j_working_second(y),
        }
    }

    /// Both one-sided second derivatives at the kink, `(left, right)`.
    pub fn j_second_at_kink(&self) -> Result<(f64, f64)> {
        let z = self.z_r();
        Ok((self.j_a_second(z)?, self.j_working_second(z)?))
    }
}
