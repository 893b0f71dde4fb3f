//! Marginal benefit of work, the free boundary `z_R`, and the utility value of
//! lifetime labor `P`.
//!
//! Retirement is exercised the first time the dual process falls to `z_R`.
//! On `y > z_R` the option value is `P(y) = D y^{n2} + Xi_h(y)` with flow
//! `h(y) = u~_B(y) - u~_A(y) + eps y`; below it `P = 0`.

use crate::error::{Error, Result};
use crate::felicity::PreferencePair;
use crate::operators::{central_differences, ResolventKernel};
use crate::roots::{brent, expand_bracket, RootOptions};

/// Marginal benefit of work `Psi(y) = (u~_B(y) - u~_A(y)) / y + eps`.
pub fn marginal_benefit(pair: &PreferencePair, epsilon: f64, y: f64) -> f64 {
    (pair.u_b.conjugate(y) - pair.u_a.conjugate(y)) / y + epsilon
}

/// `h(y) = y Psi(y)`.
pub fn labor_flow(pair: &PreferencePair, epsilon: f64, y: f64) -> f64 {
    pair.u_b.conjugate(y) - pair.u_a.conjugate(y) + epsilon * y
}

/// Root of the strictly increasing `Psi`.
pub fn find_zbar(pair: &PreferencePair, epsilon: f64) -> Result<f64> {
    let psi = |y: f64| Ok(marginal_benefit(pair, epsilon, y));
    let (lo, hi) = expand_bracket(psi, 0.5, 2.0, 1e-12, 1e12, "z_bar").map_err(|e| match e {
        Error::NoBracket { lo, hi, .. } => Error::AssumptionViolation(format!(
            "marginal benefit of work has no sign change in [{lo:e}, {hi:e}]"
        )),
        other => other,
    })?;
    let psi_log = |t: f64| psi(t.exp());
    // Work in log space; the tolerance below is a relative width in y.
    let opts = RootOptions {
        rel_tol: 0.0,
        abs_tol: 1e-14,
        max_iter: 300,
    };
    Ok(brent(psi_log, lo.ln(), hi.ln(), &opts, "z_bar")?.exp())
}

/// `y^{n1} G(y) = int_0^inf e^{-n1 s} h(y e^s) ds`, which has the sign of `G`.
pub fn gee_scaled(pair: &PreferencePair, kernel: &ResolventKernel, y: f64) -> Result<f64> {
    let eps = kernel.market().epsilon();
    kernel.upper_integral(|v| labor_flow(pair, eps, v), y, -kernel.roots().n1)
}

/// `G(y) = int_y^inf nu^{-n1-1} h(nu) d nu`.
pub fn gee(pair: &PreferencePair, kernel: &ResolventKernel, y: f64) -> Result<f64> {
    Ok(gee_scaled(pair, kernel, y)? * y.powf(-kernel.roots().n1))
}

/// `D = -c int_0^{z} nu^{-n2-1} h(nu) d nu`.
pub fn boundary_coefficient(pair: &PreferencePair, kernel: &ResolventKernel, z: f64) -> Result<f64> {
    let eps = kernel.market().epsilon();
    let lower = kernel.lower_integral(|v| labor_flow(pair, eps, v), z, kernel.roots().n2)?;
    Ok(-kernel.prefactor() * z.powf(-kernel.roots().n2) * lower)
}

/// Solved optimal-stopping problem.
#[derive(Debug, Clone)]
pub struct RetirementSolution {
    pair: PreferencePair,
    kernel: ResolventKernel,
    z_bar: f64,
    z_r: f64,
    d: f64,
    /// `G(z_R) / G(z_bar)`.
    pub gee_residual: f64,
    /// `P(z_R+)` from the continuation formula.
    pub pasting_value: f64,
    /// `P'(z_R+)` from the continuation formula.
    pub pasting_slope: f64,
}

/// Locates `z_R` in `(0, z_bar)` where `G` vanishes and assembles `P`.
///
/// The lower end of the bracket starts at `z_bar / 2` and halves until `G`
/// turns negative; Brent's method then runs on the monotone bracket.
pub fn solve_free_boundary(
    pair: &PreferencePair,
    kernel: &ResolventKernel,
    root_tol: f64,
) -> Result<RetirementSolution> {
    let eps = kernel.market().epsilon();
    let mut kernel = kernel.clone();
    for b in pair.breakpoints() {
        kernel.add_breakpoint(b);
    }
    let z_bar = find_zbar(pair, eps)?;
    let g_bar = gee_scaled(pair, &kernel, z_bar)?;
    if !(g_bar > 0.0) {
        return Err(Error::AssumptionViolation(format!(
            "G(z_bar) = {g_bar:e} is not positive at z_bar = {z_bar:e}"
        )));
    }
    let mut lo = 0.5 * z_bar;
    let mut g_lo = gee_scaled(pair, &kernel, lo)?;
    let mut halvings = 0;
    while g_lo >= 0.0 {
        halvings += 1;
        if halvings > 200 {
            return Err(Error::AssumptionViolation(format!(
                "G has no sign change in ({lo:e}, {z_bar:e}); G(lo) = {g_lo:e}"
            )));
        }
        lo *= 0.5;
        g_lo = gee_scaled(pair, &kernel, lo)?;
    }
    let opts = RootOptions {
        rel_tol: root_tol,
        ..RootOptions::default()
    };
    let hi = (2.0 * lo).min(z_bar);
    let z_r = brent(|z| gee_scaled(pair, &kernel, z), lo, hi, &opts, "z_R")?;
    let d = boundary_coefficient(pair, &kernel, z_r)?;
    kernel.add_breakpoint(z_r);

    let n1 = kernel.roots().n1;
    let gee_residual = gee(pair, &kernel, z_r)? / (g_bar * z_bar.powf(-n1));
    let mut sol = RetirementSolution {
        pair: pair.clone(),
        kernel,
        z_bar,
        z_r,
        d,
        gee_residual,
        pasting_value: 0.0,
        pasting_slope: 0.0,
    };
    sol.pasting_value = sol.continuation_value(z_r)?;
    sol.pasting_slope = sol.continuation_slope(z_r)?;
    Ok(sol)
}

impl RetirementSolution {
    pub fn z_bar(&self) -> f64 {
        self.z_bar
    }

    pub fn z_r(&self) -> f64 {
        self.z_r
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn pair(&self) -> &PreferencePair {
        &self.pair
    }

    /// Kernel carrying the felicity breakpoints and `z_R`.
    pub fn kernel(&self) -> &ResolventKernel {
        &self.kernel
    }

    pub fn epsilon(&self) -> f64 {
        self.kernel.market().epsilon()
    }

    pub fn h(&self, y: f64) -> f64 {
        labor_flow(&self.pair, self.epsilon(), y)
    }

    pub fn psi(&self, y: f64) -> f64 {
        marginal_benefit(&self.pair, self.epsilon(), y)
    }

    /// `D y^{n2} + Xi_h(y)`, the continuation formula at any `y`.
    pub fn continuation_value(&self, y: f64) -> Result<f64> {
        let n2 = self.kernel.roots().n2;
        let eps = self.epsilon();
        let xi_h = self.kernel.xi(|v| labor_flow(&self.pair, eps, v), y)?;
        Ok(self.d * y.powf(n2) + xi_h)
    }

    /// `n2 D y^{n2-1} + Gamma_{I_A - I_B}(y) + eps / r`.
    pub fn continuation_slope(&self, y: f64) -> Result<f64> {
        let n2 = self.kernel.roots().n2;
        let g = self.kernel.gamma(|v| self.income_gap(v), y)?;
        Ok(n2 * self.d * y.powf(n2 - 1.0) + g + self.kernel.market().wage_annuity())
    }

    /// Second derivative of the continuation formula.
    pub fn continuation_curvature(&self, y: f64) -> Result<f64> {
        let n2 = self.kernel.roots().n2;
        let gp = self.kernel.gamma_prime(|v| self.income_gap(v), y)?;
        Ok(n2 * (n2 - 1.0) * self.d * y.powf(n2 - 2.0) + gp)
    }

    fn income_gap(&self, v: f64) -> f64 {
        self.pair.u_a.inverse_marginal(v) - self.pair.u_b.inverse_marginal(v)
    }

    /// `P(y)`: zero on the stopping region `y <= z_R`.
    pub fn labor_value(&self, y: f64) -> Result<f64> {
        if y <= self.z_r {
            Ok(0.0)
        } else {
            self.continuation_value(y)
        }
    }

    /// `P'(y)`: zero on the stopping region.
    pub fn labor_value_prime(&self, y: f64) -> Result<f64> {
        if y <= self.z_r {
            Ok(0.0)
        } else {
            self.continuation_slope(y)
        }
    }

    /// Largest smooth-pasting residual scaled by `max(1, eps / r)`.
    pub fn pasting_error(&self) -> f64 {
        let scale = self.kernel.market().wage_annuity().max(1.0);
        self.pasting_value.abs().max(self.pasting_slope.abs()) / scale
    }
}

/// Result of checking the variational inequality on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ViReport {
    /// Largest `|L P + h| / max(1, |h|)` over continuation points.
    pub max_continuation_residual: f64,
    /// Largest `h` over stopping points (should be `<= 0`).
    pub max_stopping_flow: f64,
    pub continuation_points: usize,
    pub stopping_points: usize,
    /// Probes dropped for lying within `10 h` of a breakpoint.
    pub skipped: usize,
}

impl ViReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_continuation_residual <= tol && self.max_stopping_flow <= 0.0
    }
}

/// Default relative step for the finite-difference generator.
pub const VI_STEP: f64 = 1e-2;

/// On `y < z_R` checks `h(y) <= 0`; on `y > z_R` evaluates `L P + h` by
/// fourth-order differences of `P` with step `h_rel * y`.
pub fn verify_variational_inequality(sol: &RetirementSolution, grid: &[f64], h_rel: f64) -> Result<ViReport> {
    let mut report = ViReport {
        max_continuation_residual: 0.0,
        max_stopping_flow: f64::NEG_INFINITY,
        continuation_points: 0,
        stopping_points: 0,
        skipped: 0,
    };
    let kernel = sol.kernel();
    for &y in grid {
        let step = h_rel * y;
        if kernel.check_probe(y, step).is_err() {
            report.skipped += 1;
            continue;
        }
        let flow = sol.h(y);
        if y < sol.z_r() {
            report.stopping_points += 1;
            report.max_stopping_flow = report.max_stopping_flow.max(flow);
        } else {
            let d = central_differences(&|v| sol.labor_value(v), y, step)?;
            let resid = kernel.generator(y, d.value, d.first, d.second) + flow;
            report.continuation_points += 1;
            report.max_continuation_residual =
                report.max_continuation_residual.max(resid.abs() / flow.abs().max(1.0));
        }
    }
    Ok(report)
}
