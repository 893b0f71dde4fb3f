//! Primal quantities recovered from the dual: wealth, multiplier, consumption,
//! portfolio, value, and the retirement wealth threshold.

use crate::dual::{DualValueFunction, Regime};
use crate::error::{Error, Result};
use crate::felicity::{log_grid, PreferencePair};
use crate::market::MarketParams;
use crate::operators::ResolventKernel;
use crate::retirement::{solve_free_boundary, RetirementSolution};
use crate::roots::{brent, expand_bracket, RootOptions};

const Y_MIN: f64 = 1e-12;
const Y_MAX: f64 = 1e12;

/// Optimal decision at a given financial wealth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyDecision {
    pub x: f64,
    pub y_star: f64,
    pub retired: bool,
    /// Consumption rate.
    pub c: f64,
    /// Amount held in the risky asset.
    pub pi: f64,
    /// Value function `V(x) = J(y*) + y* x`.
    pub value: f64,
}

/// Both expressions for the retirement wealth threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WealthThreshold {
    /// `-J_A'(z_R)`.
    pub x_r: f64,
    /// `-J'(z_R+)` from the working branch.
    pub x_r_working: f64,
}

impl WealthThreshold {
    pub fn relative_gap(&self) -> f64 {
        (self.x_r - self.x_r_working).abs() / self.x_r.abs().max(1e-300)
    }
}

/// Portfolio jump at retirement computed two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioJump {
    /// `Pi(z_R+) - Pi(z_R-)` from the one-sided second derivatives.
    pub one_sided: f64,
    /// `-(2 / (mu - r)) Psi(z_R)`.
    pub formula: f64,
}

impl PortfolioJump {
    pub fn relative_gap(&self) -> f64 {
        (self.one_sided - self.formula).abs() / self.formula.abs().max(1e-300)
    }
}

#[derive(Debug, Clone)]
pub struct PolicySet {
    dual: DualValueFunction,
    x_r: f64,
}

impl PolicySet {
    pub fn new(dual: DualValueFunction) -> Result<Self> {
        let x_r = -dual.j_a_prime(dual.z_r())?;
        Ok(Self { dual, x_r })
    }

    pub fn from_solution(sol: RetirementSolution) -> Result<Self> {
        Self::new(DualValueFunction::new(sol))
    }

    pub fn dual(&self) -> &DualValueFunction {
        &self.dual
    }

    pub fn solution(&self) -> &RetirementSolution {
        self.dual.solution()
    }

    fn market(&self) -> &MarketParams {
        self.solution().kernel().market()
    }

    fn pair(&self) -> &PreferencePair {
        self.solution().pair()
    }

    pub fn z_r(&self) -> f64 {
        self.dual.z_r()
    }

    /// `x_R = -J_A'(z_R)`.
    pub fn x_r(&self) -> f64 {
        self.x_r
    }

    /// `X(y) = -J'(y)`.
    pub fn wealth(&self, y: f64) -> Result<f64> {
        Ok(-self.dual.j_prime(y)?)
    }

    /// Human wealth `P'(y)`; zero on the stopping region.
    pub fn human_wealth(&self, y: f64) -> Result<f64> {
        self.solution().labor_value_prime(y)
    }

    /// Lagrange multiplier `y*(x)` solving `X(y*) = x`.
    pub fn y_star(&self, x: f64) -> Result<f64> {
        let limit = -self.market().wage_annuity();
        if !(x > limit) || !x.is_finite() {
            return Err(Error::InfeasibleWealth { x, limit });
        }
        let z = self.z_r();
        if x == self.x_r {
            return Ok(z);
        }
        let opts = RootOptions {
            rel_tol: 0.0,
            abs_tol: 1e-14,
            max_iter: 300,
        };
        if x > self.x_r {
            let f = |y: f64| Ok(-self.dual.j_a_prime(y)? - x);
            let (lo, _) = expand_bracket(f, 0.5 * z, z, Y_MIN, z, "y_star")?;
            let g = |t: f64| f(t.exp());
            let lo_t = lo.ln();
            let hi_t = (lo_t + 4f64.ln()).min(z.ln());
            Ok(brent(g, lo_t, hi_t, &opts, "y_star")?.exp().min(z))
        } else {
            let f = |y: f64| Ok(-self.dual.j_working_prime(y)? - x);
            let above = f64::from_bits(z.to_bits() + 1);
            if f(z)? <= 0.0 {
                // x lies within the pasting error of x_R.
                return Ok(above);
            }
            let (_, hi) = expand_bracket(f, z, 2.0 * z, z, Y_MAX, "y_star")?;
            let g = |t: f64| f(t.exp());
            let hi_t = hi.ln();
            let lo_t = (hi_t - 4f64.ln()).max(z.ln());
            let y = brent(g, lo_t, hi_t, &opts, "y_star")?.exp();
            // Keep the working branch strictly above the boundary.
            Ok(if y <= z { above } else { y })
        }
    }

    /// Retired iff `x >= x_R`; at the threshold the retired branch is reported.
    pub fn optimal_policy(&self, x: f64) -> Result<PolicyDecision> {
        let y = self.y_star(x)?;
        let retired = x >= self.x_r;
        let side = if retired { Regime::Retired } else { Regime::Working };
        let c = if retired {
            self.pair().u_a.inverse_marginal(y)
        } else {
            self.pair().u_b.inverse_marginal(y)
        };
        let pi = self.portfolio(y, side)?;
        let j = match side {
            Regime::Retired => self.dual.j_a(y)?,
            Regime::Working => self.dual.j_working(y)?,
        };
        Ok(PolicyDecision {
            x,
            y_star: y,
            retired,
            c,
            pi,
            value: j + y * x,
        })
    }

    /// Consumption on the given side of the boundary.
    pub fn consumption(&self, y: f64, side: Regime) -> f64 {
        match side {
            Regime::Retired => self.pair().u_a.inverse_marginal(y),
            Regime::Working => self.pair().u_b.inverse_marginal(y),
        }
    }

    /// `Pi(y) = (theta / sigma) y J''(y)` on the chosen side.
    pub fn portfolio(&self, y: f64, side: Regime) -> Result<f64> {
        let m = self.market();
        Ok(m.theta() / m.sigma() * y * self.dual.j_second(y, side)?)
    }

    pub fn retirement_wealth_threshold(&self) -> Result<WealthThreshold> {
        Ok(WealthThreshold {
            x_r: self.x_r,
            x_r_working: -self.dual.j_working_prime(self.z_r())?,
        })
    }

    pub fn portfolio_jump(&self) -> Result<PortfolioJump> {
        let m = self.market();
        if m.mu() == m.r() {
            return Err(Error::UndefinedJump);
        }
        let z = self.z_r();
        let one_sided = self.portfolio(z, Regime::Working)? - self.portfolio(z, Regime::Retired)?;
        let formula = -2.0 / (m.mu() - m.r()) * self.solution().psi(z);
        Ok(PortfolioJump { one_sided, formula })
    }

    /// `V(x)` versus `min_y J(y) + y x` over a log grid refined twice around
    /// the coarse minimizer. Returns `(V, grid minimum)`.
    pub fn duality_check(&self, x: f64, coarse: &[f64]) -> Result<(f64, f64)> {
        let v = self.optimal_policy(x)?.value;
        let objective = |y: f64| -> Result<f64> { Ok(self.dual.j(y)? + y * x) };
        let mut grid: Vec<f64> = coarse.to_vec();
        let mut best = (f64::INFINITY, 0usize);
        for _level in 0..3 {
            best = (f64::INFINITY, 0);
            for (i, &y) in grid.iter().enumerate() {
                let val = objective(y)?;
                if val < best.0 {
                    best = (val, i);
                }
            }
            let i = best.1;
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(grid.len() - 1)];
            grid = log_grid(lo, hi, 201);
        }
        Ok((v, best.0))
    }
}

/// Solves the full scenario for one wage rate.
pub fn solve_policy(pair: &PreferencePair, kernel: &ResolventKernel, root_tol: f64) -> Result<PolicySet> {
    PolicySet::from_solution(solve_free_boundary(pair, kernel, root_tol)?)
}

/// One row of the wage sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub z_bar: f64,
    pub z_r: f64,
    pub d: f64,
    pub x_r: f64,
}

#[derive(Debug, Clone)]
pub struct EpsilonSweep {
    pub rows: Vec<Result<EpsilonRow>>,
    /// Over the successful prefix.
    pub z_r_decreasing: bool,
    pub x_r_increasing: bool,
}

/// Re-solves the scenario for each wage rate in `eps_list`.
pub fn comparative_static_epsilon(
    pair: &PreferencePair,
    kernel: &ResolventKernel,
    eps_list: &[f64],
    root_tol: f64,
) -> Result<EpsilonSweep> {
    if eps_list.len() < 2 || eps_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            value: eps_list.len() as f64,
            reason: "need at least two strictly increasing wage rates",
        });
    }
    let rows: Vec<Result<EpsilonRow>> = eps_list
        .iter()
        .map(|&eps| {
            let market = kernel.market().with_epsilon(eps)?;
            let k = ResolventKernel::new(market, *kernel.roots(), kernel.breakpoints(), *kernel.options());
            let policy = solve_policy(pair, &k, root_tol)?;
            let sol = policy.solution();
            Ok(EpsilonRow {
                epsilon: eps,
                z_bar: sol.z_bar(),
                z_r: sol.z_r(),
                d: sol.d(),
                x_r: policy.x_r(),
            })
        })
        .collect();
    let ok: Vec<&EpsilonRow> = rows.iter().map_while(|r| r.as_ref().ok()).collect();
    Ok(EpsilonSweep {
        z_r_decreasing: ok.windows(2).all(|w| w[1].z_r < w[0].z_r),
        x_r_increasing: ok.windows(2).all(|w| w[1].x_r > w[0].x_r),
        rows,
    })
}
