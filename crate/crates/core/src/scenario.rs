//! Market plus preferences, wired into a kernel.

use crate::error::Result;
use crate::felicity::{verify_assumptions, AssumptionReport, PreferencePair};
use crate::market::{solve_characteristic_roots, MarketParams, QuadraticRoots};
use crate::operators::ResolventKernel;
use crate::policy::{solve_policy, PolicySet};
use crate::quadrature::QuadOptions;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub market: MarketParams,
    pub roots: QuadraticRoots,
    pub pair: PreferencePair,
    pub kernel: ResolventKernel,
}

impl Scenario {
    pub fn new(market: MarketParams, pair: PreferencePair, opts: QuadOptions) -> Result<Self> {
        let roots = solve_characteristic_roots(&market)?;
        let kernel = ResolventKernel::new(market, roots, &pair.breakpoints(), opts);
        Ok(Self {
            market,
            roots,
            pair,
            kernel,
        })
    }

    pub fn crra(market: MarketParams, gamma: f64, l: f64, k: f64, b: f64, opts: QuadOptions) -> Result<Self> {
        Self::new(market, PreferencePair::crra_family(gamma, l, k, b)?, opts)
    }

    pub fn assumptions(&self, grid: &[f64]) -> AssumptionReport {
        verify_assumptions(&self.pair, &self.roots, self.market.epsilon(), grid)
    }

    pub fn solve(&self, root_tol: f64) -> Result<PolicySet> {
        solve_policy(&self.pair, &self.kernel, root_tol)
    }
}
