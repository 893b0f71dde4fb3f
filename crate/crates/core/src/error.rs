use thiserror::Error;

/// Errors produced by the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("degenerate market: Sharpe ratio is zero, the characteristic quadratic collapses to a linear equation")]
    DegenerateMarket,

    #[error("invalid preference specification: {0}")]
    InvalidPreference(String),

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("quadrature did not converge ({reason}); partial estimate {partial:e}")]
    QuadratureFailure { partial: f64, reason: &'static str },

    #[error("no sign change found while bracketing {what} in [{lo:e}, {hi:e}]")]
    NoBracket {
        what: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("root finder failed to converge for {what} after {iterations} iterations")]
    RootNotConverged {
        what: &'static str,
        iterations: usize,
    },

    #[error("wealth {x} is infeasible: must exceed the natural borrowing limit {limit}")]
    InfeasibleWealth { x: f64, limit: f64 },

    #[error("probe y = {y:e} lies within {margin:e} of breakpoint {breakpoint:e}; move the probe")]
    ProbeNearBreakpoint { y: f64, breakpoint: f64, margin: f64 },

    #[error("portfolio jump is undefined when mu equals r")]
    UndefinedJump,

    #[error("invalid simulation config: {0}")]
    InvalidSimulation(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}
