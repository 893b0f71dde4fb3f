use std::path::Path;

use duallife::crra_oracle::CrraScenario;
use duallife::felicity::log_grid;
use duallife::market::MarketParams;
use duallife::montecarlo::SimulationConfig;
use duallife::quadrature::QuadOptions;
use duallife::scenario::Scenario;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub market: MarketSection,
    pub preferences: PreferenceSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    pub simulation: Option<SimulationSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub rho: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceKind {
    Crra,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceSection {
    pub kind: PreferenceKind,
    pub gamma: f64,
    pub l: f64,
    pub k: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub quad_tol: f64,
    pub root_tol: f64,
    pub probe_min: f64,
    pub probe_max: f64,
    pub probe_count: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            quad_tol: QuadOptions::default().tol,
            root_tol: 1e-12,
            probe_min: 1e-6,
            probe_max: 1e6,
            probe_count: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
    /// Marginal value at which the labor value is simulated.
    pub probe_y: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = SimulationConfig::default();
        Self {
            n_paths: d.n_paths,
            dt: d.dt,
            horizon: d.horizon,
            seed: d.seed,
            antithetic: d.antithetic,
            probe_y: 1.0,
        }
    }
}

impl SimulationSection {
    /// `workers` comes from `DUALLIFE_THREADS` (0 or unset lets the pool decide).
    pub fn to_config(self) -> Result<SimulationConfig, CliError> {
        let workers = match std::env::var("DUALLIFE_THREADS") {
            Ok(v) if !v.trim().is_empty() => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("DUALLIFE_THREADS must be a non-negative integer, got `{v}`")))?,
            _ => 0,
        };
        let cfg = SimulationConfig {
            n_paths: self.n_paths,
            dt: self.dt,
            horizon: self.horizon,
            seed: self.seed,
            antithetic: self.antithetic,
            workers,
        };
        cfg.validate().map_err(|e| CliError::Config(format!("[simulation]: {e}")))?;
        if !(self.probe_y.is_finite() && self.probe_y > 0.0) {
            return Err(CliError::Config("[simulation] probe_y must be positive".into()));
        }
        Ok(cfg)
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let n = &self.numerics;
        if !(n.quad_tol > 0.0 && n.quad_tol < 1.0) {
            return Err(CliError::Config(format!("[numerics] quad_tol = {} must lie in (0, 1)", n.quad_tol)));
        }
        if !(n.root_tol > 0.0 && n.root_tol < 1.0) {
            return Err(CliError::Config(format!("[numerics] root_tol = {} must lie in (0, 1)", n.root_tol)));
        }
        if !(n.probe_min > 0.0 && n.probe_max > n.probe_min && n.probe_max.is_finite()) {
            return Err(CliError::Config("[numerics] need 0 < probe_min < probe_max".into()));
        }
        if n.probe_count < 2 {
            return Err(CliError::Config("[numerics] probe_count must be at least 2".into()));
        }
        let g = self.preferences.gamma;
        if !(g.is_finite() && g > 0.0) {
            return Err(CliError::Config(format!("[preferences] gamma = {g} must be positive")));
        }
        self.market_params()?;
        Ok(())
    }

    pub fn market_params(&self) -> Result<MarketParams, CliError> {
        let m = &self.market;
        MarketParams::new(m.r, m.mu, m.sigma, m.rho, m.epsilon).map_err(|e| CliError::Config(format!("[market]: {e}")))
    }

    pub fn quad_options(&self) -> QuadOptions {
        QuadOptions::with_tol(self.numerics.quad_tol)
    }

    pub fn probe_grid(&self) -> Vec<f64> {
        let n = &self.numerics;
        log_grid(n.probe_min, n.probe_max, n.probe_count)
    }

    pub fn simulation(&self) -> SimulationSection {
        self.simulation.unwrap_or_default()
    }

    /// Builds the scenario; for CRRA a non-positive Merton constant is an
    /// assumption failure.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let p = &self.preferences;
        let market = self.market_params()?;
        match p.kind {
            PreferenceKind::Crra => {
                CrraScenario::new(market, p.gamma, p.l, p.k, p.b)?;
                Ok(Scenario::crra(market, p.gamma, p.l, p.k, p.b, self.quad_options())?)
            }
        }
    }

    pub fn crra_oracle(&self) -> Result<CrraScenario, CliError> {
        let p = &self.preferences;
        Ok(CrraScenario::new(self.market_params()?, p.gamma, p.l, p.k, p.b)?)
    }

    /// Copy with one sweepable parameter replaced.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Self {
        let mut c = self.clone();
        match param {
            SweepParam::Epsilon => c.market.epsilon = value,
            SweepParam::L => c.preferences.l = value,
            SweepParam::K => c.preferences.k = value,
            SweepParam::B => c.preferences.b = value,
            SweepParam::Gamma => c.preferences.gamma = value,
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Epsilon,
    L,
    K,
    B,
    Gamma,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::L => "l",
            SweepParam::K => "k",
            SweepParam::B => "b",
            SweepParam::Gamma => "gamma",
        }
    }
}
