//! Monte Carlo estimators on the dual process.
//!
//! Paths use exact log-normal stepping: with `Z` standard normal,
//! `ln xi` moves by `-(r + theta^2/2) dt - theta sqrt(dt) Z` and
//! `Y = y e^{rho t} xi`. Every unit of work (a single path, or an antithetic
//! pair sharing the same normals) owns a ChaCha stream selected by its index,
//! and per-unit results are reduced in index order, so estimates do not
//! depend on the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::policy::PolicySet;
use crate::retirement::RetirementSolution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    /// Total number of paths; with antithetics this is twice the pair count.
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 1.0 / 252.0,
            horizon: 200.0,
            seed: 20_240_917,
            antithetic: true,
            workers: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::InvalidSimulation("n_paths must be at least 1"));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::InvalidSimulation("n_paths must be even with antithetic pairing"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidSimulation("dt must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::InvalidSimulation("horizon must be at least dt"));
        }
        Ok(())
    }

    fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }

    fn steps(&self) -> usize {
        (self.horizon / self.dt).round().max(1.0) as usize
    }

    fn signs(&self) -> &'static [f64] {
        if self.antithetic {
            &[1.0, -1.0]
        } else {
            &[1.0]
        }
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, std_error: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// `|mean - target| <= k se + slack`.
    pub fn within(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + slack
    }
}

fn unit_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Evaluates `unit(rng, index)` for every unit on a pool of `workers` threads
/// and returns the results in index order.
fn run_units<T, F>(cfg: &SimulationConfig, unit: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(ChaCha8Rng, usize) -> T + Sync,
{
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|_| Error::InvalidSimulation("could not start the worker pool"))?;
    let n = cfg.units();
    Ok(pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| unit(unit_rng(cfg.seed, i), i))
            .collect()
    }))
}

/// Precomputed per-step quantities of the dual process.
struct Stepper {
    dt: f64,
    log_step_drift: f64,
    log_step_vol: f64,
    steps: usize,
    /// `e^{-rho t_i}` for `i = 0..=steps`.
    discount: Vec<f64>,
}

impl Stepper {
    fn new(market: &MarketParams, cfg: &SimulationConfig) -> Self {
        let theta = market.theta();
        let steps = cfg.steps();
        let dt = cfg.dt;
        Self {
            dt,
            log_step_drift: (market.rho() - market.r() - 0.5 * theta * theta) * dt,
            log_step_vol: -theta * dt.sqrt(),
            steps,
            discount: (0..=steps).map(|i| (-market.rho() * dt * i as f64).exp()).collect(),
        }
    }
}

/// Draws `Y_T` exactly for each `T` in `times` from one normal per time.
fn exact_level(market: &MarketParams, y: f64, t: f64, z: f64) -> f64 {
    let theta = market.theta();
    y * ((market.rho() - market.r() - 0.5 * theta * theta) * t - theta * t.sqrt() * z).exp()
}

/// Monte Carlo estimate of the stopped labor value together with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LaborValueEstimate {
    pub estimate: Estimate,
    /// Share of paths that never reached `z_R` before the horizon.
    pub unstopped_fraction: f64,
    /// `E[e^{-rho T} P(Y_T); not stopped]`, the value left out by truncation.
    pub truncated_tail: f64,
    pub warning: Option<String>,
}

/// `E int_0^{tau_R} e^{-rho t} h(Y_t) dt` with trapezoidal accumulation and
/// stopping at the first grid point where `Y <= z_R` (that step included).
pub fn simulate_labor_value(sol: &RetirementSolution, y: f64, cfg: &SimulationConfig) -> Result<LaborValueEstimate> {
    cfg.validate()?;
    if y <= sol.z_r() {
        return Ok(LaborValueEstimate {
            estimate: Estimate {
                mean: 0.0,
                std_error: 0.0,
            },
            unstopped_fraction: 0.0,
            truncated_tail: 0.0,
            warning: None,
        });
    }
    let market = *sol.kernel().market();
    let st = Stepper::new(&market, cfg);
    let z_r = sol.z_r();
    let ln_y = y.ln();

    // (unit mean, unstopped count, unit mean of the discounted tail)
    let units = run_units(cfg, |rng, _| -> Result<(f64, usize, f64)> {
        let signs = cfg.signs();
        let mut total = 0.0;
        let mut unstopped = 0;
        let mut tail = 0.0;
        for &sign in signs {
            let mut r = rng.clone();
            let mut ly = ln_y;
            let mut prev = sol.h(y);
            let mut acc = 0.0;
            let mut stopped = false;
            for i in 1..=st.steps {
                let z: f64 = r.sample(StandardNormal);
                ly += st.log_step_drift + sign * st.log_step_vol * z;
                let level = ly.exp();
                let g = st.discount[i] * sol.h(level);
                acc += 0.5 * (prev + g);
                prev = g;
                if level <= z_r {
                    stopped = true;
                    break;
                }
            }
            total += acc * st.dt;
            if !stopped {
                unstopped += 1;
                tail += st.discount[st.steps] * sol.labor_value(ly.exp())?;
            }
        }
        let k = signs.len() as f64;
        Ok((total / k, unstopped, tail / k))
    })?;

    let mut means = Vec::with_capacity(units.len());
    let mut unstopped = 0;
    let mut tails = 0.0;
    for u in units {
        let (m, n, t) = u?;
        means.push(m);
        unstopped += n;
        tails += t;
    }
    let estimate = Estimate::from_samples(&means);
    let unstopped_fraction = unstopped as f64 / cfg.n_paths as f64;
    let truncated_tail = tails / means.len() as f64;
    let warning = (unstopped_fraction >= 0.05 && truncated_tail.abs() > 0.01 * estimate.mean.abs()).then(|| {
        format!(
            "horizon {} truncates {:.1}% of paths; omitted discounted value {:.4e} exceeds 1% of the estimate",
            cfg.horizon,
            100.0 * unstopped_fraction,
            truncated_tail
        )
    });
    Ok(LaborValueEstimate {
        estimate,
        unstopped_fraction,
        truncated_tail,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub x: f64,
    pub y_star: f64,
    /// `E int_0^T xi_t (c_t - eps 1{t < tau_R}) dt`.
    pub estimate: Estimate,
    /// `E[xi_T |X(Y_T)|]`, bounding what the horizon leaves out.
    pub tail_bound: f64,
    pub gap: f64,
    pub passed: bool,
}

/// Static budget check: the state-price-weighted cost of the optimal plan
/// reproduces initial wealth.
pub fn verify_budget_constraint(policy: &PolicySet, x: f64, cfg: &SimulationConfig) -> Result<BudgetReport> {
    cfg.validate()?;
    let sol = policy.solution();
    let market = *sol.kernel().market();
    let pair = sol.pair();
    let y0 = policy.y_star(x)?;
    let st = Stepper::new(&market, cfg);
    let z_r = sol.z_r();
    let eps = market.epsilon();
    let ln_y0 = y0.ln();
    // xi_t = e^{-rho t} Y_t / y0; the 1/y0 is applied once per path.
    let flow = |level: f64, retired: bool| {
        if retired {
            level * pair.u_a.inverse_marginal(level)
        } else {
            level * (pair.u_b.inverse_marginal(level) - eps)
        }
    };

    let units = run_units(cfg, |rng, _| -> Result<(f64, f64)> {
        let signs = cfg.signs();
        let mut total = 0.0;
        let mut tail = 0.0;
        for &sign in signs {
            let mut r = rng.clone();
            let mut ly = ln_y0;
            let mut retired = y0 <= z_r;
            let mut prev = flow(y0, retired);
            let mut acc = 0.0;
            for i in 1..=st.steps {
                let z: f64 = r.sample(StandardNormal);
                ly += st.log_step_drift + sign * st.log_step_vol * z;
                let level = ly.exp();
                // The step that hits z_R is still charged the wage.
                let g = st.discount[i] * flow(level, retired);
                acc += 0.5 * (prev + g);
                if !retired && level <= z_r {
                    retired = true;
                    prev = st.discount[i] * flow(level, true);
                } else {
                    prev = g;
                }
            }
            total += acc * st.dt / y0;
            let level = ly.exp();
            let wealth = if retired {
                -policy.dual().j_a_prime(level)?
            } else {
                policy.wealth(level)?
            };
            tail += st.discount[st.steps] * level / y0 * wealth.abs();
        }
        let k = signs.len() as f64;
        Ok((total / k, tail / k))
    })?;

    let mut means = Vec::with_capacity(units.len());
    let mut tail = 0.0;
    for u in units {
        let (m, t) = u?;
        means.push(m);
        tail += t;
    }
    let estimate = Estimate::from_samples(&means);
    let tail_bound = tail / means.len() as f64;
    let gap = (estimate.mean - x).abs();
    Ok(BudgetReport {
        x,
        y_star: y0,
        estimate,
        tail_bound,
        gap,
        passed: gap <= 3.0 * estimate.std_error + tail_bound,
    })
}

/// `e^{-rho T} E[P(Y_T)]` at one horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransversalityRow {
    pub horizon: f64,
    pub estimate: Estimate,
}

/// Samples `Y_T` exactly at each horizon and averages `e^{-rho T} P(Y_T)`.
pub fn estimate_transversality(
    sol: &RetirementSolution,
    y: f64,
    horizons: &[f64],
    cfg: &SimulationConfig,
) -> Result<Vec<TransversalityRow>> {
    if horizons.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidSimulation("horizons must be strictly increasing"));
    }
    let market = *sol.kernel().market();
    let units = run_units(cfg, |mut rng, _| -> Result<Vec<f64>> {
        let signs = cfg.signs();
        let zs: Vec<f64> = horizons.iter().map(|_| rng.sample(StandardNormal)).collect();
        let mut out = vec![0.0; horizons.len()];
        for &sign in signs {
            for (j, (&t, &z)) in horizons.iter().zip(&zs).enumerate() {
                let level = exact_level(&market, y, t, sign * z);
                out[j] += (-market.rho() * t).exp() * sol.labor_value(level)?;
            }
        }
        let k = signs.len() as f64;
        out.iter_mut().for_each(|v| *v /= k);
        Ok(out)
    })?;
    let units: Vec<Vec<f64>> = units.into_iter().collect::<Result<_>>()?;
    Ok(horizons
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let col: Vec<f64> = units.iter().map(|u| u[j]).collect();
            TransversalityRow {
                horizon: t,
                estimate: Estimate::from_samples(&col),
            }
        })
        .collect())
}

/// `mean(xi_T e^{r T})` by exact sampling; should be one.
pub fn martingale_check(market: &MarketParams, horizon: f64, cfg: &SimulationConfig) -> Result<Estimate> {
    let theta = market.theta();
    let units = run_units(cfg, |mut rng, _| {
        let z: f64 = rng.sample(StandardNormal);
        cfg.signs()
            .iter()
            .map(|s| (-0.5 * theta * theta * horizon - theta * horizon.sqrt() * s * z).exp())
            .sum::<f64>()
            / cfg.signs().len() as f64
    })?;
    Ok(Estimate::from_samples(&units))
}

/// `E int_0^T e^{-rho t} f(Y_t) dt` without stopping.
pub fn simulate_discounted_flow<F>(market: &MarketParams, f: F, y: f64, cfg: &SimulationConfig) -> Result<Estimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    let st = Stepper::new(market, cfg);
    let ln_y = y.ln();
    let units = run_units(cfg, |rng, _| {
        let signs = cfg.signs();
        let mut total = 0.0;
        for &sign in signs {
            let mut r = rng.clone();
            let mut ly = ln_y;
            let mut prev = f(y);
            let mut acc = 0.0;
            for i in 1..=st.steps {
                let z: f64 = r.sample(StandardNormal);
                ly += st.log_step_drift + sign * st.log_step_vol * z;
                let g = st.discount[i] * f(ly.exp());
                acc += 0.5 * (prev + g);
                prev = g;
            }
            total += acc * st.dt;
        }
        total / signs.len() as f64
    })?;
    Ok(Estimate::from_samples(&units))
}
