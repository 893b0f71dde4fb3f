use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use duallife::crra_oracle::BoundaryCase;
use duallife::dual::Regime;
use duallife::felicity::{log_grid, AssumptionReport};
use duallife::market::merton_constant;
use duallife::montecarlo::{
    estimate_transversality, martingale_check, simulate_labor_value, verify_budget_constraint,
};
use duallife::policy::PolicySet;
use duallife::retirement::{verify_variational_inequality, VI_STEP};
use duallife::scenario::Scenario;

use crate::config::{PreferenceKind, ScenarioConfig, SweepParam};
use crate::error::CliError;
use crate::output::{num, text, write_atomic, Csv};

const PASTING_TOL: f64 = 1e-8;
const VI_TOL: f64 = 1e-6;
const DUALITY_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-9;
const THRESHOLD_TOL: f64 = 1e-9;
const JUMP_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-7;
const NO_JUMP_TOL: f64 = 1e-10;

pub struct SolutionSummary {
    pub n1: f64,
    pub n2: f64,
    pub merton: Option<f64>,
    pub z_bar: f64,
    pub z_r: f64,
    pub d: f64,
    pub x_r: f64,
    pub assumptions: AssumptionReport,
    pub pasting_value: f64,
    pub pasting_slope: f64,
    pub vi_residual: f64,
    pub vi_stopping_max_h: f64,
    pub duality_gap: f64,
    pub round_trip: f64,
    pub elapsed: Duration,
}

pub struct Solved {
    pub scenario: Scenario,
    pub policy: PolicySet,
    pub summary: SolutionSummary,
}

fn wealth_probes(policy: &PolicySet, eps_annuity: f64) -> Vec<f64> {
    let x_r = policy.x_r();
    vec![-0.5 * eps_annuity, 0.0, 0.5 * x_r, x_r, 2.0 * x_r]
}

pub fn solve_scenario(cfg: &ScenarioConfig) -> Result<Solved, CliError> {
    let start = Instant::now();
    let scenario = cfg.scenario()?;
    let grid = cfg.probe_grid();
    let assumptions = scenario.assumptions(&grid);
    if !assumptions.all_pass() {
        return Err(CliError::Assumption(assumptions.messages.join("; ")));
    }
    let policy = scenario.solve(cfg.numerics.root_tol)?;
    let sol = policy.solution();
    let vi = verify_variational_inequality(sol, &grid, VI_STEP)?;
    let mut duality_gap: f64 = 0.0;
    let mut round_trip: f64 = 0.0;
    for x in wealth_probes(&policy, scenario.market.wage_annuity()) {
        let (v, grid_min) = policy.duality_check(x, &grid)?;
        duality_gap = duality_gap.max((v - grid_min).abs() / v.abs().max(1.0));
        let y = policy.y_star(x)?;
        round_trip = round_trip.max((policy.wealth(y)? - x).abs() / x.abs().max(1.0));
    }
    let merton = match cfg.preferences.kind {
        PreferenceKind::Crra => Some(merton_constant(&scenario.market, cfg.preferences.gamma)?.value),
    };
    let summary = SolutionSummary {
        n1: scenario.roots.n1,
        n2: scenario.roots.n2,
        merton,
        z_bar: sol.z_bar(),
        z_r: sol.z_r(),
        d: sol.d(),
        x_r: policy.x_r(),
        assumptions,
        pasting_value: sol.pasting_value,
        pasting_slope: sol.pasting_slope,
        vi_residual: vi.max_continuation_residual,
        vi_stopping_max_h: vi.max_stopping_flow,
        duality_gap,
        round_trip,
        elapsed: start.elapsed(),
    };
    Ok(Solved {
        scenario,
        policy,
        summary,
    })
}

fn summary_fields(s: &SolutionSummary) -> Vec<(&'static str, f64)> {
    let mut v = vec![("n1", s.n1), ("n2", s.n2)];
    if let Some(m) = s.merton {
        v.push(("M", m));
    }
    v.extend([
        ("z_bar", s.z_bar),
        ("z_R", s.z_r),
        ("D", s.d),
        ("x_R", s.x_r),
        ("pasting_value", s.pasting_value),
        ("pasting_slope", s.pasting_slope),
        ("vi_residual", s.vi_residual),
        ("vi_stopping_max_h", s.vi_stopping_max_h),
        ("duality_gap", s.duality_gap),
        ("round_trip_error", s.round_trip),
    ]);
    v
}

fn summary_text(cfg: &ScenarioConfig, s: &SolutionSummary) -> String {
    let mut out = String::new();
    let m = &cfg.market;
    let p = &cfg.preferences;
    let _ = writeln!(
        out,
        "market: r = {}, mu = {}, sigma = {}, rho = {}, epsilon = {}",
        m.r, m.mu, m.sigma, m.rho, m.epsilon
    );
    let _ = writeln!(out, "preferences: crra gamma = {}, l = {}, k = {}, b = {}", p.gamma, p.l, p.k, p.b);
    let _ = writeln!(out);
    for (k, v) in summary_fields(s) {
        let _ = writeln!(out, "{k:<18} = {}", num(v));
    }
    let a = &s.assumptions;
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "assumptions: integrability {}, utility ordering {}, marginal benefit negative near zero {}",
        a.integrable, a.utility_ordering, a.psi_negative_near_zero
    );
    let _ = writeln!(out, "elapsed: {:.3} s", s.elapsed.as_secs_f64());
    out
}

fn policy_table(cfg: &ScenarioConfig, policy: &PolicySet) -> Result<String, CliError> {
    let z = policy.z_r();
    let mut csv = Csv::new(&["y", "X", "c", "pi", "P", "human_wealth", "J"]);
    for y in log_grid(z / 50.0, 50.0 * z, cfg.numerics.probe_count) {
        let side = Regime::at(y, z);
        csv.row(&[
            num(y),
            num(policy.wealth(y)?),
            num(policy.consumption(y, side)),
            num(policy.portfolio(y, side)?),
            num(policy.solution().labor_value(y)?),
            num(policy.human_wealth(y)?),
            num(policy.dual().j(y)?),
        ]);
    }
    Ok(csv.finish())
}

pub fn cmd_solve(config: &Path, out: &Path) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let solved = solve_scenario(&cfg)?;
    std::fs::create_dir_all(out)?;
    let summary = summary_text(&cfg, &solved.summary);
    let mut csv = Csv::new(&["quantity", "value"]);
    for (k, v) in summary_fields(&solved.summary) {
        csv.row(&[k.to_string(), num(v)]);
    }
    let table = policy_table(&cfg, &solved.policy)?;
    write_atomic(&out.join("solution.csv"), &csv.finish())?;
    write_atomic(&out.join("policy_table.csv"), &table)?;
    write_atomic(&out.join("summary.txt"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        }
    }
}

struct Check {
    name: String,
    computed: f64,
    reference: f64,
    tolerance: f64,
    status: Status,
    note: String,
}

impl Check {
    /// Passes when `measure <= tolerance`.
    fn bound(name: &str, computed: f64, reference: f64, measure: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            computed,
            reference,
            tolerance,
            status: if measure <= tolerance { Status::Pass } else { Status::Fail },
            note: String::new(),
        }
    }

    fn relative(name: &str, computed: f64, reference: f64, tolerance: f64) -> Self {
        let measure = (computed - reference).abs() / reference.abs().max(1e-300);
        Self::bound(name, computed, reference, measure, tolerance)
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = note;
        self
    }
}

fn core_checks(solved: &Solved) -> Result<Vec<Check>, CliError> {
    let s = &solved.summary;
    let market = &solved.scenario.market;
    let policy = &solved.policy;
    let scale = market.wage_annuity().max(1.0);
    let root_tol = 1e-12 * market.rho().max(1.0);
    let threshold = policy.retirement_wealth_threshold()?;
    let jump = policy.portfolio_jump()?;
    Ok(vec![
        Check::bound("characteristic residual n1", market.characteristic(s.n1), 0.0, market.characteristic(s.n1).abs(), root_tol),
        Check::bound("characteristic residual n2", market.characteristic(s.n2), 0.0, market.characteristic(s.n2).abs(), root_tol),
        Check::bound("P(z_R)", s.pasting_value, 0.0, s.pasting_value.abs(), PASTING_TOL * scale),
        Check::bound("P'(z_R+)", s.pasting_slope, 0.0, s.pasting_slope.abs(), PASTING_TOL * scale),
        Check::bound("VI residual on continuation grid", s.vi_residual, 0.0, s.vi_residual, VI_TOL),
        Check::bound("max h on stopping grid", s.vi_stopping_max_h, 0.0, s.vi_stopping_max_h, 0.0),
        Check::bound("duality gap", s.duality_gap, 0.0, s.duality_gap, DUALITY_TOL),
        Check::bound("wealth round trip", s.round_trip, 0.0, s.round_trip, ROUND_TRIP_TOL),
        Check::relative("x_R from working branch", threshold.x_r_working, threshold.x_r, THRESHOLD_TOL),
        Check::relative("portfolio jump", jump.one_sided, jump.formula, JUMP_TOL),
    ])
}

fn oracle_checks(cfg: &ScenarioConfig, solved: &Solved) -> Result<Vec<Check>, CliError> {
    let oracle = cfg.crra_oracle()?;
    let fb = oracle.free_boundary()?;
    let s = &solved.summary;
    let scenario = &solved.scenario;
    let mut checks = vec![
        Check::relative("z_R vs closed form", s.z_r, fb.z_r, ORACLE_TOL).with_note(match fb.case {
            BoundaryCase::One => "Case 1".into(),
            BoundaryCase::Two => "Case 2".into(),
        }),
        Check::relative("D vs closed form", s.d, fb.d, ORACLE_TOL),
        Check::relative("x_R vs closed form", s.x_r, -oracle.xi_ua_prime(fb.z_r), ORACLE_TOL),
    ];
    let grid = cfg.probe_grid();
    let step = (grid.len() / 20).max(1);
    let (mut worst_b, mut at_b, mut worst_a, mut at_a) = (0.0f64, 0.0, 0.0f64, 0.0);
    for &y in grid.iter().step_by(step) {
        let xb = scenario.kernel.xi(|v| scenario.pair.u_b.conjugate(v), y)?;
        let xa = scenario.kernel.xi(|v| scenario.pair.u_a.conjugate(v), y)?;
        let eb = (xb - oracle.xi_ub(y)).abs() / oracle.xi_ub(y).abs();
        let ea = (xa - oracle.xi_ua(y)).abs() / oracle.xi_ua(y).abs();
        if eb > worst_b {
            (worst_b, at_b) = (eb, y);
        }
        if ea > worst_a {
            (worst_a, at_a) = (ea, y);
        }
    }
    checks.push(
        Check::bound("Xi of u_B conjugate vs closed form (max rel)", worst_b, 0.0, worst_b, ORACLE_TOL)
            .with_note(format!("worst at y = {}", num(at_b))),
    );
    checks.push(
        Check::bound("Xi of u_A conjugate vs closed form (max rel)", worst_a, 0.0, worst_a, ORACLE_TOL)
            .with_note(format!("worst at y = {}", num(at_a))),
    );
    Ok(checks)
}

fn simulation_checks(cfg: &ScenarioConfig, solved: &Solved) -> Result<Vec<Check>, CliError> {
    let section = cfg.simulation();
    let sim = section.to_config()?;
    let policy = &solved.policy;
    let sol = policy.solution();
    let mut checks = Vec::new();

    let y = section.probe_y;
    let analytic = sol.labor_value(y)?;
    let lv = simulate_labor_value(sol, y, &sim)?;
    let se = lv.estimate.std_error;
    let mut c = Check::bound(
        &format!("P({y}) by simulation within 3 se"),
        lv.estimate.mean,
        analytic,
        (lv.estimate.mean - analytic).abs(),
        3.0 * se,
    )
    .with_note(format!("se {}, unstopped {:.2}%", num(se), 100.0 * lv.unstopped_fraction));
    if let Some(w) = lv.warning {
        c.status = Status::Inconclusive;
        c.note = format!("{}; {w}", c.note);
    }
    checks.push(c);

    for x in [0.0, policy.x_r()] {
        let r = verify_budget_constraint(policy, x, &sim)?;
        checks.push(
            Check::bound(
                &format!("budget at x = {}", num(x)),
                r.estimate.mean,
                x,
                r.gap,
                3.0 * r.estimate.std_error + r.tail_bound,
            )
            .with_note(format!("se {}, tail bound {}", num(r.estimate.std_error), num(r.tail_bound))),
        );
    }

    for t in [1.0, 10.0] {
        let e = martingale_check(sol.kernel().market(), t, &sim)?;
        checks.push(Check::bound(
            &format!("mean of xi_T e^(rT) at T = {t}"),
            e.mean,
            1.0,
            (e.mean - 1.0).abs(),
            3.0 * e.std_error,
        ));
    }

    let table = estimate_transversality(sol, y, &[10.0, 20.0, 40.0], &sim)?;
    let decreasing = table.windows(2).all(|w| w[1].estimate.mean < w[0].estimate.mean);
    let last = table.last().map(|r| r.estimate.mean).unwrap_or(f64::NAN);
    let mut c = Check::bound("discounted P(Y_T) strictly decreasing in T", last, 0.0, 0.0, 0.0).with_note(
        table
            .iter()
            .map(|r| format!("T {}: {}", r.horizon, num(r.estimate.mean)))
            .collect::<Vec<_>>()
            .join(", "),
    );
    if !decreasing {
        c.status = Status::Fail;
    }
    checks.push(c);
    Ok(checks)
}

pub fn cmd_verify(config: &Path, oracle: bool, simulate: bool, out: &Path) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let solved = solve_scenario(&cfg)?;
    let mut checks = core_checks(&solved)?;
    if oracle {
        checks.extend(oracle_checks(&cfg, &solved)?);
    }
    if simulate {
        checks.extend(simulation_checks(&cfg, &solved)?);
    }
    let mut report = String::new();
    let _ = writeln!(report, "{:<46} {:>24} {:>24} {:>10}  status", "check", "computed", "reference", "tolerance");
    for c in &checks {
        let _ = write!(
            report,
            "{:<46} {:>24} {:>24} {:>10.1e}  {}",
            c.name,
            num(c.computed),
            num(c.reference),
            c.tolerance,
            c.status.label()
        );
        if !c.note.is_empty() {
            let _ = write!(report, "  ({})", c.note);
        }
        report.push('\n');
    }
    let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
    let inconclusive = checks.iter().filter(|c| c.status == Status::Inconclusive).count();
    let _ = writeln!(
        report,
        "{} checks: {} passed, {failed} failed, {inconclusive} inconclusive",
        checks.len(),
        checks.len() - failed - inconclusive
    );
    std::fs::create_dir_all(out)?;
    write_atomic(&out.join("verify_report.txt"), &report)?;
    if failed + inconclusive > 0 {
        return Err(CliError::Verify(format!("{failed} failed, {inconclusive} inconclusive\n{report}")));
    }
    Ok(report)
}

pub fn cmd_sweep(config: &Path, param: SweepParam, values: &[f64], out: &Path) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let mut csv = Csv::new(&[
        "param", "value", "status", "n1", "n2", "M", "z_bar", "z_R", "D", "x_R", "consumption_jump", "jump_flag",
        "message",
    ]);
    let mut ok_rows: Vec<(f64, f64)> = Vec::new();
    let mut lines = Vec::new();
    for &v in values {
        let row_cfg = cfg.with_param(param, v);
        match solve_scenario(&row_cfg) {
            Ok(solved) => {
                let s = &solved.summary;
                let p = &solved.policy;
                let jump = p.consumption(s.z_r, Regime::Working) - p.consumption(s.z_r, Regime::Retired);
                let scale = p.consumption(s.z_r, Regime::Working).abs().max(1.0);
                let flag = jump.abs() > NO_JUMP_TOL * scale;
                csv.row(&[
                    param.name().to_string(),
                    num(v),
                    "ok".into(),
                    num(s.n1),
                    num(s.n2),
                    s.merton.map(num).unwrap_or_default(),
                    num(s.z_bar),
                    num(s.z_r),
                    num(s.d),
                    num(s.x_r),
                    num(jump),
                    u8::from(flag).to_string(),
                    String::new(),
                ]);
                ok_rows.push((s.z_r, s.x_r));
                lines.push(format!("{} = {v}: z_R {}, x_R {}, jump {}", param.name(), num(s.z_r), num(s.x_r), flag));
            }
            Err(e) => {
                let mut cells = vec![param.name().to_string(), num(v), "error".into()];
                cells.extend(std::iter::repeat_n(String::new(), 9));
                cells.push(text(&e.to_string()));
                csv.row(&cells);
                lines.push(format!("{} = {v}: error (exit class {}): {e}", param.name(), e.exit_code()));
            }
        }
    }
    if param == SweepParam::Epsilon && ok_rows.len() >= 2 {
        let z_dec = ok_rows.windows(2).all(|w| w[1].0 < w[0].0);
        let x_inc = ok_rows.windows(2).all(|w| w[1].1 > w[0].1);
        lines.push(format!("z_R strictly decreasing: {z_dec}"));
        lines.push(format!("x_R strictly increasing: {x_inc}"));
    }
    let mut summary = lines.join("\n");
    summary.push('\n');
    std::fs::create_dir_all(out)?;
    write_atomic(&out.join("sweep.csv"), &csv.finish())?;
    write_atomic(&out.join("sweep_summary.txt"), &summary)?;
    Ok(summary)
}
