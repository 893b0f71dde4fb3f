//! Felicity functions, their conjugates, and the pre/post retirement family
//! `u_B = u - l`, `u_A = u(k c + b)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{require, Error, Result};
use crate::market::QuadraticRoots;
use crate::quadrature::{integrate, QuadOptions};

/// A strictly increasing, strictly concave, smooth felicity with Inada at
/// infinity. `marginal_at_zero` may be `f64::INFINITY`.
///
/// `inverse_marginal` must be extended by zero for `y >= marginal_at_zero()`,
/// and `conjugate(y) = sup_c { u(c) - y c }`.
pub trait Felicity: Send + Sync + fmt::Debug {
    fn value(&self, c: f64) -> f64;
    fn marginal(&self, c: f64) -> f64;
    fn marginal_at_zero(&self) -> f64;
    fn inverse_marginal(&self, y: f64) -> f64;
    fn conjugate(&self, y: f64) -> f64;
}

pub type FelicityRef = Arc<dyn Felicity>;

/// `u(c) = c^{1-gamma} / (1 - gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crra {
    gamma: f64,
}

impl Crra {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

pub fn crra(gamma: f64) -> Result<Crra> {
    require(gamma.is_finite() && gamma > 0.0, "gamma", gamma, "risk aversion must be positive")?;
    if gamma == 1.0 {
        return Err(Error::InvalidPreference(
            "log utility (gamma = 1) is not supported".into(),
        ));
    }
    Ok(Crra { gamma })
}

impl Felicity for Crra {
    fn value(&self, c: f64) -> f64 {
        c.powf(1.0 - self.gamma) / (1.0 - self.gamma)
    }

    fn marginal(&self, c: f64) -> f64 {
        c.powf(-self.gamma)
    }

    fn marginal_at_zero(&self) -> f64 {
        f64::INFINITY
    }

    fn inverse_marginal(&self, y: f64) -> f64 {
        y.powf(-1.0 / self.gamma)
    }

    fn conjugate(&self, y: f64) -> f64 {
        let g = self.gamma;
        g / (1.0 - g) * y.powf(-(1.0 - g) / g)
    }
}

/// `u(c) - l`.
#[derive(Debug, Clone)]
pub struct Shifted {
    base: FelicityRef,
    l: f64,
}

pub fn make_pre_retirement(base: FelicityRef, l: f64) -> Result<Shifted> {
    require(l.is_finite() && l >= 0.0, "l", l, "disutility of work must be nonnegative")?;
    Ok(Shifted { base, l })
}

impl Felicity for Shifted {
    fn value(&self, c: f64) -> f64 {
        self.base.value(c) - self.l
    }

    fn marginal(&self, c: f64) -> f64 {
        self.base.marginal(c)
    }

    fn marginal_at_zero(&self) -> f64 {
        self.base.marginal_at_zero()
    }

    fn inverse_marginal(&self, y: f64) -> f64 {
        self.base.inverse_marginal(y)
    }

    fn conjugate(&self, y: f64) -> f64 {
        self.base.conjugate(y) - self.l
    }
}

/// `u(k c + b)`.
#[derive(Debug, Clone)]
pub struct Scaled {
    base: FelicityRef,
    k: f64,
    b: f64,
    // u'(b), possibly infinite.
    marginal_b: f64,
    value_b: f64,
}

pub fn make_post_retirement(base: FelicityRef, k: f64, b: f64) -> Result<Scaled> {
    require(k.is_finite() && k >= 1.0, "k", k, "leisure scale must be at least 1")?;
    require(b.is_finite() && b >= 0.0, "b", b, "consumption shift must be nonnegative")?;
    let marginal_b = if b == 0.0 {
        base.marginal_at_zero()
    } else {
        base.marginal(b)
    };
    let value_b = base.value(b);
    Ok(Scaled {
        base,
        k,
        b,
        marginal_b,
        value_b,
    })
}

impl Scaled {
    /// `k u'(b)`: above this marginal value post-retirement consumption is zero.
    pub fn cutoff(&self) -> f64 {
        self.k * self.marginal_b
    }
}

impl Felicity for Scaled {
    fn value(&self, c: f64) -> f64 {
        self.base.value(self.k * c + self.b)
    }

    fn marginal(&self, c: f64) -> f64 {
        self.k * self.base.marginal(self.k * c + self.b)
    }

    fn marginal_at_zero(&self) -> f64 {
        self.cutoff()
    }

    fn inverse_marginal(&self, y: f64) -> f64 {
        let z = y / self.k;
        if z <= self.marginal_b {
            ((self.base.inverse_marginal(z) - self.b) / self.k).max(0.0)
        } else {
            0.0
        }
    }

    fn conjugate(&self, y: f64) -> f64 {
        let z = y / self.k;
        if z <= self.marginal_b {
            self.base.conjugate(z) + self.b * z
        } else {
            self.value_b
        }
    }
}

/// The family parameters `(l, k, b)` when a pair is built from a base felicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyParams {
    pub l: f64,
    pub k: f64,
    pub b: f64,
}

/// Pre-retirement `u_B` and post-retirement `u_A` felicities.
#[derive(Debug, Clone)]
pub struct PreferencePair {
    pub u_b: FelicityRef,
    pub u_a: FelicityRef,
    pub base: Option<FelicityRef>,
    pub family: Option<FamilyParams>,
}

impl PreferencePair {
    /// Arbitrary user-supplied felicities.
    pub fn custom(u_b: FelicityRef, u_a: FelicityRef) -> Self {
        Self {
            u_b,
            u_a,
            base: None,
            family: None,
        }
    }

    /// `u_B = u - l`, `u_A = u(k c + b)` with `l >= 0`, `k >= 1`, `b >= 0` and
    /// `(k - 1)^2 + l^2 != 0`.
    pub fn example_family(base: FelicityRef, l: f64, k: f64, b: f64) -> Result<Self> {
        require(l.is_finite() && l >= 0.0, "l", l, "disutility of work must be nonnegative")?;
        require(k.is_finite() && k >= 1.0, "k", k, "leisure scale must be at least 1")?;
        require(b.is_finite() && b >= 0.0, "b", b, "consumption shift must be nonnegative")?;
        if (k - 1.0).powi(2) + l * l == 0.0 {
            return Err(Error::InvalidPreference(
                "the family requires (k-1)^2 + l^2 != 0: with l = 0 and k = 1 work carries no cost and retirement is never optimal".into(),
            ));
        }
        let u_b: FelicityRef = Arc::new(make_pre_retirement(base.clone(), l)?);
        let u_a: FelicityRef = Arc::new(make_post_retirement(base.clone(), k, b)?);
        Ok(Self {
            u_b,
            u_a,
            base: Some(base),
            family: Some(FamilyParams { l, k, b }),
        })
    }

    /// CRRA base with the example family transforms.
    pub fn crra_family(gamma: f64, l: f64, k: f64, b: f64) -> Result<Self> {
        Self::example_family(Arc::new(crra(gamma)?), l, k, b)
    }

    /// Finite marginal-at-zero values of both felicities, sorted and deduplicated.
    /// These are the kinks of the inverse marginals.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [self.u_b.marginal_at_zero(), self.u_a.marginal_at_zero()]
            .into_iter()
            .filter(|x| x.is_finite() && *x > 0.0)
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
        v
    }
}

/// Outcome of the numeric assumption checks. Failures are reported, not thrown.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// `int_0^y eta^{-n2} I(eta) d eta < inf` for both felicities.
    pub integrable: bool,
    /// `u_B(I_B(y)) < u_A(I_A(y))` at every grid point.
    pub utility_ordering: bool,
    /// Marginal benefit of work negative and increasing at the low end of the grid.
    pub psi_negative_near_zero: bool,
    pub messages: Vec<String>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.integrable && self.utility_ordering && self.psi_negative_near_zero
    }

    /// Converts a failed report into an error naming the first failure.
    pub fn into_result(self) -> Result<Self> {
        if self.all_pass() {
            Ok(self)
        } else {
            Err(Error::AssumptionViolation(self.messages.join("; ")))
        }
    }
}

/// `n` log-spaced points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

const DYADIC_PIECES: usize = 40;
const DYADIC_TAIL: usize = 10;

/// Dyadic-decay test for `int_0^1 eta^{-n2} I(eta) d eta < inf`.
///
/// Each piece covers `[2^{-j-1}, 2^{-j}]`. The integral is declared finite when
/// the last few piece ratios are all below one and their geometric mean is
/// below 0.999.
pub fn lower_tail_integrable(f: &dyn Felicity, n2: f64) -> bool {
    let opts = QuadOptions::with_tol(1e-8);
    let mut pieces = Vec::with_capacity(DYADIC_PIECES);
    for j in 0..DYADIC_PIECES {
        let hi = 0.5f64.powi(j as i32);
        let lo = 0.5 * hi;
        // Substitute eta = e^t to keep the integrand well scaled.
        let est = integrate(
            |t: f64| {
                let eta = t.exp();
                eta.powf(1.0 - n2) * f.inverse_marginal(eta)
            },
            lo.ln(),
            hi.ln(),
            &opts,
        );
        match est {
            Ok(e) if e.value.is_finite() => pieces.push(e.value.abs()),
            _ => return false,
        }
    }
    let tail = &pieces[DYADIC_PIECES - DYADIC_TAIL - 1..];
    if tail.iter().all(|p| *p == 0.0) {
        return true;
    }
    let mut log_sum = 0.0;
    for w in tail.windows(2) {
        if w[0] == 0.0 {
            if w[1] == 0.0 {
                continue;
            }
            return false;
        }
        let ratio = w[1] / w[0];
        if !(ratio < 1.0) {
            return false;
        }
        log_sum += ratio.max(f64::MIN_POSITIVE).ln();
    }
    (log_sum / DYADIC_TAIL as f64).exp() < 0.999
}

/// Checks integrability, the pre/post utility ordering, and the sign of the
/// marginal benefit of work near zero.
pub fn verify_assumptions(
    pair: &PreferencePair,
    roots: &QuadraticRoots,
    epsilon: f64,
    grid: &[f64],
) -> AssumptionReport {
    let mut messages = Vec::new();

    let integrable_b = lower_tail_integrable(pair.u_b.as_ref(), roots.n2);
    let integrable_a = lower_tail_integrable(pair.u_a.as_ref(), roots.n2);
    if !integrable_b {
        messages.push("pre-retirement inverse marginal is not integrable against eta^{-n2} near zero".into());
    }
    if !integrable_a {
        messages.push("post-retirement inverse marginal is not integrable against eta^{-n2} near zero".into());
    }

    let mut ordering = !grid.is_empty();
    for &y in grid {
        let ub = pair.u_b.value(pair.u_b.inverse_marginal(y));
        let ua = pair.u_a.value(pair.u_a.inverse_marginal(y));
        if !(ub < ua) {
            messages.push(format!(
                "u_B(I_B(y)) < u_A(I_A(y)) fails at y = {y:e} ({ub:e} vs {ua:e})"
            ));
            ordering = false;
            break;
        }
    }

    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let psi = |y: f64| (pair.u_b.conjugate(y) - pair.u_a.conjugate(y)) / y + epsilon;
    let low: Vec<f64> = sorted.iter().take(5).map(|&y| psi(y)).collect();
    let psi_ok = !low.is_empty()
        && low.iter().all(|v| *v < 0.0)
        && low.windows(2).all(|w| w[0] < w[1]);
    if !psi_ok {
        messages.push(format!(
            "marginal benefit of work is not negative and increasing near zero (values {low:?})"
        ));
    }

    AssumptionReport {
        integrable: integrable_b && integrable_a,
        utility_ordering: ordering,
        psi_negative_near_zero: psi_ok,
        messages,
    }
}
