//! Adaptive Gauss-Kronrod quadrature on finite panels and on `[0, inf)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule. Abscissae are the
// nonnegative half, descending; odd indices are the Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_622_182_254,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Knobs shared by every integrator in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Relative tolerance.
    pub tol: f64,
    /// Maximum number of bisections per finite panel.
    pub max_subdivisions: usize,
    /// Maximum number of doubling tail panels on `[0, inf)`.
    pub max_doublings: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_subdivisions: 500,
            max_doublings: 60,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Integral estimate with an absolute error estimate and the integral of |f|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_error: f64,
    pub abs_integral: f64,
}

struct Piece {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.est.abs_error == other.est.abs_error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est
            .abs_error
            .partial_cmp(&other.est.abs_error)
            .unwrap_or(Ordering::Equal)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let centr = 0.5 * (a + b);
    let hlgth = 0.5 * (b - a);
    let fc = f(centr);
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = hlgth * XGK[j];
        let f1 = f(centr - dx);
        let f2 = f(centr + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let h = hlgth.abs();
    let result = resk * hlgth;
    resabs *= h;
    resasc *= h;
    let mut err = ((resk - resg) * hlgth).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Estimate {
        value: result,
        abs_error: err,
        abs_integral: resabs,
    }
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// Bisects the piece with the largest error until the summed error falls
/// below `opts.tol` times the integral of `|f|`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Estimate> {
    integrate_to(f, a, b, opts, 0.0)
}

/// As [`integrate`], but also accepts once the error is below `abs_floor`.
fn integrate_to<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions, abs_floor: f64) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            abs_error: 0.0,
            abs_integral: 0.0,
        });
    }
    let first = gk21(&f, a, b);
    if !first.value.is_finite() {
        return Err(Error::QuadratureFailure {
            partial: first.value,
            reason: "non-finite integrand",
        });
    }
    let mut heap = BinaryHeap::new();
    let mut total = first;
    heap.push(Piece { a, b, est: first });
    let mut splits = 0;
    // The error estimate is floored near 50 ulp of the integral of |f|.
    let tol = opts.tol.max(100.0 * f64::EPSILON);
    loop {
        if total.abs_error <= (tol * total.abs_integral).max(abs_floor) || total.abs_error == 0.0 {
            return Ok(total);
        }
        if splits >= opts.max_subdivisions {
            return Err(Error::QuadratureFailure {
                partial: total.value,
                reason: "subdivision limit reached",
            });
        }
        let worst = heap.pop().expect("heap holds at least one piece");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Interval can no longer be split in floating point.
            return Ok(total);
        }
        let left = gk21(&f, worst.a, mid);
        let right = gk21(&f, mid, worst.b);
        if !(left.value.is_finite() && right.value.is_finite()) {
            return Err(Error::QuadratureFailure {
                partial: total.value,
                reason: "non-finite integrand",
            });
        }
        total.value += left.value + right.value - worst.est.value;
        total.abs_error += left.abs_error + right.abs_error - worst.est.abs_error;
        total.abs_integral += left.abs_integral + right.abs_integral - worst.est.abs_integral;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            est: right,
        });
        splits += 1;
        if total.abs_error < 0.0 {
            // Guard against cancellation drift in the running sum.
            total.abs_error = heap.iter().map(|p| p.est.abs_error).sum();
        }
    }
}

/// Integrates `f` over `[0, s_max)` where `s_max` may be infinite.
///
/// The range is cut at `splits` (interior kinks, any order, out-of-range values
/// ignored) and beyond the last split by panels of width 1, 2, 4, ... The tail
/// stops once two consecutive panels each contribute at most `tol` times the
/// accumulated integral of `|f|`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(
    f: F,
    splits: &[f64],
    s_max: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    let mut cuts: Vec<f64> = splits
        .iter()
        .copied()
        .filter(|s| s.is_finite() && *s > 0.0 && *s < s_max)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    cuts.dedup();

    let mut value = 0.0;
    let mut abs_accum = 0.0;
    let mut lo = 0.0;
    for &c in &cuts {
        let est = integrate_to(&f, lo, c, opts, opts.tol * abs_accum).map_err(|e| partial_failure(e, value))?;
        value += est.value;
        abs_accum += est.abs_integral;
        lo = c;
    }

    let mut width = 1.0;
    let mut quiet = 0;
    for _ in 0..=opts.max_doublings {
        let hi = (lo + width).min(s_max);
        // Far panels only need to be accurate relative to what is already
        // accumulated; rounding in the integrand can dominate them.
        let est = integrate_to(&f, lo, hi, opts, opts.tol * abs_accum).map_err(|e| partial_failure(e, value))?;
        value += est.value;
        abs_accum += est.abs_integral;
        if hi >= s_max {
            return Ok(value);
        }
        if est.abs_integral <= opts.tol * abs_accum {
            quiet += 1;
            if quiet >= 2 {
                return Ok(value);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    Err(Error::QuadratureFailure {
        partial: value,
        reason: "tail not decaying after maximum doublings",
    })
}

fn partial_failure(e: Error, accumulated: f64) -> Error {
    match e {
        Error::QuadratureFailure { partial, reason } => Error::QuadratureFailure {
            partial: accumulated + partial,
            reason,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        let opts = QuadOptions::default();
        for k in 0..=31 {
            let est = gk21(&|x: f64| x.powi(k), 0.0, 1.0);
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((est.value - exact).abs() < 1e-15, "k = {k}");
        }
        let est = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, &opts).unwrap();
        assert!((est.value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn kinked_integrand_converges() {
        let opts = QuadOptions::default();
        let est = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &opts).unwrap();
        let exact = 0.5 * (0.09 + 0.49);
        assert!((est.value - exact).abs() < 1e-10);
    }

    #[test]
    fn half_line_exponential() {
        let opts = QuadOptions::default();
        let v = integrate_half_line(|s: f64| (-0.3 * s).exp(), &[], f64::INFINITY, &opts).unwrap();
        assert!((v - 1.0 / 0.3).abs() < 1e-9 / 0.3);
        let v = integrate_half_line(|s: f64| (-2.0 * s).exp(), &[0.5, 7.0], f64::INFINITY, &opts).unwrap();
        assert!((v - 0.5).abs() < 1e-11);
    }

    #[test]
    fn half_line_nondecaying_fails() {
        let opts = QuadOptions {
            max_doublings: 10,
            ..QuadOptions::default()
        };
        let err = integrate_half_line(|_s: f64| 1.0, &[], f64::INFINITY, &opts).unwrap_err();
        match err {
            Error::QuadratureFailure { partial, .. } => assert!(partial > 1000.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_integrand() {
        let opts = QuadOptions::default();
        assert_eq!(integrate_half_line(|_s: f64| 0.0, &[], f64::INFINITY, &opts).unwrap(), 0.0);
    }

    #[test]
    fn finite_cap() {
        let opts = QuadOptions::default();
        let v = integrate_half_line(|_s: f64| 1.0, &[], 3.5, &opts).unwrap();
        assert!((v - 3.5).abs() < 1e-13);
    }
}
