//! One-dimensional adaptive quadrature.
//!
//! A globally adaptive 21-point Gauss–Kronrod rule (QUADPACK `qk21`
//! abscissae) plus helpers for integrable power singularities at an
//! endpoint and for semi-infinite ranges.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_059_5,
    0.865_063_366_688_984_510_732_096_688_423_5,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_114_9,
    0.562_757_134_668_604_683_339_000_099_272_7,
    0.433_395_394_129_247_190_799_265_943_165_8,
    0.294_392_862_701_460_198_131_126_603_103_9,
    0.148_874_338_981_631_210_884_826_001_129_7,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_19,
    0.032_558_162_307_964_727_478_818_972_459_39,
    0.054_755_896_574_351_996_031_381_300_244_58,
    0.075_039_674_810_919_952_767_043_140_916_19,
    0.093_125_454_583_697_605_535_065_465_083_37,
    0.109_387_158_802_297_641_899_210_590_325_8,
    0.123_491_976_262_065_851_077_208_501_721_3,
    0.134_709_217_311_473_325_928_054_001_771_7,
    0.142_775_938_577_060_080_797_094_273_138_7,
    0.147_739_104_901_338_491_374_841_515_972_1,
    0.149_445_554_002_916_905_664_936_468_389_8,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_33,
    0.149_451_349_150_580_593_145_776_339_657_7,
    0.219_086_362_515_982_043_995_534_934_228_2,
    0.269_266_719_309_996_355_091_226_921_569_5,
    0.295_524_224_714_752_870_173_892_994_651_3,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_intervals: 20_000,
        }
    }
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for i in 0..10 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).abs())
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]`, starting from `panels` equal subintervals
/// and bisecting the worst one until the error estimate meets the tolerance.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    opts: QuadOptions,
) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration bounds must be finite"));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels * 2);
    let mut total = 0.0;
    let mut total_err = 0.0;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        let (value, error) = kronrod21(&f, lo, hi);
        total += value;
        total_err += error;
        heap.push(Segment {
            a: lo,
            b: hi,
            value,
            error,
        });
    }
    let mut evaluations = 21 * panels;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::numerical(format!(
                "adaptive quadrature on [{a}, {b}] did not converge: value {total:.6e}, error {total_err:.3e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval collapsed to machine resolution; keep what we have.
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod21(&f, worst.a, mid);
        let (v2, e2) = kronrod21(&f, mid, worst.b);
        evaluations += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed accumulated cancellation in the running totals.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Quadrature {
        value,
        error,
        evaluations,
    })
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Quadrature> {
    integrate_panels(f, a, b, 1, opts)
}

/// `∫_0^c x^e h(x) dx` for `e > -1`, with `h` smooth at 0.
///
/// Uses `x = v^{1/(1+e)}`, under which `x^e dx = dv / (1+e)` and the
/// singular factor disappears.
pub fn integrate_power_left<F: Fn(f64) -> f64>(
    h: F,
    exponent: f64,
    c: f64,
    opts: QuadOptions,
) -> Result<Quadrature> {
    if exponent <= -1.0 {
        return Err(Error::domain(format!(
            "endpoint exponent {exponent} is not integrable"
        )));
    }
    if c <= 0.0 {
        return Err(Error::domain("upper limit must be positive"));
    }
    let p = 1.0 + exponent;
    let inv = 1.0 / p;
    let upper = c.powf(p);
    let q = integrate(|v| h(v.powf(inv)), 0.0, upper, opts)?;
    Ok(Quadrature {
        value: q.value * inv,
        error: q.error * inv,
        evaluations: q.evaluations,
    })
}

/// `∫_c^∞ x^e h(x) dx` for `e < -1` and `c > 0`, with `h` bounded and
/// smooth in `1/x`. Maps to the left-singular form by `x = 1/y`.
pub fn integrate_power_tail<F: Fn(f64) -> f64>(
    h: F,
    exponent: f64,
    c: f64,
    opts: QuadOptions,
) -> Result<Quadrature> {
    if exponent >= -1.0 {
        return Err(Error::domain(format!(
            "tail exponent {exponent} is not integrable at infinity"
        )));
    }
    // x^e dx = y^{-e-2} dy
    integrate_power_left(|y| h(1.0 / y), -exponent - 2.0, 1.0 / c, opts)
}
