//! The constants `L_p(g) = ∫_{R^p} |g(Σu)|² |Σu|^{−2K} Π|u_i|^{−2d} du`.
//!
//! The `p`-fold integral reduces to
//! `L_p = Γ_p ∫ |g(s)|² |s|^{p−1−2pd−2K} ds` with
//! `Γ_p = Π_{i=2}^{p} ∫ |t|^{p−i−2d(p−i+1)} |1−t|^{−2d} dt`.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_panels, integrate_power_left, QuadOptions};
use crate::wavelet::{FilterBank, LimitTransfer};

fn beta(a: f64, b: f64) -> f64 {
    // all arguments here are positive
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// `∫_R |t|^a |1−t|^b dt` in closed form: the pieces over `(0,1)`,
/// `(1,∞)` and `(−∞,0)` are Beta integrals.
pub fn power_pair_integral(a: f64, b: f64) -> Result<f64> {
    if !(a > -1.0 && b > -1.0 && a + b < -1.0) {
        return Err(Error::domain(format!(
            "∫|t|^{a}|1−t|^{b} diverges (need a, b > −1 and a + b < −1)"
        )));
    }
    let c = -a - b - 1.0;
    Ok(beta(a + 1.0, b + 1.0) + beta(c, b + 1.0) + beta(a + 1.0, c))
}

/// `Γ_p`, with `Γ_1 = 1`.
pub fn gamma_p(p: u32, d: f64) -> Result<f64> {
    let mut g = 1.0;
    for i in 2..=p {
        let m = (p - i) as f64;
        g *= power_pair_integral(m - 2.0 * d * (m + 1.0), -2.0 * d)?;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    /// Radial integrals stop here; beyond it a power-law tail is added.
    pub lambda_max: f64,
    /// Decay exponent used for the tail; defaults to the bank's.
    pub alpha: Option<f64>,
    pub quad: QuadOptions,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            lambda_max: crate::wavelet::DEFAULT_LAMBDA_MAX,
            alpha: None,
            quad: QuadOptions {
                abs_tol: 0.0,
                rel_tol: 1e-9,
                max_intervals: 20_000,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LpValue {
    pub p: u32,
    pub value: f64,
    pub gamma_p: f64,
    /// `∫ |g(s)|² |s|^c ds` including the tail.
    pub radial: f64,
    /// Tail part of `radial` beyond `lambda_max`.
    pub tail: f64,
    pub quad_error: f64,
}

/// `∫_R |g(s)|² |s|^c ds` for an even `|g|²`.
///
/// With `support = Some(R)` the integrand is taken to vanish beyond `R`;
/// otherwise the part beyond `λ_max` is replaced by
/// `mean_{[λ_max/2, λ_max]}(|g|² s^{2α}) · ∫_{λ_max}^∞ s^{c−2α} ds`.
pub fn radial_integral<F: Fn(f64) -> f64>(
    g2: F,
    c: f64,
    support: Option<f64>,
    alpha: f64,
    opts: &LpOptions,
) -> Result<(f64, f64, f64)> {
    let upper = support.unwrap_or(opts.lambda_max);
    let split = upper.min(1.0);
    // when c ≤ −1 the integrand is only finite because |g|² vanishes at 0
    let near = if c > -1.0 {
        integrate_power_left(&g2, c, split, opts.quad)?
    } else {
        integrate(|s| g2(s) * s.powf(c), 0.0, split, opts.quad)?
    };
    let mut value = near.value;
    let mut err = near.error;
    if upper > split {
        let panels = ((upper - split) / std::f64::consts::PI).ceil().max(1.0) as usize;
        let far = integrate_panels(|s| g2(s) * s.powf(c), split, upper, panels, opts.quad)?;
        value += far.value;
        err += far.error;
    }
    let mut tail = 0.0;
    if support.is_none() {
        let e = 2.0 * alpha - c - 1.0;
        if !(e > 0.0) {
            return Err(Error::domain(format!(
                "|g|²|s|^{c} is not integrable at infinity for decay exponent {alpha}"
            )));
        }
        let lm = opts.lambda_max;
        let pts = 4096;
        let mean = (0..pts)
            .map(|i| {
                let s = lm / 2.0 + (i as f64 + 0.5) * lm / 2.0 / pts as f64;
                g2(s) * s.powf(2.0 * alpha)
            })
            .sum::<f64>()
            / pts as f64;
        tail = mean * lm.powf(c - 2.0 * alpha + 1.0) / e;
    }
    if !(err <= 1e-4 * value.abs()) {
        return Err(Error::numerical(format!(
            "radial quadrature residual {err:.3e} exceeds 1e-4 of {value:.6e}"
        )));
    }
    // both half-lines
    Ok((2.0 * (value + tail), 2.0 * tail, 2.0 * err))
}

fn check_finite(p: u32, d: f64) -> Result<()> {
    if p == 0 {
        return Err(Error::domain("p must be at least 1"));
    }
    crate::spectral::delta(1, d)?;
    if p >= 2 && !((p as f64) * (1.0 - 2.0 * d) < 1.0) {
        return Err(Error::domain(format!(
            "L_p is infinite: p(1−2d) = {} ≥ 1",
            p as f64 * (1.0 - 2.0 * d)
        )));
    }
    Ok(())
}

/// `L_p` for an explicit even `|g|²`.
pub fn compute_l_p_with<F: Fn(f64) -> f64>(
    g2: F,
    support: Option<f64>,
    alpha: f64,
    p: u32,
    d: f64,
    k: u32,
    opts: &LpOptions,
) -> Result<LpValue> {
    check_finite(p, d)?;
    let gp = gamma_p(p, d)?;
    let c = p as f64 - 1.0 - 2.0 * p as f64 * d - 2.0 * k as f64;
    let (radial, tail, err) = radial_integral(g2, c, support, alpha, opts)?;
    Ok(LpValue {
        p,
        value: gp * radial,
        gamma_p: gp,
        radial,
        tail,
        quad_error: gp * err,
    })
}

/// `L_p(ĝ∞)` for a filter bank.
pub fn compute_l_p(bank: &FilterBank, p: u32, d: f64, k: u32, opts: &LpOptions) -> Result<LpValue> {
    let lt = LimitTransfer::new(bank);
    let alpha = opts.alpha.unwrap_or(bank.alpha());
    // surface convergence failures instead of integrating NaN
    lt.eval(opts.lambda_max)?;
    compute_l_p_with(
        |s| lt.eval(s).map_or(f64::NAN, |z| z.norm_sqr()),
        None,
        alpha,
        p,
        d,
        k,
        opts,
    )
}
