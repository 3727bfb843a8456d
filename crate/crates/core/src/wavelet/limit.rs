//! The limit transfer function `ĝ∞ = lim 2^{−j/2} ĝ_j(2^{−j} ·)` and
//! checks of the decay assumptions on the bank.
//!
//! With the cascade factorization,
//! `2^{−j/2} ĝ_j(2^{−j}λ) = (Ĥ(λ/2)/√2) Π_{m=2}^{j} L̂(λ/2^m)/√2`.
//! Since `L̂(0) = √2` and `L̂` is smooth, the product converges as a complex
//! number, so no phase correction is needed to define the limit.

use num_complex::Complex64;
use serde::Serialize;

use super::{Filter, FilterBank};
use crate::error::{Error, Result};
use crate::spectral::delta;

pub const DEFAULT_LAMBDA_MAX: f64 = 64.0 * std::f64::consts::PI;

/// Evaluator for `ĝ∞` bound to one bank.
#[derive(Debug, Clone)]
pub struct LimitTransfer {
    lo: Filter,
    hi: Filter,
    /// Factors closer to 1 than this end the product.
    pub tol: f64,
    pub max_level: usize,
    pub lambda_max: f64,
}

impl LimitTransfer {
    pub fn new(bank: &FilterBank) -> Self {
        Self {
            lo: Filter::causal(bank.lowpass().to_vec()),
            hi: Filter::causal(bank.highpass().to_vec()),
            tol: 1e-14,
            max_level: 64,
            lambda_max: DEFAULT_LAMBDA_MAX,
        }
    }

    pub fn with_lambda_max(mut self, lambda_max: f64) -> Self {
        self.lambda_max = lambda_max;
        self
    }

    /// `ĝ∞(λ)` for any real `λ`, ignoring `lambda_max`.
    pub fn eval(&self, lambda: f64) -> Result<Complex64> {
        let s2 = std::f64::consts::SQRT_2;
        let mut acc = self.hi.dtft(lambda / 2.0) / s2;
        let mut scale = lambda / 4.0;
        for _ in 2..=self.max_level {
            let factor = self.lo.dtft(scale) / s2;
            acc *= factor;
            if (factor - 1.0).norm() < self.tol {
                return Ok(acc);
            }
            scale /= 2.0;
        }
        Err(Error::numerical(format!(
            "limit transfer at λ={lambda} not converged after {} levels",
            self.max_level
        )))
    }

    pub fn modulus(&self, lambda: f64) -> Result<f64> {
        self.eval(lambda).map(|z| z.norm())
    }
}

/// `ĝ∞(λ)` for `|λ| ≤ 64π`.
pub fn h_infty_eval(bank: &FilterBank, lambda: f64) -> Result<Complex64> {
    let lt = LimitTransfer::new(bank);
    if !(lambda.abs() <= lt.lambda_max) {
        return Err(Error::domain(format!(
            "|λ| = {} exceeds λ_max = {}",
            lambda.abs(),
            lt.lambda_max
        )));
    }
    lt.eval(lambda)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub alpha: f64,
    /// `(k, max_{λ ∈ [2^k, 2^{k+1}]} |ĝ∞(λ)|)`.
    pub windows: Vec<(i32, f64)>,
}

/// Fits the decay exponent of `|ĝ∞|` from the log₂-slope of its maximum
/// over dyadic windows `[2^k, 2^{k+1}]`, `k = 5..=12`.
pub fn fit_decay(bank: &FilterBank) -> Result<DecayFit> {
    let lt = LimitTransfer::new(bank);
    let mut windows = Vec::new();
    for k in 5..=12 {
        let lo = 2f64.powi(k);
        let pts = 4 << k;
        let mut best: f64 = 0.0;
        for i in 0..=pts {
            let lam = lo + lo * i as f64 / pts as f64;
            best = best.max(lt.modulus(lam)?);
        }
        windows.push((k, best));
    }
    let xs: Vec<f64> = windows.iter().map(|w| w.0 as f64).collect();
    let ys: Vec<f64> = windows.iter().map(|w| w.1.log2()).collect();
    Ok(DecayFit {
        alpha: -crate::stats::ols_slope(&xs, &ys),
        windows,
    })
}

/// Smallest `C_j` with
/// `|ĝ_j(λ)| ≤ C_j 2^{j/2} |2^jλ|^M (1 + 2^j|λ|)^{−α−M}` on a grid of `(0, π]`.
pub fn decay_constants(bank: &FilterBank, scales: &[usize]) -> Vec<(usize, f64)> {
    let m = bank.vanishing_moments() as i32;
    let alpha = bank.alpha();
    let grid: Vec<f64> = (0..400)
        .map(|i| std::f64::consts::PI * 10f64.powf(-6.0 + 6.0 * i as f64 / 400.0))
        .chain((1..=4096).map(|i| std::f64::consts::PI * i as f64 / 4096.0))
        .collect();
    scales
        .iter()
        .map(|&j| {
            let gj = 2f64.powi(j as i32);
            let c = grid
                .iter()
                .map(|&lam| {
                    let x = gj * lam;
                    let bound = gj.sqrt() * x.powi(m) * (1.0 + x).powf(-alpha - m as f64);
                    bank.transfer(j, lam).norm() / bound
                })
                .fold(0.0, f64::max);
            (j, c)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub family: String,
    pub m: u32,
    pub k: u32,
    pub q0: u32,
    pub d: f64,
    pub delta: f64,
    /// `K + δ(q0)`.
    pub required: f64,
    pub pass: bool,
    pub alpha: f64,
    pub alpha_fitted: f64,
    pub decay_constants: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

/// Checks `M ≥ K + δ(q0)` and reports the decay-bound constants for
/// `j = 3..=8`. Only domain errors on `(q0, d)` are returned as `Err`.
pub fn check_admissibility(bank: &FilterBank, q0: u32, d: f64, k: u32) -> Result<AdmissibilityReport> {
    let dq = delta(q0, d)?;
    let required = k as f64 + dq;
    let m = bank.vanishing_moments();
    let fit = fit_decay(bank)?;
    let mut warnings = Vec::new();
    let rel = (fit.alpha - bank.alpha()).abs() / bank.alpha();
    if rel > 0.2 {
        warnings.push(format!(
            "fitted decay exponent {:.3} differs from recorded {:.3} by {:.0}%",
            fit.alpha,
            bank.alpha(),
            100.0 * rel
        ));
    }
    let consts = decay_constants(bank, &[3, 4, 5, 6, 7, 8]);
    let (cmin, cmax) = consts
        .iter()
        .fold((f64::INFINITY, 0f64), |(a, b), &(_, c)| (a.min(c), b.max(c)));
    if cmax > 2.0 * cmin {
        warnings.push(format!(
            "decay constant varies by more than a factor 2 across scales ({cmin:.3}..{cmax:.3})"
        ));
    }
    Ok(AdmissibilityReport {
        family: bank.family().name().to_string(),
        m,
        k,
        q0,
        d,
        delta: dq,
        required,
        pass: m as f64 >= required,
        alpha: bank.alpha(),
        alpha_fitted: fit.alpha,
        decay_constants: consts,
        warnings,
    })
}
