//! Spectral densities `f(λ) = |1 − e^{−iλ}|^{−2d} f*(λ)` of the Gaussian
//! input, their autocovariances, and memory-exponent arithmetic.
//!
//! Autocovariances use the convention `γ(k) = ∫_{−π}^{π} e^{ikλ} f(λ) dλ`,
//! so a variance-normalized model has `∫ f = 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

fn check_d(d: f64) -> Result<()> {
    if d.is_finite() && d > 0.0 && d < 0.5 {
        Ok(())
    } else {
        Err(Error::domain(format!("memory parameter d = {d} outside (0, 1/2)")))
    }
}

/// `δ(q) = q·d − (q−1)/2`, the memory exponent of `H_q(X)`.
pub fn delta(q: u32, d: f64) -> Result<f64> {
    if q == 0 {
        return Err(Error::domain("Hermite order q must be at least 1"));
    }
    check_d(d)?;
    Ok(q as f64 * d - (q as f64 - 1.0) / 2.0)
}

/// Long-memory admissibility `q0 < 1/(1−2d)`, tested as `δ(q0) > 0` so
/// that boundary cases such as `(5, 0.4)` are not decided by rounding.
pub fn is_long_memory(q0: u32, d: f64) -> Result<bool> {
    Ok(delta(q0, d)? > 0.0)
}

/// Memory exponents of `Y = Δ^{−K} H_{q0}(X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryExponents {
    pub q0: u32,
    pub d: f64,
    pub k: u32,
    pub delta: f64,
    pub delta_plus: f64,
    pub d0: f64,
    pub long_memory: bool,
}

impl MemoryExponents {
    pub fn new(q0: u32, d: f64, k: u32) -> Result<Self> {
        let delta = delta(q0, d)?;
        Ok(Self {
            q0,
            d,
            k,
            delta,
            delta_plus: delta.max(0.0),
            d0: delta + k as f64,
            long_memory: is_long_memory(q0, d)?,
        })
    }
}

/// Short-range factor `f*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShortRange {
    Constant { value: f64 },
    /// Tabulated on increasing abscissae, linearly interpolated and
    /// symmetrized as `(f*(λ) + f*(−λ))/2`. Values outside the table are
    /// clamped to the nearest endpoint.
    Table { lambda: Vec<f64>, values: Vec<f64> },
    /// `value·(1 + amplitude·|λ|^beta)`: a smooth factor whose departure
    /// from `f*(0)` near the origin has a chosen exponent `beta`.
    Power { value: f64, amplitude: f64, beta: f64 },
}

impl ShortRange {
    fn validate(&self) -> Result<()> {
        match self {
            ShortRange::Constant { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(Error::domain(format!("constant f* = {value} must be positive")));
                }
            }
            ShortRange::Power { value, amplitude, beta } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(Error::domain(format!("f* scale {value} must be positive")));
                }
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::domain(format!("smoothness exponent beta = {beta} must be positive")));
                }
                // the factor is monotone in |λ|, so checking |λ| = π suffices
                if !(amplitude.is_finite() && 1.0 + amplitude * std::f64::consts::PI.powf(*beta) > 0.0) {
                    return Err(Error::domain(format!("f* = {value}(1 + {amplitude}|λ|^{beta}) is not positive on [−π, π]")));
                }
            }
            ShortRange::Table { lambda, values } => {
                if lambda.len() < 2 || lambda.len() != values.len() {
                    return Err(Error::domain(
                        "f* table needs at least two points and matching lengths",
                    ));
                }
                if lambda.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::domain("f* table abscissae must be strictly increasing"));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::domain("f* table values must be finite and nonnegative"));
                }
                if !(self.eval(0.0) > 0.0) {
                    return Err(Error::domain("f* must be positive at the origin"));
                }
            }
        }
        Ok(())
    }

    fn interp(lambda: &[f64], values: &[f64], x: f64) -> f64 {
        let n = lambda.len();
        if x <= lambda[0] {
            return values[0];
        }
        if x >= lambda[n - 1] {
            return values[n - 1];
        }
        let i = lambda.partition_point(|&l| l <= x);
        let (x0, x1) = (lambda[i - 1], lambda[i]);
        let t = (x - x0) / (x1 - x0);
        values[i - 1] + t * (values[i] - values[i - 1])
    }

    /// Unscaled `f*(λ)`.
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            ShortRange::Constant { value } => *value,
            ShortRange::Power { value, amplitude, beta } => value * (1.0 + amplitude * lambda.abs().powf(*beta)),
            ShortRange::Table { lambda: l, values } => {
                0.5 * (Self::interp(l, values, lambda) + Self::interp(l, values, -lambda))
            }
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self, ShortRange::Constant { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpectralModelDoc {
    d: f64,
    fstar: ShortRange,
    #[serde(default = "default_true")]
    normalized: bool,
}

fn default_true() -> bool {
    true
}

/// Gaussian input model `f(λ) = |1 − e^{−iλ}|^{−2d} f*(λ)`.
///
/// When `normalized` is set, `f*` is rescaled at construction so that the
/// process has unit variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpectralModelDoc", into = "SpectralModelDoc")]
pub struct SpectralModel {
    d: f64,
    fstar: ShortRange,
    normalized: bool,
    scale: f64,
}

impl From<SpectralModel> for SpectralModelDoc {
    fn from(m: SpectralModel) -> Self {
        SpectralModelDoc {
            d: m.d,
            fstar: m.fstar,
            normalized: m.normalized,
        }
    }
}

impl TryFrom<SpectralModelDoc> for SpectralModel {
    type Error = Error;
    fn try_from(doc: SpectralModelDoc) -> Result<Self> {
        SpectralModel::new(doc.d, doc.fstar, doc.normalized)
    }
}

impl PartialEq for SpectralModel {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.fstar == other.fstar && self.normalized == other.normalized
    }
}

/// `∫_{−π}^{π} e^{ikλ} |1−e^{−iλ}|^{−2d} dλ` for `k = 0..=max_lag`.
pub(crate) fn farima_autocovariance(d: f64, max_lag: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_lag + 1);
    let g0 = 2.0 * PI * (ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp();
    out.push(g0);
    let mut prev = g0;
    for k in 1..=max_lag {
        let kf = k as f64;
        prev *= (kf - 1.0 + d) / (kf - d);
        out.push(prev);
    }
    out
}

impl SpectralModel {
    pub fn new(d: f64, fstar: ShortRange, normalized: bool) -> Result<Self> {
        check_d(d)?;
        fstar.validate()?;
        let mut model = Self {
            d,
            fstar,
            normalized,
            scale: 1.0,
        };
        if normalized {
            let variance = model.autocovariance(0)?[0];
            model.scale = 1.0 / variance;
        }
        Ok(model)
    }

    /// Unit-variance FARIMA(0, d, 0) shape: constant `f*`.
    pub fn farima(d: f64) -> Result<Self> {
        Self::new(d, ShortRange::Constant { value: 1.0 }, true)
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn fstar_spec(&self) -> &ShortRange {
        &self.fstar
    }

    /// Effective `f*(λ)`, including the normalization factor.
    pub fn fstar(&self, lambda: f64) -> f64 {
        self.scale * self.fstar.eval(lambda)
    }

    pub fn fstar_at_zero(&self) -> f64 {
        self.fstar(0.0)
    }

    /// `f(λ)` for `λ ∈ (−π, π]`; `+∞` at the pole `λ = 0`.
    pub fn spectral_density(&self, lambda: f64) -> Result<f64> {
        if !(lambda > -PI && lambda <= PI) {
            return Err(Error::domain(format!(
                "frequency {lambda} outside (-pi, pi]; reduce modulo 2pi first"
            )));
        }
        if lambda == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(self.density_unchecked(lambda))
    }

    pub(crate) fn density_unchecked(&self, lambda: f64) -> f64 {
        (2.0 * (0.5 * lambda).sin()).abs().powf(-2.0 * self.d) * self.fstar(lambda)
    }

    /// `γ(0..=max_lag)`.
    ///
    /// The pole part `f*(0)|1−e^{−iλ}|^{−2d}` is integrated in closed form;
    /// the continuous remainder `(f*(λ) − f*(0))|1−e^{−iλ}|^{−2d}` by an
    /// FFT midpoint rule on an open grid of at least `64·max_lag` cells,
    /// checked against a grid of twice the size.
    pub fn autocovariance(&self, max_lag: usize) -> Result<Vec<f64>> {
        let f0 = self.fstar(0.0);
        let mut gamma: Vec<f64> = farima_autocovariance(self.d, max_lag)
            .into_iter()
            .map(|g| g * f0)
            .collect();
        if self.fstar.is_constant() {
            return Ok(gamma);
        }
        let grid = (64 * max_lag.max(1)).next_power_of_two().max(1 << 14);
        let fine = self.remainder_autocovariance(max_lag, grid)?;
        let check_lags = max_lag.min(4096);
        let check_grid = (64 * check_lags.max(1)).next_power_of_two().max(1 << 14);
        let coarse = if check_grid == grid {
            fine[..=check_lags].to_vec()
        } else {
            self.remainder_autocovariance(check_lags, check_grid)?
        };
        let refined = self.remainder_autocovariance(check_lags, 2 * check_grid)?;
        let scale = gamma[0] + fine[0];
        let worst = coarse
            .iter()
            .zip(&refined)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale.abs();
        if worst > 1e-6 {
            return Err(Error::numerical(format!(
                "autocovariance quadrature not converged: refinement changes lags by {worst:.3e} relative (grid {check_grid})"
            )));
        }
        for (g, r) in gamma.iter_mut().zip(&fine) {
            *g += r;
        }
        Ok(gamma)
    }

    fn remainder_autocovariance(&self, max_lag: usize, grid: usize) -> Result<Vec<f64>> {
        let h = 2.0 * PI / grid as f64;
        let f0 = self.fstar(0.0);
        let mut buf: Vec<Complex64> = (0..grid)
            .map(|m| {
                let lambda = -PI + (m as f64 + 0.5) * h;
                let pole = (2.0 * (0.5 * lambda).sin()).abs().powf(-2.0 * self.d);
                Complex64::new(pole * (self.fstar(lambda) - f0), 0.0)
            })
            .collect();
        // Σ_m r_m e^{ikλ_m} = e^{ik(−π + h/2)} Σ_m r_m e^{ikmh}
        let fft = FftPlanner::new().plan_fft_inverse(grid);
        fft.process(&mut buf);
        let mut out = Vec::with_capacity(max_lag + 1);
        let mut worst_imag: f64 = 0.0;
        for (k, b) in buf.iter().enumerate().take(max_lag + 1) {
            let phase = k as f64 * (-PI + 0.5 * h);
            let v = b * Complex64::from_polar(h, phase);
            worst_imag = worst_imag.max(v.im.abs());
            out.push(v.re);
        }
        if worst_imag > 1e-10 * out[0].abs().max(1.0) {
            return Err(Error::numerical(format!(
                "autocovariance of an even density has imaginary residue {worst_imag:.3e}"
            )));
        }
        Ok(out)
    }
}

/// Shared handle, used where many workers read one model.
pub type SharedModel = Arc<SpectralModel>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_power_left, QuadOptions};

    /// Direct numerical `2 ∫_0^π cos(kλ) f(λ) dλ`, splitting off the pole.
    fn direct_autocovariance(model: &SpectralModel, k: usize) -> f64 {
        let opts = QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_intervals: 200_000,
        };
        let kf = k as f64;
        let d = model.d();
        let cut = (PI / (kf + 1.0)).min(0.5);
        // On (0, cut]: f(λ) = λ^{-2d} · [(λ / |2 sin(λ/2)|)^{2d} f*(λ)]
        let near = integrate_power_left(
            |l| {
                if l == 0.0 {
                    return model.fstar(0.0);
                }
                (kf * l).cos() * (l / (2.0 * (0.5 * l).sin())).powf(2.0 * d) * model.fstar(l)
            },
            -2.0 * d,
            cut,
            opts,
        )
        .unwrap();
        let panels = (k + 1) * 4;
        let far = crate::quad::integrate_panels(
            |l| (kf * l).cos() * model.density_unchecked(l),
            cut,
            PI,
            panels,
            opts,
        )
        .unwrap();
        2.0 * (near.value + far.value)
    }

    #[test]
    fn delta_examples() {
        assert!((delta(1, 0.4).unwrap() - 0.4).abs() < 1e-15);
        assert!((delta(2, 0.4).unwrap() - 0.3).abs() < 1e-15);
        assert!((delta(3, 0.4).unwrap() - 0.2).abs() < 1e-15);
        assert!(delta(0, 0.4).is_err());
        assert!(delta(1, 0.5).is_err());
        assert!(delta(1, 0.0).is_err());
    }

    #[test]
    fn long_memory_examples() {
        assert!(is_long_memory(2, 0.3).unwrap());
        assert!(!is_long_memory(3, 0.3).unwrap());
        assert!(!is_long_memory(5, 0.4).unwrap());
    }

    #[test]
    fn long_memory_iff_delta_in_open_unit_half() {
        for q0 in 1..=8 {
            for i in 1..=9 {
                let d = 0.05 * i as f64;
                let dl = delta(q0, d).unwrap();
                assert_eq!(
                    is_long_memory(q0, d).unwrap(),
                    dl > 0.0 && dl < 0.5,
                    "q0={q0} d={d}"
                );
            }
        }
    }

    #[test]
    fn memory_exponent_identities() {
        let m = MemoryExponents::new(3, 0.45, 2).unwrap();
        assert_eq!(m.delta, 3.0 * 0.45 - 1.0);
        assert_eq!(m.delta_plus, m.delta.max(0.0));
        assert_eq!(m.d0, m.delta + 2.0);
        let short = MemoryExponents::new(3, 0.3, 0).unwrap();
        assert_eq!(short.delta_plus, 0.0);
        assert!(!short.long_memory);
    }

    #[test]
    fn spectral_density_examples() {
        let c = 0.37;
        let m = SpectralModel::new(0.4, ShortRange::Constant { value: c / (2.0 * PI) }, false).unwrap();
        let v = m.spectral_density(PI).unwrap();
        assert!((v - c * 2f64.powf(-0.8) / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(m.spectral_density(0.0).unwrap(), f64::INFINITY);
        let m = SpectralModel::new(0.25, ShortRange::Constant { value: 1.0 }, false).unwrap();
        assert!((m.spectral_density(PI / 2.0).unwrap() - 2f64.powf(-0.25)).abs() < 1e-14);
        assert!(m.spectral_density(-PI).is_err());
        assert!(m.spectral_density(4.0).is_err());
    }

    #[test]
    fn normalized_model_has_unit_variance() {
        for d in [0.05, 0.2, 0.4, 0.49] {
            let m = SpectralModel::farima(d).unwrap();
            assert!((m.autocovariance(0).unwrap()[0] - 1.0).abs() < 1e-12);
            // ∫ f = 1 by independent quadrature.
            assert!((direct_autocovariance(&m, 0) - 1.0).abs() < 1e-8, "d={d}");
        }
    }

    #[test]
    fn closed_form_matches_direct_quadrature() {
        let m = SpectralModel::farima(0.4).unwrap();
        let gamma = m.autocovariance(100).unwrap();
        for k in [1, 2, 5, 17, 100] {
            let direct = direct_autocovariance(&m, k);
            assert!(
                ((gamma[k] - direct) / direct).abs() < 1e-7,
                "lag {k}: {} vs {}",
                gamma[k],
                direct
            );
        }
    }

    #[test]
    fn large_lag_ratio_follows_power_law() {
        let m = SpectralModel::farima(0.4).unwrap();
        let gamma = m.autocovariance(512).unwrap();
        let ratio = gamma[512] / gamma[256];
        let target = 2f64.powf(2.0 * 0.4 - 1.0);
        assert!(((ratio - target) / target).abs() < 0.03);
        let direct = direct_autocovariance(&m, 256);
        assert!(((gamma[256] - direct) / direct).abs() < 1e-6);
    }

    #[test]
    fn autocovariance_increases_with_d() {
        let low = SpectralModel::farima(0.1).unwrap().autocovariance(50).unwrap();
        let high = SpectralModel::farima(0.4).unwrap().autocovariance(50).unwrap();
        assert!(high[50] > low[50]);
    }

    #[test]
    fn partial_sums_grow_like_l_to_2d() {
        let d = 0.3;
        let m = SpectralModel::farima(d).unwrap();
        let gamma = m.autocovariance(1 << 14).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut acc = gamma[0];
        let mut next = 1usize << 8;
        for (l, g) in gamma.iter().enumerate().skip(1) {
            acc += 2.0 * g;
            if l == next {
                xs.push((l as f64).ln());
                ys.push(acc.ln());
                next *= 2;
            }
        }
        let slope = crate::stats::ols_slope(&xs, &ys);
        assert!(((slope - 2.0 * d) / (2.0 * d)).abs() < 0.10, "slope {slope}");
    }

    #[test]
    fn tabulated_fstar_matches_direct_quadrature() {
        let lambda: Vec<f64> = (0..=512).map(|i| PI * i as f64 / 512.0).collect();
        let values: Vec<f64> = lambda.iter().map(|l| 1.0 + 0.5 * l.cos()).collect();
        let m = SpectralModel::new(0.3, ShortRange::Table { lambda, values }, true).unwrap();
        let gamma = m.autocovariance(64).unwrap();
        assert!((gamma[0] - 1.0).abs() < 1e-6);
        for k in [1, 8, 64] {
            let direct = direct_autocovariance(&m, k);
            assert!(((gamma[k] - direct) / direct).abs() < 1e-5, "lag {k}");
        }
    }

    #[test]
    fn power_fstar_matches_direct_quadrature() {
        let fs = ShortRange::Power { value: 1.0, amplitude: -0.1, beta: 1.5 };
        let m = SpectralModel::new(0.4, fs, true).unwrap();
        let gamma = m.autocovariance(64).unwrap();
        for k in [1, 8, 64] {
            let direct = direct_autocovariance(&m, k);
            assert!(((gamma[k] - direct) / direct).abs() < 1e-5, "lag {k}");
        }
        let bad = ShortRange::Power { value: 1.0, amplitude: -1.0, beta: 1.0 };
        assert!(SpectralModel::new(0.4, bad, true).is_err());
        let doc: ShortRange = serde_json::from_str(r#"{"kind": "power", "value": 2, "amplitude": 1, "beta": 2}"#).unwrap();
        assert!((doc.eval(-2.0) - 10.0).abs() < 1e-15);
    }

    #[test]
    fn table_is_symmetrized() {
        let fs = ShortRange::Table {
            lambda: vec![-PI, 0.0, PI],
            values: vec![1.0, 2.0, 5.0],
        };
        assert!((fs.eval(PI) - 3.0).abs() < 1e-15);
        assert!((fs.eval(-PI) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(SpectralModel::new(0.6, ShortRange::Constant { value: 1.0 }, true).is_err());
        assert!(SpectralModel::new(0.3, ShortRange::Constant { value: 0.0 }, true).is_err());
        let zero_at_origin = ShortRange::Table {
            lambda: vec![0.0, PI],
            values: vec![0.0, 1.0],
        };
        assert!(SpectralModel::new(0.3, zero_at_origin, true).is_err());
    }

    #[test]
    fn json_round_trip_preserves_normalization() {
        let m = SpectralModel::farima(0.35).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"kind\":\"constant\""));
        let back: SpectralModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!((back.fstar_at_zero() - m.fstar_at_zero()).abs() < 1e-15);
        let bad = r#"{"d": 0.7, "fstar": {"kind": "constant", "value": 1.0}}"#;
        assert!(serde_json::from_str::<SpectralModel>(bad).is_err());
    }
}
