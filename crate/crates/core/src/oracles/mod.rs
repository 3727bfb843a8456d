//! Limit constants of the scalogram and reference samplers for its limits.

mod dirichlet;
mod lp;
mod rosenblatt;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{integrate_panels, QuadOptions};
use crate::spectral::{MemoryExponents, SpectralModel};
use crate::wavelet::{FilterBank, LimitTransfer};

pub use dirichlet::{dirichlet_bound_check, dirichlet_kernel, wrap_to_pi, DirichletReport};
pub use lp::{
    compute_l_p, compute_l_p_with, gamma_p, power_pair_integral, radial_integral, LpOptions,
    LpValue,
};
pub use rosenblatt::{
    partial_sum_convergence, rosenblatt_oracle_sample, spectral_grid_variance, PartialSumConvergence,
    RosenblattMethod, RosenblattSamples,
    SpectralGrid,
};

fn factorial(q: u32) -> f64 {
    (1..=q).map(f64::from).product()
}

/// `Γ_{1,1}` and the change observed when the alias sum is doubled.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianVariance {
    pub value: f64,
    pub p_trunc: usize,
    /// `|Γ(2P) − Γ(P)| / Γ(2P)`.
    pub truncation_change: f64,
}

fn alias_energy(lt: &LimitTransfer, lambda: f64, p_trunc: usize, expo: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (-(p_trunc as i64)..=p_trunc as i64)
        .map(|p| {
            let x = lambda + two_pi * p as f64;
            let g = lt.eval(x).map_or(f64::NAN, |z| z.norm_sqr());
            x.abs().powf(-expo) * g
        })
        .sum()
}

fn gamma11_raw(lt: &LimitTransfer, fstar0: f64, d: f64, k: u32, p_trunc: usize) -> Result<f64> {
    let expo = 2.0 * (k as f64 + d);
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-9,
        max_intervals: 20_000,
    };
    let q = integrate_panels(
        |l| alias_energy(lt, l, p_trunc, expo).powi(2),
        0.0,
        std::f64::consts::PI,
        8,
        opts,
    )?;
    if !q.value.is_finite() {
        return Err(Error::numerical("alias sum produced a non-finite value"));
    }
    // even integrand: ∫_{−π}^{π} = 2∫_0^π
    Ok(4.0 * std::f64::consts::PI * fstar0 * fstar0 * 2.0 * q.value)
}

/// Asymptotic variance of `n_j^{1/2} 2^{−2j(d+K)} (σ̂²_j − σ²_j)` for `q0 = 1`:
/// `Γ_{1,1} = 4π f*(0)² ∫_{−π}^{π} |Σ_{|p|≤P} |λ+2pπ|^{−2(K+d)} |ĝ∞(λ+2pπ)|²|² dλ`.
///
/// The prefactor is `4π` rather than the `1/π` of the usual statement: with
/// `γ(k) = ∫ e^{ikλ} f(λ) dλ`, one has `Σ_τ Cov(τ)² = 2π ∫ A²` and
/// `Var σ̂² ≈ (2/n) Σ_τ Cov(τ)²`. Fails if doubling `P` moves the value by
/// more than 1%.
pub fn gaussian_limit_variance(
    bank: &FilterBank,
    model: &SpectralModel,
    k: u32,
    p_trunc: usize,
) -> Result<GaussianVariance> {
    if p_trunc < 8 {
        return Err(Error::domain("p_trunc must be at least 8"));
    }
    let lt = LimitTransfer::new(bank);
    let f0 = model.fstar_at_zero();
    let d = model.d();
    let a = gamma11_raw(&lt, f0, d, k, p_trunc)?;
    let b = gamma11_raw(&lt, f0, d, k, 2 * p_trunc)?;
    let change = (b - a).abs() / b;
    if change > 0.01 {
        return Err(Error::numerical(format!(
            "alias truncation at P = {p_trunc} changes Γ by {:.2}%; increase p_trunc",
            100.0 * change
        )));
    }
    Ok(GaussianVariance {
        value: a,
        p_trunc,
        truncation_change: change,
    })
}

/// Constants governing the wavelet spectrum and its fluctuations.
#[derive(Debug, Clone, Serialize)]
pub struct LimitConstants {
    pub q0: u32,
    pub d: f64,
    pub k: u32,
    pub fstar0: f64,
    pub d0: f64,
    /// `L_p(ĝ∞)` for `p ∈ {q0−1, q0}` (`p ≥ 1`).
    pub l: BTreeMap<u32, LpValue>,
    /// `Γ_{1,1}` when `q0 = 1`.
    pub gaussian_variance: Option<GaussianVariance>,
}

impl LimitConstants {
    pub fn compute(model: &SpectralModel, bank: &FilterBank, q0: u32, k: u32) -> Result<Self> {
        Self::compute_with(model, bank, q0, k, &LpOptions::default())
    }

    pub fn compute_with(
        model: &SpectralModel,
        bank: &FilterBank,
        q0: u32,
        k: u32,
        opts: &LpOptions,
    ) -> Result<Self> {
        let ex = MemoryExponents::new(q0, model.d(), k)?;
        if !ex.long_memory {
            return Err(Error::Admissibility(format!(
                "q0 = {q0}, d = {} is not long memory",
                model.d()
            )));
        }
        let mut l = BTreeMap::new();
        for p in [q0 - 1, q0] {
            if p >= 1 {
                l.insert(p, compute_l_p(bank, p, model.d(), k, opts)?);
            }
        }
        let gaussian_variance = if q0 == 1 {
            Some(gaussian_limit_variance(bank, model, k, 16)?)
        } else {
            None
        };
        Ok(Self {
            q0,
            d: model.d(),
            k,
            fstar0: model.fstar_at_zero(),
            d0: ex.d0,
            l,
            gaussian_variance,
        })
    }

    pub fn l_p(&self, p: u32) -> Option<f64> {
        self.l.get(&p).map(|v| v.value)
    }

    /// `q0! f*(0)^{q0} L_{q0} 2^{2j(δ(q0)+K)}`.
    pub fn predicted_spectrum(&self, j: usize) -> f64 {
        factorial(self.q0)
            * self.fstar0.powi(self.q0 as i32)
            * self.l_p(self.q0).expect("L_q0 is always computed")
            * 2f64.powf(2.0 * j as f64 * self.d0)
    }

    /// `2^{(2d−1)u} L_{q0−1} / (q0! L_{q0})` for each `u`.
    pub fn limit_scale_profile(&self, us: &[u32]) -> Result<Vec<f64>> {
        let lower = self
            .l_p(self.q0.wrapping_sub(1))
            .filter(|_| self.q0 >= 2)
            .ok_or_else(|| Error::domain("the scale profile needs q0 >= 2"))?;
        let base = lower / (factorial(self.q0) * self.l_p(self.q0).unwrap());
        Ok(us
            .iter()
            .map(|&u| 2f64.powf((2.0 * self.d - 1.0) * u as f64) * base)
            .collect())
    }

    /// `{"L": {"p": value}, "Gamma11": value, "profile": [...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let l: serde_json::Map<String, serde_json::Value> = self
            .l
            .iter()
            .map(|(p, v)| (p.to_string(), v.value.into()))
            .collect();
        let profile = self.limit_scale_profile(&[0, 1, 2, 3]).ok();
        serde_json::json!({
            "q0": self.q0,
            "d": self.d,
            "K": self.k,
            "fstar0": self.fstar0,
            "d0": self.d0,
            "L": l,
            "Gamma11": self.gaussian_variance.map(|g| g.value),
            "profile": profile,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ShortRange;
    use crate::wavelet::make_filter_bank;

    #[test]
    fn spectrum_is_a_pure_power_law() {
        let model = SpectralModel::farima(0.4).unwrap();
        let bank = make_filter_bank("haar", 8, 0).unwrap();
        let c = LimitConstants::compute(&model, &bank, 2, 0).unwrap();
        let r = c.predicted_spectrum(6) / c.predicted_spectrum(5);
        assert!((r - 2f64.powf(0.6)).abs() < 1e-12);
    }

    #[test]
    fn profile_is_geometric() {
        let model = SpectralModel::farima(0.4).unwrap();
        let bank = make_filter_bank("haar", 8, 0).unwrap();
        let c = LimitConstants::compute(&model, &bank, 2, 0).unwrap();
        let p = c.limit_scale_profile(&[0, 1, 2]).unwrap();
        assert!((p[0] - c.l_p(1).unwrap() / (2.0 * c.l_p(2).unwrap())).abs() < 1e-15);
        assert!((p[0] / p[1] - 2f64.powf(1.0 - 0.8)).abs() < 1e-12);
        let g = LimitConstants::compute(&model, &bank, 1, 0).unwrap();
        assert!(g.limit_scale_profile(&[0]).is_err());
        assert!(g.gaussian_variance.is_some());
    }

    #[test]
    fn gamma11_truncation_is_converged() {
        let model = SpectralModel::farima(0.4).unwrap();
        for name in ["haar", "db2"] {
            let bank = make_filter_bank(name, 8, 0).unwrap();
            let g = gaussian_limit_variance(&bank, &model, 0, 8).unwrap();
            let g2 = gaussian_limit_variance(&bank, &model, 0, 16).unwrap();
            assert!(g.truncation_change < 0.01);
            assert!((g.value - g2.value).abs() < 0.01 * g2.value, "{name}");
        }
    }

    #[test]
    fn gamma11_scales_with_fstar_squared() {
        let bank = make_filter_bank("haar", 8, 0).unwrap();
        let a = SpectralModel::new(0.4, ShortRange::Constant { value: 1.0 }, false).unwrap();
        let b = SpectralModel::new(0.4, ShortRange::Constant { value: 3.0 }, false).unwrap();
        let ga = gaussian_limit_variance(&bank, &a, 0, 8).unwrap().value;
        let gb = gaussian_limit_variance(&bank, &b, 0, 8).unwrap().value;
        assert!((gb / ga - 9.0).abs() < 1e-12);
    }

    #[test]
    fn constants_json_shape() {
        let model = SpectralModel::farima(0.4).unwrap();
        let bank = make_filter_bank("haar", 8, 0).unwrap();
        let v = LimitConstants::compute(&model, &bank, 2, 0).unwrap().to_json();
        assert!(v["L"]["1"].as_f64().unwrap() > 0.0);
        assert!(v["L"]["2"].as_f64().unwrap() > 0.0);
        assert_eq!(v["profile"].as_array().unwrap().len(), 4);
        assert!(v["Gamma11"].is_null());
    }

    #[test]
    fn constants_stable_under_refinement() {
        let model = SpectralModel::farima(0.4).unwrap();
        let bank = make_filter_bank("db2", 8, 0).unwrap();
        let base = LimitConstants::compute(&model, &bank, 2, 0).unwrap();
        let fine = LpOptions {
            lambda_max: 2.0 * LpOptions::default().lambda_max,
            quad: QuadOptions {
                abs_tol: 0.0,
                rel_tol: 1e-11,
                max_intervals: 50_000,
            },
            ..Default::default()
        };
        let refined = LimitConstants::compute_with(&model, &bank, 2, 0, &fine).unwrap();
        for p in [1, 2] {
            let (a, b) = (base.l_p(p).unwrap(), refined.l_p(p).unwrap());
            assert!((a - b).abs() < 0.005 * b, "p={p}: {a} vs {b}");
        }
    }
}
