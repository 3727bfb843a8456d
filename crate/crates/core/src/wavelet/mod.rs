//! Dyadic wavelet filter banks.
//!
//! `g_j` is the scale-`j` detail filter of the orthonormal pyramid, so that
//! `W_{j,k} = Σ_t g_j(2^j k − t) Y_t`. It is built by the cascade
//! `g_j = up^{j−1}(hi) ⋆ up^{j−2}(lo) ⋆ … ⋆ lo`, which gives
//! `ĝ_j(λ) = Ĥ(2^{j−1}λ) Π_{i<j−1} L̂(2^i λ)`.

mod limit;
pub mod taps;
mod transform;

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use limit::{
    check_admissibility, decay_constants, fit_decay, h_infty_eval, AdmissibilityReport,
    DecayFit, LimitTransfer, DEFAULT_LAMBDA_MAX,
};
pub(crate) use transform::trim_count;
pub use transform::{
    direct_wavelet_coeffs, dwt_details, multiscale_to_multivariate, CoefficientTable,
    ScaleCoefficients,
};

/// A finite filter `h(t)`, `t ∈ [offset, offset + taps.len())`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub offset: i64,
    pub taps: Vec<f64>,
}

impl Filter {
    pub fn causal(taps: Vec<f64>) -> Self {
        Self { offset: 0, taps }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// `ĥ(λ) = Σ_t h(t) e^{−iλt}`.
    pub fn dtft(&self, lambda: f64) -> Complex64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(i, &h)| Complex64::from_polar(h, -lambda * (self.offset + i as i64) as f64))
            .sum()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|h| h * h).sum()
    }

    /// `Σ_t h(t) t^k`.
    pub fn moment(&self, k: u32) -> f64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(i, &h)| h * ((self.offset + i as i64) as f64).powi(k as i32))
            .sum()
    }

    /// `Σ_t |h(t)| |t|^k`, the scale against which moments are judged.
    pub fn abs_moment(&self, k: u32) -> f64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(i, &h)| h.abs() * ((self.offset + i as i64) as f64).abs().powi(k as i32))
            .sum()
    }
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn upsample(taps: &[f64], factor: usize) -> Vec<f64> {
    let mut out = vec![0.0; (taps.len() - 1) * factor + 1];
    for (i, &t) in taps.iter().enumerate() {
        out[i * factor] = t;
    }
    out
}

/// Quadrature-mirror highpass `hi[k] = (−1)^k lo[L−1−k]`.
pub fn mirror_highpass(lowpass: &[f64]) -> Vec<f64> {
    let l = lowpass.len();
    (0..l)
        .map(|k| if k % 2 == 0 { lowpass[l - 1 - k] } else { -lowpass[l - 1 - k] })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Haar,
    Db2,
    Db3,
    Db4,
    User,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Haar => "haar",
            Family::Db2 => "db2",
            Family::Db3 => "db3",
            Family::Db4 => "db4",
            Family::User => "user",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Family::Haar),
            "db2" => Ok(Family::Db2),
            "db3" => Ok(Family::Db3),
            "db4" => Ok(Family::Db4),
            "user" => Ok(Family::User),
            other => Err(Error::domain(format!("unknown wavelet family '{other}'"))),
        }
    }

    fn lowpass(self) -> Option<&'static [f64]> {
        match self {
            Family::Haar => Some(&taps::HAAR),
            Family::Db2 => Some(&taps::DB2),
            Family::Db3 => Some(&taps::DB3),
            Family::Db4 => Some(&taps::DB4),
            Family::User => None,
        }
    }

    /// Fourier decay exponent of the limit filter (Daubechies–Cohen
    /// estimates for N = 2..4; Haar decays exactly like `1/|λ|`).
    fn known_alpha(self) -> Option<f64> {
        match self {
            Family::Haar => Some(1.0),
            Family::Db2 => Some(1.339),
            Family::Db3 => Some(1.636),
            Family::Db4 => Some(1.919),
            Family::User => None,
        }
    }
}

/// Per-level detail filters with their metadata.
#[derive(Debug, Clone)]
pub struct FilterBank {
    family: Family,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    levels: usize,
    per_level: Vec<Filter>,
    vanishing_moments: u32,
    alpha: f64,
}

/// Counts leading vanishing moments of a highpass filter.
fn count_vanishing_moments(highpass: &[f64]) -> u32 {
    let f = Filter::causal(highpass.to_vec());
    let mut m = 0;
    while (m as usize) < highpass.len() && f.moment(m).abs() <= 1e-10 * f.abs_moment(m).max(1e-300) {
        m += 1;
    }
    m
}

impl FilterBank {
    fn from_parts(
        family: Family,
        lowpass: Vec<f64>,
        highpass: Vec<f64>,
        levels: usize,
        alpha: Option<f64>,
    ) -> Result<Self> {
        if levels == 0 {
            return Err(Error::domain("a filter bank needs at least one level"));
        }
        if lowpass.len() < 2 || lowpass.len() != highpass.len() {
            return Err(Error::domain("lowpass and highpass must have equal length >= 2"));
        }
        let mut per_level = Vec::with_capacity(levels);
        let mut cascade = vec![1.0];
        for j in 1..=levels {
            let g = convolve(&cascade, &upsample(&highpass, 1 << (j - 1)));
            per_level.push(Filter::causal(g));
            cascade = convolve(&cascade, &upsample(&lowpass, 1 << (j - 1)));
        }
        let vanishing_moments = count_vanishing_moments(&highpass);
        let mut bank = Self {
            family,
            lowpass,
            highpass,
            levels,
            per_level,
            vanishing_moments,
            alpha: 0.0,
        };
        bank.alpha = match alpha {
            Some(a) => a,
            None => fit_decay(&bank)?.alpha,
        };
        Ok(bank)
    }

    /// Custom orthonormal pair. `alpha` defaults to the fitted decay.
    pub fn from_taps(lowpass: Vec<f64>, highpass: Vec<f64>, levels: usize, alpha: Option<f64>) -> Result<Self> {
        Self::from_parts(Family::User, lowpass, highpass, levels, alpha)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn vanishing_moments(&self) -> u32 {
        self.vanishing_moments
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Length `T` of the support of the generating wavelet, `L − 1`.
    pub fn support(&self) -> usize {
        self.lowpass.len() - 1
    }

    /// Support length `T_j = (L−1)(2^j − 1) + 1` of `g_j`.
    pub fn support_len(&self, j: usize) -> usize {
        self.support() * ((1usize << j) - 1) + 1
    }

    /// `g_j` for `1 ≤ j ≤ levels`.
    pub fn level(&self, j: usize) -> Result<&Filter> {
        if j == 0 || j > self.levels {
            return Err(Error::domain(format!(
                "level {j} outside 1..={} of the bank",
                self.levels
            )));
        }
        Ok(&self.per_level[j - 1])
    }

    /// `ĝ_j(λ)` through the cascade factorization; valid for any `j ≥ 1`.
    pub fn transfer(&self, j: usize, lambda: f64) -> Complex64 {
        let lo = Filter::causal(self.lowpass.clone());
        let hi = Filter::causal(self.highpass.clone());
        let mut acc = hi.dtft(lambda * (1u64 << (j - 1)) as f64);
        for i in 0..j.saturating_sub(1) {
            acc *= lo.dtft(lambda * (1u64 << i) as f64);
        }
        acc
    }

    pub fn to_json(&self) -> BankDoc {
        let mut taps = BTreeMap::new();
        taps.insert("lowpass".to_string(), self.lowpass.clone());
        taps.insert("highpass".to_string(), self.highpass.clone());
        for (j, g) in self.per_level.iter().enumerate() {
            taps.insert(format!("g{}", j + 1), g.taps.clone());
        }
        BankDoc {
            family: self.family.name().to_string(),
            levels: self.levels,
            taps,
            alpha: Some(self.alpha),
        }
    }

    pub fn from_json(doc: &BankDoc) -> Result<Self> {
        let family = Family::parse(&doc.family)?;
        let bank = if family == Family::User {
            let lo = doc
                .taps
                .get("lowpass")
                .ok_or_else(|| Error::spec("/taps/lowpass", "user banks must supply lowpass taps"))?;
            let hi = match doc.taps.get("highpass") {
                Some(h) => h.clone(),
                None => mirror_highpass(lo),
            };
            Self::from_taps(lo.clone(), hi, doc.levels, doc.alpha)?
        } else {
            make_filter_bank(family.name(), doc.levels, 0)?
        };
        for (key, given) in &doc.taps {
            let Some(j) = key.strip_prefix('g').and_then(|s| s.parse::<usize>().ok()) else {
                continue;
            };
            let built = bank.level(j)?;
            let worst = built
                .taps
                .iter()
                .zip(given)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if given.len() != built.len() || worst > 1e-12 {
                return Err(Error::spec(
                    format!("/taps/{key}"),
                    "taps disagree with the cascade built from the base filters",
                ));
            }
        }
        Ok(bank)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc: BankDoc = serde_json::from_slice(&std::fs::read(path)?)?;
        Self::from_json(&doc)
    }
}

/// JSON form `{"family", "levels", "taps": {"g1": [...], ...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BankDoc {
    pub family: String,
    pub levels: usize,
    #[serde(default)]
    pub taps: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// Builds `g_1..g_{J_max}` for a named family and checks `M ≥ M_required`.
pub fn make_filter_bank(family: &str, j_max: usize, m_required: u32) -> Result<FilterBank> {
    let fam = Family::parse(family)?;
    let lo = fam
        .lowpass()
        .ok_or_else(|| Error::domain("the user family needs explicit taps"))?
        .to_vec();
    let hi = mirror_highpass(&lo);
    let bank = FilterBank::from_parts(fam, lo, hi, j_max, fam.known_alpha())?;
    if bank.vanishing_moments < m_required {
        return Err(Error::Admissibility(format!(
            "{} has M = {} vanishing moments, {} required",
            fam.name(),
            bank.vanishing_moments,
            m_required
        )));
    }
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_first_level() {
        let bank = make_filter_bank("haar", 1, 0).unwrap();
        let g = &bank.level(1).unwrap().taps;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(g.len(), 2);
        assert!((g[0].abs() - s).abs() < 1e-15 && (g[1].abs() - s).abs() < 1e-15);
        assert!((g[0] + g[1]).abs() < 1e-15);
    }

    #[test]
    fn haar_support_doubles() {
        let bank = make_filter_bank("haar", 3, 0).unwrap();
        for j in 1..=3 {
            assert_eq!(bank.level(j).unwrap().len(), 1 << j);
            assert_eq!(bank.support_len(j), 1 << j);
        }
    }

    #[test]
    fn vanishing_moments_per_family() {
        for (name, m) in [("haar", 1), ("db2", 2), ("db3", 3), ("db4", 4)] {
            let bank = make_filter_bank(name, 2, 0).unwrap();
            assert_eq!(bank.vanishing_moments(), m, "{name}");
            assert_eq!(bank.support(), 2 * m as usize - 1);
        }
    }

    #[test]
    fn moments_and_energy_hold_at_every_level() {
        for name in ["haar", "db2", "db3", "db4"] {
            let bank = make_filter_bank(name, 8, 0).unwrap();
            for j in 1..=8 {
                let g = bank.level(j).unwrap();
                assert!((g.energy() - 1.0).abs() < 1e-10, "{name} j={j}");
                for k in 0..bank.vanishing_moments() {
                    let rel = g.moment(k).abs() / g.abs_moment(k);
                    assert!(rel < 1e-8, "{name} j={j} k={k}: {rel}");
                }
            }
        }
    }

    #[test]
    fn insufficient_moments_are_rejected() {
        assert!(matches!(
            make_filter_bank("haar", 3, 2),
            Err(Error::Admissibility(_))
        ));
        assert!(make_filter_bank("db2", 3, 2).is_ok());
        assert!(make_filter_bank("sym8", 3, 0).is_err());
    }

    #[test]
    fn cascade_transfer_matches_tap_dtft() {
        let bank = make_filter_bank("db3", 6, 0).unwrap();
        for j in 1..=6 {
            for &lam in &[0.01, 0.3, 1.7, 3.0] {
                let a = bank.transfer(j, lam);
                let b = bank.level(j).unwrap().dtft(lam);
                assert!((a - b).norm() < 1e-12, "j={j} lam={lam}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let bank = make_filter_bank("db2", 4, 0).unwrap();
        let text = serde_json::to_string(&bank.to_json()).unwrap();
        let back = FilterBank::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.level(4).unwrap(), bank.level(4).unwrap());

        let mut doc = bank.to_json();
        doc.taps.get_mut("g2").unwrap()[0] += 1e-6;
        assert!(FilterBank::from_json(&doc).is_err());

        let user = BankDoc {
            family: "user".into(),
            levels: 3,
            taps: BTreeMap::from([("lowpass".to_string(), taps::DB2.to_vec())]),
            alpha: None,
        };
        let ub = FilterBank::from_json(&user).unwrap();
        assert_eq!(ub.vanishing_moments(), 2);
        assert_eq!(ub.level(3).unwrap(), bank.level(3).unwrap());
    }
}
