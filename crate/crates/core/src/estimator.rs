//! Wavelet log-regression estimator of `d0 = δ(q0) + K`.
//!
//! `d̂0 = Σ_i w_i ln σ̂²_{j0+i}` with `Σ w_i = 0` and `Σ i w_i = 1/(2 ln 2)`.
//! Since `σ²_j ≈ c 2^{2j d0}`, `ln σ²_{j0+i} = ln c + 2 ln 2 · d0 (j0 + i)`,
//! so the constraints cancel `c` and return `d0` exactly on a pure power law.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalogram::{n_coeffs, scalogram_of, ScalogramTable, SpectrumEstimate};
use crate::spectral::{MemoryExponents, SpectralModel};
use crate::stats;
use crate::synth::{ProcessConfig, Synthesizer};
use crate::wavelet::FilterBank;

/// Scales with fewer coefficients than this are rejected.
pub const DEFAULT_N_MIN: usize = 32;

/// `1/(2 ln 2)`.
pub fn slope_constant() -> f64 {
    0.5 / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightMode {
    /// `(−1, +1)/(2 ln 2)`; requires `p = 2`.
    MinimalTwoPoint,
    /// Minimal `Σ w_i²` under the two constraints.
    LeastSquares,
    /// Minimal `Σ w_i²` with the extra constraint `Σ w_i 2^{(1−2d)i} = 0`,
    /// which cancels the leading term of the non-Gaussian limit.
    Nulling { d: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorWeights {
    pub p: usize,
    pub w: Vec<f64>,
    pub mode: WeightMode,
}

impl EstimatorWeights {
    /// `Σ_i w_i 2^{(1−2d)i}`, the factor multiplying the Rosenblatt limit of `d̂0`.
    pub fn limit_multiplier(&self, d: f64) -> f64 {
        self.w
            .iter()
            .enumerate()
            .map(|(i, w)| w * 2f64.powf((1.0 - 2.0 * d) * i as f64))
            .sum()
    }

    /// Returns `(Σ w, Σ i w − 1/(2 ln 2))`.
    pub fn constraint_residuals(&self) -> (f64, f64) {
        let s: f64 = self.w.iter().sum();
        let m: f64 = self.w.iter().enumerate().map(|(i, w)| i as f64 * w).sum();
        (s, m - slope_constant())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimum-norm solution of `A w = b` for a few constraint rows. The rows
/// are orthonormalized (`A = L Q`, Gram–Schmidt applied twice), `L y = b` is
/// solved by forward substitution and `w = Qᵀ y`, followed by one step of
/// iterative refinement.
fn min_norm(rows: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let k = rows.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut l = vec![vec![0.0; k]; k];
    for (i, row) in rows.iter().enumerate() {
        let mut v = row.clone();
        for _ in 0..2 {
            for (m, qm) in q.iter().enumerate() {
                let c = dot(&v, qm);
                l[i][m] += c;
                v.iter_mut().zip(qm).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= 1e-13 * dot(row, row).sqrt() {
            return Err(Error::numerical("weight constraints are linearly dependent"));
        }
        l[i][i] = norm;
        q.push(v.into_iter().map(|x| x / norm).collect());
    }
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; k];
        for i in 0..k {
            y[i] = (rhs[i] - (0..i).map(|m| l[i][m] * y[m]).sum::<f64>()) / l[i][i];
        }
        (0..rows[0].len()).map(|t| (0..k).map(|i| y[i] * q[i][t]).sum()).collect()
    };
    let mut w = solve(b);
    let resid: Vec<f64> = rows.iter().zip(b).map(|(r, bi)| bi - dot(r, &w)).collect();
    w.iter_mut().zip(solve(&resid)).for_each(|(x, dx)| *x += dx);
    Ok(w)
}

pub fn regression_weights(p: usize, mode: WeightMode) -> Result<EstimatorWeights> {
    if p < 2 {
        return Err(Error::domain("the estimator needs at least two scales"));
    }
    let c = slope_constant();
    let w = match mode {
        WeightMode::MinimalTwoPoint => {
            if p != 2 {
                return Err(Error::domain("minimal_two_point weights are defined for p = 2"));
            }
            vec![-c, c]
        }
        WeightMode::LeastSquares => {
            let mean = (p as f64 - 1.0) / 2.0;
            let ss: f64 = (0..p).map(|i| (i as f64 - mean).powi(2)).sum();
            (0..p).map(|i| c * (i as f64 - mean) / ss).collect()
        }
        WeightMode::Nulling { d } => {
            if p < 3 {
                return Err(Error::domain("nulling weights need p ≥ 3"));
            }
            if !(d > 0.0 && d < 0.5) {
                return Err(Error::domain(format!("nulling needs d in (0, 1/2), got {d}")));
            }
            let rows = vec![
                vec![1.0; p],
                (0..p).map(|i| i as f64).collect(),
                (0..p).map(|i| 2f64.powf((1.0 - 2.0 * d) * i as f64)).collect(),
            ];
            min_norm(&rows, &[0.0, c, 0.0])?
        }
    };
    Ok(EstimatorWeights { p, w, mode })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleDiagnostic {
    pub j: usize,
    pub n_j: usize,
    pub sigma2_hat: f64,
    pub log_sigma2: f64,
    /// Deviation of `ln σ̂²_j` from the power law with slope `d̂0`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub d0_hat: f64,
    pub j0: usize,
    pub p: usize,
    pub weights: EstimatorWeights,
    pub scales: Vec<ScaleDiagnostic>,
}

/// Largest `j` with `n_j ≥ 128`, minus `p − 1`.
pub fn default_j0(n: usize, support: usize, p: usize) -> Option<usize> {
    let top = (0..64).take_while(|&j| n_coeffs(n, support, j).count >= 128).last()?;
    top.checked_sub(p - 1)
}

pub fn estimate_d0(table: &ScalogramTable, j0: usize, weights: &EstimatorWeights) -> Result<EstimateReport> {
    estimate_d0_with(table, j0, weights, DEFAULT_N_MIN)
}

pub fn estimate_d0_with(
    table: &ScalogramTable,
    j0: usize,
    weights: &EstimatorWeights,
    n_min: usize,
) -> Result<EstimateReport> {
    let mut used = Vec::with_capacity(weights.p);
    for j in j0..j0 + weights.p {
        let e = table.get(j).ok_or(Error::ScaleUnavailable {
            scale: j,
            n: table.n,
            count: n_coeffs(table.n, table.support, j).count as i64,
        })?;
        if e.n_j < n_min {
            return Err(Error::ScaleUnavailable {
                scale: j,
                n: table.n,
                count: e.n_j as i64,
            });
        }
        if !(e.sigma2_hat > 0.0) {
            return Err(Error::numerical(format!(
                "non-positive scalogram value {} at scale {j}",
                e.sigma2_hat
            )));
        }
        used.push(e.clone());
    }
    let logs: Vec<f64> = used.iter().map(|e| e.sigma2_hat.ln()).collect();
    let d0_hat: f64 = weights.w.iter().zip(&logs).map(|(w, l)| w * l).sum();
    if !d0_hat.is_finite() {
        return Err(Error::numerical("estimate is not finite"));
    }
    let slope = 2.0 * std::f64::consts::LN_2 * d0_hat;
    let intercept = stats::mean(
        &used
            .iter()
            .zip(&logs)
            .map(|(e, l)| l - slope * e.j as f64)
            .collect::<Vec<_>>(),
    );
    let scales = used
        .iter()
        .zip(&logs)
        .map(|(e, &l)| ScaleDiagnostic {
            j: e.j,
            n_j: e.n_j,
            sigma2_hat: e.sigma2_hat,
            log_sigma2: l,
            residual: l - intercept - slope * e.j as f64,
        })
        .collect();
    Ok(EstimateReport {
        d0_hat,
        j0,
        p: weights.p,
        weights: weights.clone(),
        scales,
    })
}

/// `j(N) = floor(log₂ N / 2)`.
pub fn default_scale_rule(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize / 2
}

/// `|Σ w_i ln σ²_{j+i} − d0|` for each admissible first scale `j`, with
/// the fitted decay rate `β̂` of `log₂` of that bias against `j`. No
/// particular rate is asserted: `β̂` is a report, not a check.
#[derive(Debug, Clone, Serialize)]
pub struct BiasDecay {
    pub points: Vec<(usize, f64)>,
    /// `None` when fewer than two biases are non-zero.
    pub decay_rate: Option<f64>,
}

pub fn bias_decay(spectrum: &SpectrumEstimate, weights: &EstimatorWeights, d0: f64) -> Result<BiasDecay> {
    let p = weights.p;
    let mut points = Vec::new();
    for &j in &spectrum.scales {
        let window: Option<Vec<f64>> = (0..p).map(|i| spectrum.at(j + i).map(|(m, _)| m)).collect();
        let Some(window) = window else { continue };
        if let Some(bad) = window.iter().find(|m| !(**m > 0.0)) {
            return Err(Error::numerical(format!("non-positive wavelet spectrum {bad} near scale {j}")));
        }
        let est: f64 = weights.w.iter().zip(&window).map(|(w, m)| w * m.ln()).sum();
        points.push((j, (est - d0).abs()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(_, b)| *b > 0.0)
        .map(|&(j, b)| (j as f64, b.log2()))
        .unzip();
    let decay_rate = (xs.len() >= 2).then(|| -stats::ols_slope(&xs, &ys));
    Ok(BiasDecay { points, decay_rate })
}

#[derive(Debug, Clone)]
pub struct RateConfig {
    pub model: SpectralModel,
    pub q0: u32,
    pub k: u32,
    pub sizes: Vec<usize>,
    pub weights: EstimatorWeights,
    pub replicates: usize,
    pub seed: u64,
    /// First scale used at each size; defaults to [`default_scale_rule`].
    pub scale_rule: Option<fn(usize) -> usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_j: usize,
    pub j: usize,
    pub mean_d0_hat: f64,
    pub sd_d0_hat: f64,
    /// SD of `σ̂²_j / mean(σ̂²_j) − 1` at the first scale.
    pub sd_fluctuation: f64,
}

/// Replicates at one sample size: `d̂0` and `σ̂²` at the first scale `j`.
#[derive(Debug, Clone)]
pub struct SizeSample {
    pub n: usize,
    pub n_j: usize,
    pub j: usize,
    pub d0_hat: Vec<f64>,
    pub sigma2_hat: Vec<f64>,
}

impl SizeSample {
    pub fn from_reports(n: usize, reports: &[EstimateReport]) -> Self {
        let first = &reports[0].scales[0];
        Self {
            n,
            n_j: first.n_j,
            j: first.j,
            d0_hat: reports.iter().map(|r| r.d0_hat).collect(),
            sigma2_hat: reports.iter().map(|r| r.scales[0].sigma2_hat).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub q0: u32,
    pub d: f64,
    pub d0: f64,
    pub rows: Vec<RateRow>,
    /// Slope of `ln SD(d̂0)` against `ln n_j`.
    pub exponent: f64,
    /// Slope of `ln SD(σ̂²_j/σ²_j − 1)` against `ln n_j`, the scalogram rate.
    pub scalogram_exponent: f64,
    /// `2d − 1` for `q0 ≥ 2`, `−1/2` for `q0 = 1`.
    pub expected_exponent: f64,
    pub limit_multiplier: f64,
    /// `d̂0` replicates at the largest size.
    pub largest_size_estimates: Vec<f64>,
    pub skewness: f64,
    pub skewness_std_error: f64,
}

impl RateReport {
    /// Columns `N,n_j,j,mean_d0_hat,sd_d0_hat,sd_fluctuation`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "N,n_j,j,mean_d0_hat,sd_d0_hat,sd_fluctuation")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:e},{:e},{:e}",
                r.n, r.n_j, r.j, r.mean_d0_hat, r.sd_d0_hat, r.sd_fluctuation
            )?;
        }
        Ok(())
    }
}

/// Fluctuation exponents of `d̂0` and of the scalogram from per-size samples.
pub fn rate_from_estimates(
    q0: u32,
    d: f64,
    k: u32,
    weights: &EstimatorWeights,
    per_size: Vec<SizeSample>,
) -> Result<RateReport> {
    if per_size.len() < 4 {
        return Err(Error::domain("the rate experiment needs at least four sizes"));
    }
    let rows: Vec<RateRow> = per_size
        .iter()
        .map(|s| {
            let m = stats::mean(&s.sigma2_hat);
            RateRow {
                n: s.n,
                n_j: s.n_j,
                j: s.j,
                mean_d0_hat: stats::mean(&s.d0_hat),
                sd_d0_hat: stats::std_dev(&s.d0_hat),
                sd_fluctuation: stats::std_dev(&s.sigma2_hat) / m,
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| (r.n_j as f64).ln()).collect();
    let fit = |f: fn(&RateRow) -> f64| {
        let ys: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
        stats::ols_slope(&xs, &ys)
    };
    let ex = MemoryExponents::new(q0, d, k)?;
    let last = per_size.into_iter().last().unwrap().d0_hat;
    Ok(RateReport {
        q0,
        d,
        d0: ex.d0,
        exponent: fit(|r| r.sd_d0_hat),
        scalogram_exponent: fit(|r| r.sd_fluctuation),
        expected_exponent: if q0 >= 2 { 2.0 * d - 1.0 } else { -0.5 },
        limit_multiplier: weights.limit_multiplier(d),
        skewness: stats::skewness(&last),
        skewness_std_error: stats::skewness_std_error(last.len()),
        largest_size_estimates: last,
        rows,
    })
}

/// Runs the estimator across `sizes` with `j0 = j(N)` and the given weights.
pub fn rate_experiment(cfg: &RateConfig, bank: &FilterBank) -> Result<RateReport> {
    if cfg.sizes.len() < 4 {
        return Err(Error::domain("the rate experiment needs at least four sizes"));
    }
    if cfg.replicates < 2 {
        return Err(Error::domain("at least two replicates are needed"));
    }
    let rule = cfg.scale_rule.unwrap_or(default_scale_rule);
    let mut per_size = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let j0 = rule(n);
        let j_max = j0 + cfg.weights.p - 1;
        let synth = Synthesizer::new(ProcessConfig::new(cfg.model.clone(), cfg.q0, cfg.k, n, cfg.seed))?;
        let reports = (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let t = scalogram_of(&synth.path(r).samples, bank, j_max)?;
                estimate_d0(&t, j0, &cfg.weights)
            })
            .collect::<Result<Vec<_>>>()?;
        per_size.push(SizeSample::from_reports(n, &reports));
    }
    rate_from_estimates(cfg.q0, cfg.model.d(), cfg.k, &cfg.weights, per_size)
}
