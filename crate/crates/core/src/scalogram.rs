//! Scalograms, wavelet spectra and centered fluctuations.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;
use crate::synth::{ProcessConfig, Synthesizer};
use crate::wavelet::{dwt_details, CoefficientTable, FilterBank};

/// Coefficient count at one scale. `available` is false when the trimming
/// formula leaves no coefficient, in which case `count` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoeffCount {
    pub count: usize,
    pub available: bool,
}

/// `n_j = floor(2^{−j}(N − T + 1) − T + 1)`.
pub fn n_coeffs(n: usize, t: usize, j: usize) -> CoeffCount {
    let raw = crate::wavelet::trim_count(n, t, j);
    if raw > 0 {
        CoeffCount {
            count: raw as usize,
            available: true,
        }
    } else {
        CoeffCount {
            count: 0,
            available: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleEnergy {
    pub j: usize,
    pub n_j: usize,
    pub sigma2_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalogramTable {
    pub n: usize,
    pub support: usize,
    pub scales: Vec<ScaleEnergy>,
}

impl ScalogramTable {
    pub fn get(&self, j: usize) -> Option<&ScaleEnergy> {
        self.scales.iter().find(|s| s.j == j)
    }

    pub fn sigma2_hat(&self, j: usize) -> Result<f64> {
        self.get(j).map(|s| s.sigma2_hat).ok_or(Error::ScaleUnavailable {
            scale: j,
            n: self.n,
            count: n_coeffs(self.n, self.support, j).count as i64,
        })
    }

    /// Builds a table from given energies, e.g. a synthetic power law.
    pub fn from_energies(n: usize, support: usize, energies: &[(usize, f64)]) -> Self {
        Self {
            n,
            support,
            scales: energies
                .iter()
                .map(|&(j, s)| ScaleEnergy {
                    j,
                    n_j: n_coeffs(n, support, j).count,
                    sigma2_hat: s,
                })
                .collect(),
        }
    }
}

/// `σ̂²_j = n_j^{−1} Σ_k W_{j,k}²` for every scale in the table.
pub fn scalogram(coeffs: &CoefficientTable) -> Result<ScalogramTable> {
    let scales = coeffs
        .scales
        .iter()
        .map(|s| {
            if s.values.is_empty() {
                return Err(Error::ScaleUnavailable {
                    scale: s.j,
                    n: coeffs.n,
                    count: 0,
                });
            }
            Ok(ScaleEnergy {
                j: s.j,
                n_j: s.values.len(),
                sigma2_hat: s.values.iter().map(|w| w * w).sum::<f64>() / s.values.len() as f64,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScalogramTable {
        n: coeffs.n,
        support: coeffs.support,
        scales,
    })
}

/// Transform then scalogram.
pub fn scalogram_of(path: &[f64], bank: &FilterBank, j_max: usize) -> Result<ScalogramTable> {
    scalogram(&dwt_details(path, bank, j_max)?)
}

/// Replicate scalograms of `Y` for replicates `0..replicates`, in order.
pub fn replicate_scalograms(
    config: &ProcessConfig,
    bank: &FilterBank,
    j_max: usize,
    replicates: usize,
) -> Result<Vec<ScalogramTable>> {
    let synth = Synthesizer::new(config.clone())?;
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| scalogram_of(&synth.path(r).samples, bank, j_max))
        .collect()
}

/// Monte Carlo estimate of the wavelet spectrum `σ²_j = E σ̂²_j`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEstimate {
    pub scales: Vec<usize>,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub replicates: usize,
}

impl SpectrumEstimate {
    pub fn at(&self, j: usize) -> Option<(f64, f64)> {
        let i = self.scales.iter().position(|&s| s == j)?;
        Some((self.mean[i], self.std_error[i]))
    }

    /// Least-squares slope of `log₂ σ²_j` on `j`.
    pub fn log2_slope(&self, scales: &[usize]) -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &j in scales {
            let (m, _) = self.at(j)?;
            xs.push(j as f64);
            ys.push(m.log2());
        }
        Some(stats::ols_slope(&xs, &ys))
    }
}

/// Per-scale replicate mean and standard error, reduced in replicate order.
pub fn spectrum_from_tables(tables: &[ScalogramTable], scales: &[usize]) -> Result<SpectrumEstimate> {
    if tables.len() < 2 {
        return Err(Error::domain("at least two replicates are needed"));
    }
    let mut mean = Vec::with_capacity(scales.len());
    let mut se = Vec::with_capacity(scales.len());
    for &j in scales {
        let col = tables
            .iter()
            .map(|t| t.sigma2_hat(j))
            .collect::<Result<Vec<_>>>()?;
        mean.push(stats::mean(&col));
        se.push(stats::std_error(&col));
    }
    Ok(SpectrumEstimate {
        scales: scales.to_vec(),
        mean,
        std_error: se,
        replicates: tables.len(),
    })
}

pub fn wavelet_spectrum_mc(
    config: &ProcessConfig,
    bank: &FilterBank,
    scales: &[usize],
    replicates: usize,
) -> Result<SpectrumEstimate> {
    if replicates < 2 {
        return Err(Error::domain("at least two replicates are needed"));
    }
    let j_max = scales.iter().copied().max().unwrap_or(0);
    let tables = replicate_scalograms(config, bank, j_max, replicates)?;
    spectrum_from_tables(&tables, scales)
}

/// `σ̂²_j/σ²_j − 1` per replicate (rows) and scale (columns). Without a
/// reference, the replicate mean is used.
pub fn centered_fluctuations(
    tables: &[ScalogramTable],
    scales: &[usize],
    reference: Option<&[f64]>,
) -> Result<Vec<Vec<f64>>> {
    let reference = match reference {
        Some(r) => {
            if r.len() != scales.len() {
                return Err(Error::domain("reference length differs from the scale list"));
            }
            r.to_vec()
        }
        None => spectrum_from_tables(tables, scales)?.mean,
    };
    if let Some(i) = reference.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::domain(format!(
            "degenerate reference σ² = {} at scale {}",
            reference[i], scales[i]
        )));
    }
    tables
        .iter()
        .map(|t| {
            scales
                .iter()
                .zip(&reference)
                .map(|(&j, s)| Ok(t.sigma2_hat(j)? / s - 1.0))
                .collect()
        })
        .collect()
}

/// Columns `replicate,j,n_j,sigma2_hat,sigma2_ref,fluctuation`.
pub fn write_fluctuation_csv(
    path: &Path,
    tables: &[ScalogramTable],
    scales: &[usize],
    reference: &[f64],
) -> Result<()> {
    let fl = centered_fluctuations(tables, scales, Some(reference))?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "replicate,j,n_j,sigma2_hat,sigma2_ref,fluctuation")?;
    for (r, (t, row)) in tables.iter().zip(&fl).enumerate() {
        for ((&j, s), f) in scales.iter().zip(reference).zip(row) {
            let e = t.get(j).expect("checked by centered_fluctuations");
            writeln!(w, "{r},{j},{},{:e},{:e},{:e}", e.n_j, e.sigma2_hat, s, f)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralModel;
    use crate::wavelet::{make_filter_bank, ScaleCoefficients};

    #[test]
    fn count_examples() {
        assert_eq!(n_coeffs(1024, 8, 3), CoeffCount { count: 120, available: true });
        assert_eq!(n_coeffs(16, 2, 0).count, 14);
        assert_eq!(n_coeffs(64, 8, 3), CoeffCount { count: 0, available: false });
    }

    #[test]
    fn counts_halve_across_scales() {
        for t in [1, 3, 5, 7] {
            let n = 1 << 20;
            for j in 6..=10 {
                for u in 1..=3 {
                    let r = n_coeffs(n, t, j - u).count as f64 / n_coeffs(n, t, j).count as f64;
                    assert!((r / 2f64.powi(u as i32) - 1.0).abs() <= 0.01, "t={t} j={j} u={u}");
                }
            }
        }
    }

    fn table_of(values: Vec<f64>) -> CoefficientTable {
        CoefficientTable {
            n: 100,
            support: 1,
            scales: vec![ScaleCoefficients { j: 1, first_k: 1, values }],
        }
    }

    #[test]
    fn energies_are_mean_squares() {
        assert_eq!(scalogram(&table_of(vec![0.0; 5])).unwrap().scales[0].sigma2_hat, 0.0);
        assert_eq!(scalogram(&table_of(vec![1.0, -1.0, 1.0, -1.0])).unwrap().scales[0].sigma2_hat, 1.0);
        assert!(scalogram(&table_of(vec![])).is_err());
    }

    #[test]
    fn identical_replicates_have_zero_error() {
        let t = ScalogramTable::from_energies(1000, 1, &[(1, 2.0), (2, 3.0)]);
        let est = spectrum_from_tables(&[t.clone(), t], &[1, 2]).unwrap();
        assert_eq!(est.std_error, vec![0.0, 0.0]);
        assert_eq!(est.mean, vec![2.0, 3.0]);
    }

    #[test]
    fn fluctuations_vanish_at_the_reference() {
        let t = ScalogramTable::from_energies(1000, 1, &[(1, 2.0), (2, 3.0)]);
        let f = centered_fluctuations(&[t.clone()], &[1, 2], Some(&[2.0, 3.0])).unwrap();
        assert_eq!(f, vec![vec![0.0, 0.0]]);
        assert!(centered_fluctuations(&[t], &[1], Some(&[0.0])).is_err());
    }

    #[test]
    fn constant_offset_leaves_scalogram_unchanged() {
        let model = SpectralModel::farima(0.4).unwrap();
        let cfg = ProcessConfig::new(model, 2, 1, 4096, 3);
        let y = Synthesizer::new(cfg).unwrap().path(0).samples;
        let bank = make_filter_bank("db2", 6, 0).unwrap();
        let a = scalogram_of(&y, &bank, 6).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + 17.0).collect();
        let b = scalogram_of(&shifted, &bank, 6).unwrap();
        for (x, z) in a.scales.iter().zip(&b.scales) {
            assert!((x.sigma2_hat - z.sigma2_hat).abs() <= 1e-9 * x.sigma2_hat, "j={}", x.j);
        }
    }

    #[test]
    fn halves_of_a_scale_agree() {
        let model = SpectralModel::farima(0.3).unwrap();
        let bank = make_filter_bank("haar", 4, 0).unwrap();
        let synth = Synthesizer::new(ProcessConfig::new(model, 1, 0, 1 << 14, 5)).unwrap();
        let (mut first, mut second) = (Vec::new(), Vec::new());
        for r in 0..40 {
            let c = dwt_details(&synth.path(r).samples, &bank, 4).unwrap();
            let v = &c.scale(2).unwrap().values;
            let h = v.len() / 2;
            first.push(v[..h].iter().map(|w| w * w).sum::<f64>() / h as f64);
            second.push(v[h..2 * h].iter().map(|w| w * w).sum::<f64>() / h as f64);
        }
        let diff = (stats::mean(&first) - stats::mean(&second)).abs();
        let se = (stats::variance(&first) / 40.0 + stats::variance(&second) / 40.0).sqrt();
        assert!(diff < 3.0 * se, "{diff} vs {se}");
    }
}
