//! Wavelet coefficients by pyramid and by direct convolution.
//!
//! Samples are indexed `Y_1..Y_N` and `W_{j,k} = Σ_t g_j(2^j k − t) Y_t`.
//! A coefficient is kept only if every tap lands inside `1..=N`; of those,
//! the first `n_j` (the trimming count) are retained.

use std::io::Write;
use std::path::Path;

use super::{Filter, FilterBank};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleCoefficients {
    pub j: usize,
    /// Location index of `values[0]`.
    pub first_k: i64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub n: usize,
    pub support: usize,
    pub scales: Vec<ScaleCoefficients>,
}

impl CoefficientTable {
    pub fn scale(&self, j: usize) -> Option<&ScaleCoefficients> {
        self.scales.iter().find(|s| s.j == j)
    }

    pub fn max_scale(&self) -> usize {
        self.scales.last().map_or(0, |s| s.j)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "j,k,value")?;
        for s in &self.scales {
            for (i, v) in s.values.iter().enumerate() {
                writeln!(w, "{},{},{:e}", s.j, s.first_k + i as i64, v)?;
            }
        }
        Ok(())
    }
}

/// `floor(2^{−j}(N−T+1) − T + 1)`, possibly non-positive.
pub(crate) fn trim_count(n: usize, t: usize, j: usize) -> i64 {
    let num = n as i64 - t as i64 + 1;
    num.div_euclid(1i64 << j) - t as i64 + 1
}

/// One filter-and-downsample stage over a valid index range.
fn stage(input: &[f64], first: i64, taps: &[f64], out_first: i64, out_len: usize) -> Vec<f64> {
    (0..out_len)
        .map(|i| {
            let k = out_first + i as i64;
            let base = (2 * k - first) as usize;
            taps.iter()
                .enumerate()
                .map(|(m, h)| h * input[base - m])
                .sum()
        })
        .collect()
}

/// Detail coefficients for scales `1..=j_max` via the O(N) pyramid.
pub fn dwt_details(path: &[f64], bank: &FilterBank, j_max: usize) -> Result<CoefficientTable> {
    if j_max == 0 {
        return Err(Error::domain("j_max must be at least 1"));
    }
    let n = path.len();
    let t = bank.support();
    let last = trim_count(n, t, j_max);
    if last < 1 {
        return Err(Error::ScaleUnavailable {
            scale: j_max,
            n,
            count: last,
        });
    }
    let lo = bank.lowpass();
    let hi = bank.highpass();
    let l = lo.len() as i64;

    // approximation a_{j} is valid on [first, first + len)
    let mut approx = path.to_vec();
    let mut first: i64 = 1;
    let mut scales = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let kmax = first + approx.len() as i64 - 1;
        let out_first = (first + l - 1 + 1).div_euclid(2);
        let out_last = kmax.div_euclid(2);
        let len = (out_last - out_first + 1).max(0) as usize;
        let n_j = trim_count(n, t, j) as usize;
        debug_assert!(len >= n_j);
        let details = stage(&approx, first, hi, out_first, n_j.min(len));
        scales.push(ScaleCoefficients {
            j,
            first_k: out_first,
            values: details,
        });
        if j < j_max {
            approx = stage(&approx, first, lo, out_first, len);
            first = out_first;
        }
    }
    Ok(CoefficientTable {
        n,
        support: t,
        scales,
    })
}

/// All boundary-free `W_k = Σ_t h(γk − t) Y_t` by naive convolution.
/// Returns the first location index and the values.
pub fn direct_wavelet_coeffs(path: &[f64], filter: &Filter, gamma: usize) -> Result<(i64, Vec<f64>)> {
    if gamma == 0 || filter.is_empty() {
        return Err(Error::domain("need gamma >= 1 and a non-empty filter"));
    }
    let g = gamma as i64;
    let n = path.len() as i64;
    let off = filter.offset;
    let len = filter.len() as i64;
    let kmin = (off + len + g - 1).div_euclid(g);
    let kmax = (n + off).div_euclid(g);
    if kmax < kmin {
        return Err(Error::ScaleUnavailable {
            scale: gamma,
            n: path.len(),
            count: kmax - kmin + 1,
        });
    }
    let values = (kmin..=kmax)
        .map(|k| {
            filter
                .taps
                .iter()
                .enumerate()
                .map(|(i, h)| h * path[(g * k - off - i as i64 - 1) as usize])
                .sum()
        })
        .collect();
    Ok((kmin, values))
}

/// Multiscale filters `h_{ℓ,j}(t) = g_{j−u}(t + 2^{j−u} v)` for
/// `ℓ = 2^u + v`, `u < p`, `v < 2^u`, returned in `ℓ` order.
///
/// Filtering with `h_{ℓ,j}` at step `2^j` gives `W_{j−u, 2^u k + v}`.
/// Requires `j ≥ p` so that every `g_{j−u}` is a detail filter.
pub fn multiscale_to_multivariate(bank: &FilterBank, j: usize, p: usize) -> Result<Vec<Filter>> {
    if p == 0 {
        return Err(Error::domain("p must be at least 1"));
    }
    if j < p {
        return Err(Error::domain(format!(
            "multiscale filters need j >= p (got j={j}, p={p})"
        )));
    }
    let mut out = Vec::with_capacity((1 << p) - 1);
    for u in 0..p {
        let g = bank.level(j - u)?;
        for v in 0..(1i64 << u) {
            out.push(Filter {
                offset: g.offset - (1i64 << (j - u)) * v,
                taps: g.taps.clone(),
            });
        }
    }
    Ok(out)
}
