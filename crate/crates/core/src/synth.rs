//! Exact-covariance synthesis of the Gaussian input `X`, the pointwise
//! Hermite transform, and `K`-fold summation giving `Δ^K Y = H_{q0}(X)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngKey, Stream};
use crate::spectral::{is_long_memory, SpectralModel};

/// Relative threshold under which negative embedding eigenvalues are
/// treated as rounding noise and clipped to zero.
pub const EMBEDDING_CLIP: f64 = 1e-8;

const BINARY_MAGIC: &[u8; 4] = b"HSC1";

/// A stationary Gaussian sample `X_1..X_N`.
#[derive(Debug, Clone)]
pub struct GaussianPath {
    pub samples: Vec<f64>,
    pub model: Arc<SpectralModel>,
    pub seed: u64,
    pub replicate: u64,
}

impl GaussianPath {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Samples of `Y` with `Δ^K Y = H_{q0}(X)`.
#[derive(Debug, Clone)]
pub struct HermitePath {
    pub samples: Vec<f64>,
    pub q0: u32,
    pub k: u32,
    pub seed: u64,
    pub replicate: u64,
}

/// Circulant-embedding sampler for one `(model, N)` pair.
///
/// The Toeplitz covariance of `X_1..X_N` is embedded in a circulant of size
/// `2(N−1)` rounded up to a power of two. The square-rooted eigenvalues are
/// computed once and shared by every replicate.
pub struct CirculantSampler {
    model: Arc<SpectralModel>,
    n: usize,
    sqrt_eigen: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    min_eigenvalue: f64,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("n", &self.n)
            .field("embedding", &self.sqrt_eigen.len())
            .field("min_eigenvalue", &self.min_eigenvalue)
            .finish()
    }
}

impl CirculantSampler {
    pub fn new(model: Arc<SpectralModel>, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("path length {n} must be at least 2")));
        }
        let size = (2 * (n - 1)).next_power_of_two();
        let gamma = model.autocovariance(size / 2)?;
        let mut buf: Vec<Complex64> = (0..size)
            .map(|i| Complex64::new(gamma[i.min(size - i)], 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(size).process(&mut buf);
        let max = buf.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let min = buf.iter().map(|c| c.re).fold(f64::MAX, f64::min);
        if min < -EMBEDDING_CLIP * max {
            return Err(Error::Embedding {
                min_eigenvalue: min,
                max_eigenvalue: max,
            });
        }
        let sqrt_eigen = buf
            .iter()
            .map(|c| (c.re.max(0.0) / size as f64).sqrt())
            .collect();
        Ok(Self {
            model,
            n,
            sqrt_eigen,
            fft: planner.plan_fft_forward(size),
            min_eigenvalue: min,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn model(&self) -> &Arc<SpectralModel> {
        &self.model
    }

    /// Smallest eigenvalue of the embedding before clipping.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> GaussianPath {
        GaussianPath {
            samples: self.sample_keyed(RngKey::new(seed, replicate, Stream::GaussianPath)),
            model: Arc::clone(&self.model),
            seed,
            replicate,
        }
    }

    /// Raw samples drawn from an arbitrary keyed stream.
    pub fn sample_keyed(&self, key: RngKey) -> Vec<f64> {
        let mut rng = key.rng();
        let mut buf: Vec<Complex64> = self
            .sqrt_eigen
            .iter()
            .map(|&s| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf[..self.n].iter().map(|c| c.re).collect()
    }
}

/// One-shot synthesis of `X` (replicate 0).
pub fn sample_gaussian(model: &SpectralModel, n: usize, seed: u64) -> Result<GaussianPath> {
    Ok(CirculantSampler::new(Arc::new(model.clone()), n)?.sample(seed, 0))
}

/// Probabilists' Hermite polynomial `H_q(x)`.
pub fn hermite_eval(q: u32, x: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for i in 1..q {
                let next = x * cur - i as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

pub fn hermite_transform(samples: &[f64], q0: u32) -> Vec<f64> {
    samples.iter().map(|&x| hermite_eval(q0, x)).collect()
}

/// `K`-fold cumulative sum with zero initial conditions.
pub fn integrate_k(samples: &[f64], k: u32) -> Vec<f64> {
    let mut out = samples.to_vec();
    for _ in 0..k {
        let mut acc = 0.0;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    out
}

/// `K`-th backward difference; entry `t` is defined for `t ≥ K` and the
/// returned vector starts at index `K`.
pub fn difference_k(samples: &[f64], k: u32) -> Vec<f64> {
    let mut out = samples.to_vec();
    for _ in 0..k {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    out
}

/// Everything needed to reproduce one path of `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessConfig {
    pub model: SpectralModel,
    pub q0: u32,
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    /// Permit `q0 ≥ 1/(1−2d)` for short-memory contrast runs.
    #[serde(default)]
    pub allow_short_memory: bool,
}

impl ProcessConfig {
    pub fn new(model: SpectralModel, q0: u32, k: u32, n: usize, seed: u64) -> Self {
        Self {
            model,
            q0,
            k,
            n,
            seed,
            allow_short_memory: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q0 == 0 {
            return Err(Error::domain("q0 must be at least 1"));
        }
        if !self.allow_short_memory && !is_long_memory(self.q0, self.model.d())? {
            return Err(Error::Admissibility(format!(
                "q0 = {} with d = {} is not long memory (needs q0 < 1/(1-2d) = {:.4})",
                self.q0,
                self.model.d(),
                1.0 / (1.0 - 2.0 * self.model.d())
            )));
        }
        Ok(())
    }
}

/// Reusable synthesizer producing replicate paths of `Y` for one config.
#[derive(Debug)]
pub struct Synthesizer {
    config: ProcessConfig,
    sampler: CirculantSampler,
}

impl Synthesizer {
    pub fn new(config: ProcessConfig) -> Result<Self> {
        config.validate()?;
        let sampler = CirculantSampler::new(Arc::new(config.model.clone()), config.n)?;
        Ok(Self { config, sampler })
    }

    pub fn config(&self) -> &ProcessConfig {
        &self.config
    }

    pub fn sampler(&self) -> &CirculantSampler {
        &self.sampler
    }

    pub fn gaussian(&self, replicate: u64) -> GaussianPath {
        self.sampler.sample(self.config.seed, replicate)
    }

    pub fn path(&self, replicate: u64) -> HermitePath {
        let x = self.gaussian(replicate);
        self.lift(&x)
    }

    /// `Y = Δ^{−K} H_{q0}(X)` for a given Gaussian path.
    pub fn lift(&self, x: &GaussianPath) -> HermitePath {
        let h = hermite_transform(&x.samples, self.config.q0);
        HermitePath {
            samples: integrate_k(&h, self.config.k),
            q0: self.config.q0,
            k: self.config.k,
            seed: x.seed,
            replicate: x.replicate,
        }
    }
}

pub fn synthesize_y(config: &ProcessConfig) -> Result<HermitePath> {
    Ok(Synthesizer::new(config.clone())?.path(0))
}

pub fn write_csv(path: &Path, samples: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["value"])?;
    for v in samples {
        w.write_record([format!("{v:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `HSC1`, the sample count as a little-endian `u64`, then the
/// samples as little-endian `f64`.
pub fn write_binary(path: &Path, samples: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    for v in samples {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<Vec<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::domain("not an HSC1 block"));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut out = Vec::with_capacity(len);
    let mut word = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut word)?;
        out.push(f64::from_le_bytes(word));
    }
    Ok(out)
}
