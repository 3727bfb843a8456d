//! Spec-driven experiments with deterministic seeding and CSV/JSON output.
//!
//! A spec names one experiment kind and a grid of `(d, q0, K)` points. Every
//! grid point is validated (long memory, bank admissibility, scale
//! availability) before any sampling. Replicate statistics are gathered and
//! reduced in replicate order, so data files do not depend on the worker
//! count. Only the manifest carries run-specific fields (wall clock, workers).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{
    default_scale_rule, estimate_d0, rate_from_estimates, regression_weights, EstimatorWeights, SizeSample,
    WeightMode, DEFAULT_N_MIN,
};
use crate::oracles::{rosenblatt_oracle_sample, LimitConstants, RosenblattMethod};
use crate::scalogram::{centered_fluctuations, n_coeffs, scalogram_of, spectrum_from_tables, ScalogramTable};
use crate::spectral::{delta, is_long_memory, ShortRange, SpectralModel};
use crate::stats;
use crate::synth::{ProcessConfig, Synthesizer};
use crate::wavelet::{check_admissibility, make_filter_bank, FilterBank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SpectrumScaling,
    Rate,
    CrossScale,
    LimitDistribution,
    Constants,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::SpectrumScaling,
        ExperimentKind::Rate,
        ExperimentKind::CrossScale,
        ExperimentKind::LimitDistribution,
        ExperimentKind::Constants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SpectrumScaling => "spectrum_scaling",
            ExperimentKind::Rate => "rate",
            ExperimentKind::CrossScale => "cross_scale",
            ExperimentKind::LimitDistribution => "limit_distribution",
            ExperimentKind::Constants => "constants",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentInfo {
    pub kind: &'static str,
    pub description: &'static str,
    /// The result the experiment checks.
    pub anchor: &'static str,
    pub outputs: &'static [&'static str],
}

pub fn list_experiments() -> Vec<ExperimentInfo> {
    ExperimentKind::ALL
        .iter()
        .map(|k| match k {
            ExperimentKind::SpectrumScaling => ExperimentInfo {
                kind: k.name(),
                description: "Monte Carlo wavelet spectrum and its fitted log2 slope over the listed scales",
                anchor: "wavelet spectrum power law: sigma2_j ~ 2^{2 j (delta(q0) + K)}",
                outputs: &["spectrum.csv", "slopes.csv"],
            },
            ExperimentKind::Rate => ExperimentInfo {
                kind: k.name(),
                description: "SD of the d0 estimator and of the scalogram fluctuation across sample sizes with j = floor(log2 N / 2)",
                anchor: "fluctuation rate dichotomy: n_j^{-1/2} for q0 = 1, n_j^{2d-1} for q0 >= 2",
                outputs: &["rate.csv", "rate_summary.csv"],
            },
            ExperimentKind::CrossScale => ExperimentInfo {
                kind: k.name(),
                description: "correlation of scalogram fluctuations at scales j and j-1",
                anchor: "multiscale limit: fluctuations are perfectly correlated across scales for q0 >= 2",
                outputs: &["fluctuations.csv", "cross_scale.csv"],
            },
            ExperimentKind::LimitDistribution => ExperimentInfo {
                kind: k.name(),
                description: "shape of studentized scalogram fluctuations against the Rosenblatt oracle",
                anchor: "limit law: Gaussian for q0 = 1, Rosenblatt Z_d(1) for q0 >= 2",
                outputs: &["fluctuations.csv", "limit.csv"],
            },
            ExperimentKind::Constants => ExperimentInfo {
                kind: k.name(),
                description: "limit constants L_p, Gamma11 and the scale profile for each grid point",
                anchor: "dimension reduction of L_p(g) and the Gaussian limit variance",
                outputs: &["constants.json", "constants.csv"],
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub d: f64,
    pub q0: u32,
    #[serde(rename = "K", default)]
    pub k: u32,
}

/// A family name (`"db2"`) or `{"file": "bank.json"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BankSpec {
    Family(String),
    File { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute tolerance on the fitted log2 spectrum slope.
    #[serde(default = "tol_015")]
    pub slope: f64,
    /// Absolute tolerance on the fluctuation-rate exponent.
    #[serde(default = "tol_015")]
    pub exponent: f64,
    /// Minimum KS p-value against the oracle.
    #[serde(default = "tol_ks")]
    pub ks_p_min: f64,
    /// Skewness significance threshold, in standard errors.
    #[serde(default = "tol_skew")]
    pub skewness_se: f64,
    /// Cross-scale correlation must exceed this for q0 ≥ 2.
    #[serde(default = "tol_corr_hi")]
    pub correlation_min: f64,
    /// and stay below this for q0 = 1.
    #[serde(default = "tol_corr_lo")]
    pub correlation_max: f64,
}

fn tol_015() -> f64 {
    0.15
}
fn tol_ks() -> f64 {
    0.01
}
fn tol_skew() -> f64 {
    3.0
}
fn tol_corr_hi() -> f64 {
    0.9
}
fn tol_corr_lo() -> f64 {
    0.8
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            slope: tol_015(),
            exponent: tol_015(),
            ks_p_min: tol_ks(),
            skewness_se: tol_skew(),
            correlation_min: tol_corr_hi(),
            correlation_max: tol_corr_lo(),
        }
    }
}

fn default_fstar() -> ShortRange {
    ShortRange::Constant { value: 1.0 }
}
fn default_bank() -> BankSpec {
    BankSpec::Family("haar".into())
}
fn default_scales() -> Vec<usize> {
    (4..=8).collect()
}
fn default_weights() -> WeightMode {
    WeightMode::LeastSquares
}
fn default_p() -> usize {
    2
}
fn default_scale() -> usize {
    7
}
fn default_oracle_samples() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub grid: Vec<GridPoint>,
    #[serde(rename = "N")]
    pub sizes: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Short-range factor; the model is always normalized to unit variance.
    #[serde(default = "default_fstar")]
    pub fstar: ShortRange,
    #[serde(default = "default_bank")]
    pub bank: BankSpec,
    /// Scales for spectrum fits.
    #[serde(default = "default_scales")]
    pub scales: Vec<usize>,
    /// Scale for fluctuation experiments (paired with `scale − 1`).
    #[serde(default = "default_scale")]
    pub scale: usize,
    /// Estimator weights and number of scales.
    #[serde(default = "default_weights")]
    pub weights: WeightMode,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

const REQUIRED: [&str; 5] = ["name", "kind", "grid", "N", "replicates"];

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s.push_str(&format!("/{index}")),
            Segment::Map { key } => s.push_str(&format!("/{key}")),
            Segment::Enum { variant } => s.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    if s.is_empty() {
        "/".into()
    } else {
        s
    }
}

impl ExperimentSpec {
    /// Parses and validates, reporting problems with JSON-pointer paths.
    /// Relative bank files resolve against `base_dir`.
    pub fn from_json(value: &Value, base_dir: Option<&Path>) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::spec("/", "spec must be a JSON object"))?;
        for key in REQUIRED {
            if !obj.contains_key(key) {
                return Err(Error::spec(format!("/{key}"), "required field is missing"));
            }
        }
        let mut spec: ExperimentSpec = serde_path_to_error::deserialize(value.clone())
            .map_err(|e| Error::spec(pointer_of(e.path()), e.inner().to_string()))?;
        if let (BankSpec::File { file }, Some(base)) = (&mut spec.bank, base_dir) {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::spec("/", format!("not valid JSON: {e}")))?;
        Self::from_json(&value, path.parent())
    }

    /// The spec with defaults filled in.
    pub fn normalized(&self) -> Value {
        serde_json::to_value(self).expect("spec serializes")
    }

    /// SHA-256 of the normalized spec without the output directory.
    pub fn config_hash(&self) -> String {
        let mut s = self.clone();
        s.out = None;
        let bytes = serde_json::to_vec(&s.normalized()).expect("spec serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn weights(&self) -> Result<EstimatorWeights> {
        regression_weights(self.p, self.weights).map_err(|e| Error::spec("/weights", e.to_string()))
    }

    /// Largest scale any part of the experiment touches.
    fn max_scale(&self) -> usize {
        let rate = self
            .sizes
            .iter()
            .map(|&n| default_scale_rule(n) + self.p - 1)
            .max()
            .unwrap_or(0);
        match self.kind {
            ExperimentKind::SpectrumScaling => self.scales.iter().copied().max().unwrap_or(1),
            ExperimentKind::Rate => rate,
            ExperimentKind::CrossScale | ExperimentKind::LimitDistribution => self.scale,
            ExperimentKind::Constants => 8,
        }
    }

    pub fn bank(&self) -> Result<FilterBank> {
        let levels = self.max_scale().max(8);
        match &self.bank {
            BankSpec::Family(name) => {
                make_filter_bank(name, levels, 0).map_err(|e| Error::spec("/bank", e.to_string()))
            }
            BankSpec::File { file } => {
                let bank = FilterBank::load(file).map_err(|e| Error::spec("/bank/file", e.to_string()))?;
                if bank.levels() < self.max_scale() {
                    return Err(Error::spec(
                        "/bank/file",
                        format!("bank has {} levels, {} needed", bank.levels(), self.max_scale()),
                    ));
                }
                Ok(bank)
            }
        }
    }

    fn model(&self, g: &GridPoint) -> Result<SpectralModel> {
        SpectralModel::new(g.d, self.fstar.clone(), true)
    }

    /// Semantic checks. Runs the admissibility check for every grid point,
    /// so nothing is sampled for an inadmissible configuration.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::spec("/name", "name must be non-empty and contain no path separators"));
        }
        if self.grid.is_empty() {
            return Err(Error::spec("/grid", "at least one grid point is required"));
        }
        if self.sizes.is_empty() {
            return Err(Error::spec("/N", "at least one sample size is required"));
        }
        let min_reps = match self.kind {
            ExperimentKind::CrossScale | ExperimentKind::LimitDistribution => 10,
            _ => 2,
        };
        if self.replicates < min_reps {
            return Err(Error::spec("/replicates", format!("at least {min_reps} replicates are required")));
        }
        if self.oracle_samples < 10 {
            return Err(Error::spec("/oracle_samples", "at least 10 oracle samples are required"));
        }
        match self.kind {
            ExperimentKind::SpectrumScaling if self.scales.len() < 2 => {
                return Err(Error::spec("/scales", "a slope fit needs at least two scales"));
            }
            ExperimentKind::Rate if self.sizes.len() < 4 => {
                return Err(Error::spec("/N", "the rate experiment needs at least four sizes"));
            }
            ExperimentKind::CrossScale | ExperimentKind::LimitDistribution if self.scale < 2 => {
                return Err(Error::spec("/scale", "scale must be at least 2"));
            }
            _ => {}
        }
        if let Some(i) = self.scales.iter().position(|&j| j == 0) {
            return Err(Error::spec(format!("/scales/{i}"), "scales start at 1"));
        }
        if self.kind == ExperimentKind::Rate {
            self.weights()?;
        }
        self.fstar
            .eval(0.0)
            .is_finite()
            .then_some(())
            .ok_or_else(|| Error::spec("/fstar", "f* must be finite"))?;
        let bank = self.bank()?;
        for (i, g) in self.grid.iter().enumerate() {
            let at = |f: &str| format!("/grid/{i}/{f}");
            if !(g.d > 0.0 && g.d < 0.5) {
                return Err(Error::spec(at("d"), format!("d = {} outside (0, 1/2)", g.d)));
            }
            if g.q0 == 0 {
                return Err(Error::spec(at("q0"), "q0 must be at least 1"));
            }
            if !is_long_memory(g.q0, g.d)? {
                return Err(Error::spec(
                    at("q0"),
                    format!("q0 = {} with d = {} is not long memory (δ = {:.4})", g.q0, g.d, delta(g.q0, g.d)?),
                ));
            }
            let adm = check_admissibility(&bank, g.q0, g.d, g.k)?;
            if !adm.pass {
                return Err(Error::spec(
                    "/bank",
                    format!(
                        "{} has M = {} < K + δ(q0) = {:.4} for grid point {i}",
                        adm.family, adm.m, adm.required
                    ),
                ));
            }
            if self.kind == ExperimentKind::LimitDistribution && g.q0 >= 2 && !(g.d > 0.25) {
                return Err(Error::spec(at("d"), "the Rosenblatt oracle needs d > 1/4"));
            }
            self.model(g).map_err(|e| Error::spec("/fstar", e.to_string()))?;
        }
        let support = bank.support() + 1;
        for (i, &n) in self.sizes.iter().enumerate() {
            let top = match self.kind {
                ExperimentKind::Rate => default_scale_rule(n) + self.p - 1,
                ExperimentKind::Constants => continue,
                _ => self.max_scale(),
            };
            let c = n_coeffs(n, support, top);
            if c.count < DEFAULT_N_MIN {
                return Err(Error::spec(
                    format!("/N/{i}"),
                    format!("N = {n} leaves n_j = {} < {DEFAULT_N_MIN} coefficients at scale {top}", c.count),
                ));
            }
        }
        Ok(())
    }
}

/// One declared tolerance and its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub name: String,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub workers: usize,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
    pub files: Vec<String>,
    pub spec: Value,
}

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl ResultBundle {
    pub fn passed(&self) -> bool {
        self.manifest.failures.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; defaults to rayon's choice.
    pub workers: Option<usize>,
    /// Overrides the spec's output directory.
    pub out: Option<PathBuf>,
}

struct Ctx<'a> {
    spec: &'a ExperimentSpec,
    bank: FilterBank,
    dir: PathBuf,
    files: Vec<String>,
    checks: Vec<Check>,
}

impl Ctx<'_> {
    fn create(&mut self, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
        self.files.push(name.to_string());
        Ok(std::io::BufWriter::new(std::fs::File::create(self.dir.join(name))?))
    }

    fn check(&mut self, name: String, observed: f64, target: f64, tolerance: f64, pass: bool) -> bool {
        self.checks.push(Check {
            name,
            observed,
            target,
            tolerance,
            pass,
        });
        pass
    }

    fn tables(&self, g: &GridPoint, n: usize, j_max: usize) -> Result<Vec<ScalogramTable>> {
        use rayon::prelude::*;
        let cfg = ProcessConfig::new(self.spec.model(g)?, g.q0, g.k, n, self.spec.seed);
        let synth = Synthesizer::new(cfg)?;
        (0..self.spec.replicates as u64)
            .into_par_iter()
            .map(|r| scalogram_of(&synth.path(r).samples, &self.bank, j_max))
            .collect()
    }
}

fn label(g: &GridPoint) -> String {
    format!("d={},q0={},K={}", g.d, g.q0, g.k)
}

fn spectrum_scaling(ctx: &mut Ctx) -> Result<()> {
    let spec = ctx.spec;
    let mut data = ctx.create("spectrum.csv")?;
    writeln!(data, "d,q0,K,N,j,n_j,mean_sigma2,se_sigma2,predicted_sigma2")?;
    let mut rows = Vec::new();
    let j_max = spec.max_scale();
    for g in &spec.grid {
        let consts = LimitConstants::compute(&spec.model(g)?, &ctx.bank, g.q0, g.k)?;
        for &n in &spec.sizes {
            let tables = ctx.tables(g, n, j_max)?;
            let est = spectrum_from_tables(&tables, &spec.scales)?;
            for (i, &j) in est.scales.iter().enumerate() {
                let n_j = tables[0].get(j).map_or(0, |e| e.n_j);
                writeln!(
                    data,
                    "{},{},{},{n},{j},{n_j},{:e},{:e},{:e}",
                    g.d,
                    g.q0,
                    g.k,
                    est.mean[i],
                    est.std_error[i],
                    consts.predicted_spectrum(j)
                )?;
            }
            let slope = est
                .log2_slope(&spec.scales)
                .ok_or_else(|| Error::numerical("non-positive mean spectrum in slope fit"))?;
            rows.push((*g, n, slope, 2.0 * consts.d0));
        }
    }
    data.flush()?;
    let mut out = ctx.create("slopes.csv")?;
    writeln!(out, "d,q0,K,N,slope,expected,pass")?;
    for (g, n, slope, want) in rows {
        let tol = spec.tolerances.slope;
        let pass = ctx.check(format!("slope[{},N={n}]", label(&g)), slope, want, tol, (slope - want).abs() <= tol);
        writeln!(out, "{},{},{},{n},{slope:.6},{want:.6},{pass}", g.d, g.q0, g.k)?;
    }
    out.flush()?;
    Ok(())
}

fn rate(ctx: &mut Ctx) -> Result<()> {
    use rayon::prelude::*;
    let spec = ctx.spec;
    let weights = spec.weights()?;
    let mut data = ctx.create("rate.csv")?;
    writeln!(data, "d,q0,K,N,n_j,j,mean_d0_hat,sd_d0_hat,sd_fluctuation")?;
    let mut summaries = Vec::new();
    for g in &spec.grid {
        let mut per_size = Vec::new();
        for &n in &spec.sizes {
            let j0 = default_scale_rule(n);
            let cfg = ProcessConfig::new(spec.model(g)?, g.q0, g.k, n, spec.seed);
            let synth = Synthesizer::new(cfg)?;
            let bank = &ctx.bank;
            let reports = (0..spec.replicates as u64)
                .into_par_iter()
                .map(|r| estimate_d0(&scalogram_of(&synth.path(r).samples, bank, j0 + weights.p - 1)?, j0, &weights))
                .collect::<Result<Vec<_>>>()?;
            per_size.push(SizeSample::from_reports(n, &reports));
        }
        let rep = rate_from_estimates(g.q0, g.d, g.k, &weights, per_size)?;
        for r in &rep.rows {
            writeln!(
                data,
                "{},{},{},{},{},{},{:e},{:e},{:e}",
                g.d, g.q0, g.k, r.n, r.n_j, r.j, r.mean_d0_hat, r.sd_d0_hat, r.sd_fluctuation
            )?;
        }
        summaries.push((*g, rep));
    }
    data.flush()?;
    let mut out = ctx.create("rate_summary.csv")?;
    writeln!(
        out,
        "d,q0,K,exponent,scalogram_exponent,expected,limit_multiplier,skewness,skewness_se,pass"
    )?;
    for (g, rep) in summaries {
        let tol = spec.tolerances.exponent;
        let want = rep.expected_exponent;
        let a = ctx.check(
            format!("exponent[{}]", label(&g)),
            rep.exponent,
            want,
            tol,
            (rep.exponent - want).abs() <= tol,
        );
        let b = ctx.check(
            format!("scalogram_exponent[{}]", label(&g)),
            rep.scalogram_exponent,
            want,
            tol,
            (rep.scalogram_exponent - want).abs() <= tol,
        );
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            g.d,
            g.q0,
            g.k,
            rep.exponent,
            rep.scalogram_exponent,
            want,
            rep.limit_multiplier,
            rep.skewness,
            rep.skewness_std_error,
            a && b
        )?;
    }
    out.flush()?;
    Ok(())
}

fn fluctuation_cases(ctx: &mut Ctx) -> Result<Vec<(GridPoint, usize, Vec<f64>, Vec<f64>)>> {
    let spec = ctx.spec;
    let j = spec.scale;
    let scales = [j - 1, j];
    let mut w = ctx.create("fluctuations.csv")?;
    writeln!(w, "d,q0,K,N,replicate,j,sigma2_hat,fluctuation")?;
    let mut cases = Vec::new();
    for g in &spec.grid {
        for &n in &spec.sizes {
            let tables = ctx.tables(g, n, j)?;
            let fl = centered_fluctuations(&tables, &scales, None)?;
            for (r, (t, row)) in tables.iter().zip(&fl).enumerate() {
                for (&s, f) in scales.iter().zip(row) {
                    writeln!(w, "{},{},{},{n},{r},{s},{:e},{:e}", g.d, g.q0, g.k, t.sigma2_hat(s)?, f)?;
                }
            }
            let lower = fl.iter().map(|r| r[0]).collect();
            let upper = fl.iter().map(|r| r[1]).collect();
            cases.push((*g, n, lower, upper));
        }
    }
    w.flush()?;
    Ok(cases)
}

fn cross_scale(ctx: &mut Ctx) -> Result<()> {
    let cases = fluctuation_cases(ctx)?;
    let tol = ctx.spec.tolerances;
    let j = ctx.spec.scale;
    let mut out = ctx.create("cross_scale.csv")?;
    writeln!(out, "d,q0,K,N,j,correlation,pass")?;
    for (g, n, lower, upper) in cases {
        let c = stats::correlation(&lower, &upper);
        let name = format!("correlation[{},N={n}]", label(&g));
        let pass = if g.q0 >= 2 {
            ctx.check(name, c, 1.0, tol.correlation_min, c > tol.correlation_min)
        } else {
            ctx.check(name, c, 0.0, tol.correlation_max, c < tol.correlation_max)
        };
        writeln!(out, "{},{},{},{n},{j},{c:.6},{pass}", g.d, g.q0, g.k)?;
    }
    out.flush()?;
    Ok(())
}

fn limit_distribution(ctx: &mut Ctx) -> Result<()> {
    let cases = fluctuation_cases(ctx)?;
    let spec = ctx.spec;
    let tol = spec.tolerances;
    let j = spec.scale;
    let mut out = ctx.create("limit.csv")?;
    writeln!(out, "d,q0,K,N,j,skewness,skewness_se,ks_statistic,ks_p_value,pass")?;
    for (g, n, _, fl) in cases {
        let z = stats::studentize(&fl);
        let sk = stats::skewness(&z);
        let se = stats::skewness_std_error(z.len());
        let tag = format!("{},N={n}", label(&g));
        let (ks, p, pass) = if g.q0 >= 2 {
            let oracle = rosenblatt_oracle_sample(g.d, RosenblattMethod::SpectralGrid, None, spec.oracle_samples, spec.seed)?;
            let t = stats::ks_two_sample(&z, &oracle.studentized());
            let a = ctx.check(format!("ks_p[{tag}]"), t.p_value, tol.ks_p_min, tol.ks_p_min, t.p_value > tol.ks_p_min);
            let b = ctx.check(format!("skewness_se[{tag}]"), sk / se, tol.skewness_se, tol.skewness_se, sk / se > tol.skewness_se);
            (t.statistic, t.p_value, a && b)
        } else {
            let a = ctx.check(format!("skewness_se[{tag}]"), sk / se, 0.0, tol.skewness_se, (sk / se).abs() < tol.skewness_se);
            (f64::NAN, f64::NAN, a)
        };
        writeln!(out, "{},{},{},{n},{j},{sk:.6},{se:.6},{ks:.6},{p:.6},{pass}", g.d, g.q0, g.k)?;
    }
    out.flush()?;
    Ok(())
}

fn constants(ctx: &mut Ctx) -> Result<()> {
    let spec = ctx.spec;
    let mut docs = Vec::new();
    let mut rows = Vec::new();
    for g in &spec.grid {
        let c = LimitConstants::compute(&spec.model(g)?, &ctx.bank, g.q0, g.k)?;
        for (p, v) in &c.l {
            rows.push(format!("{},{},{},{p},{:e},{:e},{:e}", g.d, g.q0, g.k, v.value, v.gamma_p, v.radial));
        }
        docs.push(c.to_json());
    }
    let mut w = ctx.create("constants.json")?;
    serde_json::to_writer_pretty(&mut w, &docs)?;
    writeln!(w)?;
    w.flush()?;
    let mut w = ctx.create("constants.csv")?;
    writeln!(w, "d,q0,K,p,L_p,gamma_p,radial")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a validated spec and writes its bundle. Tolerance failures are
/// recorded in the manifest, not returned as errors.
pub fn run(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ResultBundle> {
    spec.validate()?;
    let start = Instant::now();
    let dir = opts
        .out
        .clone()
        .or_else(|| spec.out.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(&spec.name));
    std::fs::create_dir_all(&dir)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        if w == 0 {
            return Err(Error::domain("workers must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::numerical(format!("thread pool: {e}")))?;
    let workers = pool.current_num_threads();
    let mut ctx = Ctx {
        spec,
        bank: spec.bank()?,
        dir: dir.clone(),
        files: Vec::new(),
        checks: Vec::new(),
    };
    pool.install(|| match spec.kind {
        ExperimentKind::SpectrumScaling => spectrum_scaling(&mut ctx),
        ExperimentKind::Rate => rate(&mut ctx),
        ExperimentKind::CrossScale => cross_scale(&mut ctx),
        ExperimentKind::LimitDistribution => limit_distribution(&mut ctx),
        ExperimentKind::Constants => constants(&mut ctx),
    })?;
    let failures = ctx
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}: observed {:.6}, target {:.6} (tolerance {})", c.name, c.observed, c.target, c.tolerance))
        .collect();
    let mut files = ctx.files;
    files.push("manifest.json".into());
    let manifest = Manifest {
        name: spec.name.clone(),
        kind: spec.kind,
        config_hash: spec.config_hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        workers,
        tolerances: spec.tolerances,
        checks: ctx.checks,
        failures,
        files,
        spec: spec.normalized(),
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(ResultBundle { dir, manifest })
}
