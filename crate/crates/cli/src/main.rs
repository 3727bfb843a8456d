use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use hermscal_core::harness::{list_experiments, run, ExperimentSpec, RunOptions};
use hermscal_core::oracles::LimitConstants;
use hermscal_core::spectral::SpectralModel;
use hermscal_core::synth::{write_binary, write_csv, ProcessConfig, Synthesizer};
use hermscal_core::wavelet::{check_admissibility, FilterBank};
use hermscal_core::Error;

const TOLERANCE_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(name = "hermscal", version, about = "Wavelet scalogram experiments for Hermite-transformed long-memory processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a spec and print it with defaults filled in.
    Validate { spec: PathBuf },
    /// Run an experiment and write its result bundle.
    Run {
        spec: PathBuf,
        #[arg(long, env = "HERMSCAL_WORKERS")]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the limit constants for a model and a filter bank as JSON.
    Constants { model: PathBuf, bank: PathBuf },
    /// Synthesize one path of Y.
    Sample {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; `.bin` selects the binary format (`HSC1`, a u64 count, little-endian f64), anything else CSV.
        /// Without it, values go to stdout one per line.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in experiment kinds.
    List,
}

/// A spectral model plus the Hermite rank and integration order.
#[derive(Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    model: SpectralModel,
    #[serde(default = "one")]
    q0: u32,
    #[serde(rename = "K", default)]
    k: u32,
}

fn one() -> u32 {
    1
}

fn read_model(path: &Path) -> Result<ModelFile, Error> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn execute(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Validate { spec } => {
            let s = ExperimentSpec::load(&spec)?;
            println!("{}", serde_json::to_string_pretty(&s.normalized())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { spec, workers, out } => {
            let s = ExperimentSpec::load(&spec)?;
            let bundle = run(&s, &RunOptions { workers, out })?;
            for c in &bundle.manifest.checks {
                println!(
                    "{} {}: observed {:.6}, target {:.6}, tolerance {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.observed,
                    c.target,
                    c.tolerance
                );
            }
            println!("results in {}", bundle.dir.display());
            Ok(if bundle.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(TOLERANCE_FAILURE)
            })
        }
        Command::Constants { model, bank } => {
            let m = read_model(&model)?;
            let bank = FilterBank::load(&bank)?;
            let adm = check_admissibility(&bank, m.q0, m.model.d(), m.k)?;
            if !adm.pass {
                return Err(Error::Admissibility(format!(
                    "{} has M = {} < K + δ(q0) = {:.4}",
                    adm.family, adm.m, adm.required
                )));
            }
            let c = LimitConstants::compute(&m.model, &bank, m.q0, m.k)?;
            println!("{}", serde_json::to_string_pretty(&c.to_json())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample { model, n, seed, out } => {
            let m = read_model(&model)?;
            let y = Synthesizer::new(ProcessConfig::new(m.model, m.q0, m.k, n, seed))?.path(0);
            match out {
                Some(p) if p.extension().is_some_and(|e| e == "bin") => write_binary(&p, &y.samples)?,
                Some(p) => write_csv(&p, &y.samples)?,
                None => {
                    use std::io::Write;
                    let mut w = std::io::BufWriter::new(std::io::stdout().lock());
                    for v in &y.samples {
                        writeln!(w, "{v:e}")?;
                    }
                    w.flush()?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::List => {
            println!("{}", serde_json::to_string_pretty(&list_experiments())?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
