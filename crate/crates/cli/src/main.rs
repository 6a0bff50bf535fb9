use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use isdbtb_fbmc::harness::{self, BerRecord, Scenario};
use isdbtb_fbmc::protofilter::{frequency_response, PrototypeFilter};
use isdbtb_fbmc::Error;

/// Monte-Carlo BER simulator for ISDB-T_B over FBMC/OQAM.
#[derive(Debug, Parser)]
#[command(name = "fbmc-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// BER over an inclusive SNR range, one CSV row per point.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr_start: f64,
        #[arg(long, allow_hyphen_values = true)]
        snr_stop: f64,
        #[arg(long)]
        snr_step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// BER at a single SNR.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dumps the prototype taps, and optionally its magnitude response.
    Filter {
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long)]
        m: usize,
        /// `index,tap` rows.
        #[arg(long)]
        out: PathBuf,
        /// `frequency,magnitude_db` rows over [-0.5, 0.5) cycles per sample.
        #[arg(long)]
        response: Option<PathBuf>,
        #[arg(long, default_value_t = 4096)]
        points: usize,
    },
    /// Runs the built-in oracle checks.
    Selftest,
}

/// Exit status classes.
enum Failure {
    /// A check or trial failed.
    Run(anyhow::Error),
    /// The configuration could not be used.
    Config(anyhow::Error),
}

impl Failure {
    fn config(e: impl Into<anyhow::Error>) -> Self {
        Failure::Config(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::from_file(path)
        .with_context(|| format!("loading scenario {}", path.display()))
        .map_err(Failure::config)
}

fn summary(r: &BerRecord) -> String {
    format!(
        "snr {:>6.2} dB  {}  errors {:>8} / {:>10} bits  ber {:.3e}{}",
        r.snr_db,
        r.estimator,
        r.bit_errors,
        r.bits_sent,
        r.ber,
        if r.training_converged {
            ""
        } else {
            "  (training hit epoch budget)"
        }
    )
}

/// Bad parameters surfaced by the engine are configuration errors; anything
/// else (divergence, I/O on output) is a run failure.
fn classify(e: Error) -> Failure {
    match e {
        Error::Config(_) => Failure::Config(e.into()),
        other => Failure::Run(other.into()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sweep {
            scenario,
            snr_start,
            snr_stop,
            snr_step,
            out,
        } => {
            let scenario = load(&scenario)?;
            let snrs =
                harness::snr_range(snr_start, snr_stop, snr_step).map_err(Failure::config)?;
            let records = harness::sweep(&scenario, &snrs).map_err(classify)?;
            for r in &records {
                println!("{}", summary(r));
            }
            harness::emit_csv(&records, &out)
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Run { scenario, snr, out } => {
            if snr.is_nan() {
                return Err(Failure::config(anyhow::anyhow!("SNR is NaN")));
            }
            let scenario = Scenario {
                snr_db: snr,
                ..load(&scenario)?
            };
            let record = harness::run_trial(&scenario).map_err(classify)?;
            println!("{}", summary(&record));
            harness::emit_csv(&[record], &out)
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Filter {
            k,
            m,
            out,
            response,
            points,
        } => {
            let filter = PrototypeFilter::new(k, m).map_err(Failure::config)?;
            let mut w = csv::Writer::from_path(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            w.write_record(["index", "tap"]).context("writing taps")?;
            for (i, t) in filter.taps().iter().enumerate() {
                w.write_record([i.to_string(), format!("{t:.16e}")])
                    .context("writing taps")?;
            }
            w.flush().context("writing taps")?;
            if let Some(path) = response {
                let curve = frequency_response(&filter, points).map_err(Failure::config)?;
                let mut w = csv::Writer::from_path(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                w.write_record(["frequency", "magnitude_db"])
                    .context("writing response")?;
                for (f, db) in curve {
                    w.write_record([format!("{f:.16e}"), format!("{db:.16e}")])
                        .context("writing response")?;
                }
                w.flush().context("writing response")?;
            }
            println!(
                "{} taps (K={k}, M={m}) written to {}",
                filter.len(),
                out.display()
            );
        }
        Command::Selftest => {
            let report = harness::selftest();
            print!("{report}");
            if !report.passed() {
                return Err(Failure::Run(anyhow::anyhow!("self-test failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
    }
}
