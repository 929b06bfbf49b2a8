//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hybridspam::challenge::{verify_protocols, Protocol};
use hybridspam::corpus::{generate_corpus, Corpus, MixtureParams};
use hybridspam::experiments::{
    consecutive_seeds, reference_pairs, spam_proportion_table, sweep_thresholds, Mode, SweepReport, SweepSpec,
    DEFAULT_E1, DEFAULT_E2, DEFAULT_RUNS,
};
use hybridspam::{run_corpus, Accounting, Error, SimPolicy, ThresholdPair};

#[derive(Parser)]
#[command(name = "hybridspam", version, about = "Hybrid content filter + challenge-response spam simulator")]
struct Cli {
    /// Base seed for every random quantity.
    #[arg(long, global = true, env = "HYBRIDSPAM_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (CSV plus `.meta.json`).
    Generate {
        #[command(flatten)]
        mixture: MixtureArgs,
        #[arg(long, default_value = "corpus.csv")]
        out: PathBuf,
    },
    /// Run the hop-counting simulation over a corpus.
    Simulate {
        /// Corpus CSV; generated from the mixture flags when absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        mixture: MixtureArgs,
        #[arg(long, default_value_t = 0.1)]
        h1: f64,
        #[arg(long, default_value_t = 0.9)]
        h2: f64,
        #[command(flatten)]
        errors: ErrorRates,
        #[arg(long, default_value = "p1")]
        protocol: Protocol,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the full threshold grid.
    Sweep {
        #[arg(long, default_value_t = 1.0 / 30.0)]
        step: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.1457")]
        proportions: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "per-truth", value_parser = parse_accounting)]
        accounting: Accounting,
    },
    /// Spam-proportion table over selected threshold pairs.
    Table {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
        proportions: Vec<f64>,
        /// Comma-separated `h1:h2` pairs; defaults to the reference pairs.
        #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
        pairs: Vec<ThresholdPair>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "pooled", value_parser = parse_accounting)]
        accounting: Accounting,
    },
    /// Run the scripted protocol scenarios.
    VerifyProtocols {
        /// Write the full report with traces as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MixtureArgs {
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Spam proportion.
    #[arg(long, default_value_t = 0.1457)]
    q: f64,
    #[arg(long, default_value_t = 3.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 5.0)]
    beta0: f64,
    #[arg(long, default_value_t = 5.0)]
    alpha1: f64,
    #[arg(long, default_value_t = 2.0)]
    beta1: f64,
}

impl MixtureArgs {
    fn params(&self) -> hybridspam::Result<MixtureParams> {
        MixtureParams::new(self.q, self.alpha0, self.beta0, self.alpha1, self.beta1, self.n)
    }
}

#[derive(Args)]
struct ErrorRates {
    /// Probability a human fails the challenge.
    #[arg(long, default_value_t = DEFAULT_E1)]
    e1: f64,
    /// Probability a bot passes it.
    #[arg(long, default_value_t = DEFAULT_E2)]
    e2: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    errors: ErrorRates,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    #[arg(long, default_value = "empirical")]
    mode: Mode,
    #[arg(long, default_value = "p1")]
    protocol: Protocol,
    /// CSV output path (a `.json` sidecar is written next to it); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<ThresholdPair, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected h1:h2, got {s:?}"))?;
    let h1: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let h2: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    ThresholdPair::new(h1, h2).map_err(|e| e.to_string())
}

fn parse_accounting(s: &str) -> Result<Accounting, String> {
    match s {
        "per-truth" => Ok(Accounting::PerTruth),
        "pooled" => Ok(Accounting::Pooled),
        _ => Err(format!("unknown accounting {s:?} (expected per-truth or pooled)")),
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Parse { .. } | Error::Metadata(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
    }
}

fn sweep_spec(seed: u64, run: &RunArgs, proportions: Vec<f64>, accounting: Accounting) -> SweepSpec {
    SweepSpec {
        proportions,
        e1: run.errors.e1,
        e2: run.errors.e2,
        seeds: consecutive_seeds(seed, run.runs),
        n: run.n,
        mode: run.mode,
        accounting,
        protocol: run.protocol,
        ..SweepSpec::default()
    }
}

fn emit(report: &SweepReport, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let sidecar = report.save(path)?;
            println!(
                "wrote {} rows to {} (spec in {})",
                report.cells.len(),
                path.display(),
                sidecar.display()
            );
        }
        None => print!("{}", report.csv_string()?),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match cli.command {
        Command::Generate { mixture, out } => {
            let corpus = generate_corpus(&mixture.params()?, seed);
            corpus.save(&out)?;
            println!(
                "wrote {} messages ({} spam) to {}",
                corpus.len(),
                corpus.count(hybridspam::ClassLabel::Spam),
                out.display()
            );
        }
        Command::Simulate {
            corpus,
            mixture,
            h1,
            h2,
            errors,
            protocol,
            out,
        } => {
            let corpus = match corpus {
                Some(path) => {
                    if !path.exists() {
                        return Err(Failure::Usage(format!("corpus {} not found", path.display())));
                    }
                    Corpus::load(&path)?
                }
                None => generate_corpus(&mixture.params()?, seed),
            };
            let policy = SimPolicy::new(ThresholdPair::new(h1, h2)?, errors.e1, errors.e2, protocol, seed)?;
            let report = run_corpus(&corpus, &policy)?;
            let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, json + "\n").map_err(Error::from)?;
                    let c = report.pathway_counts;
                    println!(
                        "total_hops {}  direct_normal {}  challenged_delivered {}  challenged_dropped {}  direct_spam {}",
                        report.total_hops, c.direct_normal, c.challenged_delivered, c.challenged_dropped, c.direct_spam
                    );
                }
                None => println!("{json}"),
            }
        }
        Command::Sweep {
            step,
            proportions,
            run,
            accounting,
        } => {
            let spec = SweepSpec {
                grid_step: step,
                ..sweep_spec(seed, &run, proportions, accounting)
            };
            spec.validate()?;
            let mut cells = Vec::new();
            for &q in &spec.proportions {
                cells.extend(sweep_thresholds(&spec, q)?);
            }
            emit(&SweepReport { spec, cells }, run.out.as_ref())?;
        }
        Command::Table {
            proportions,
            pairs,
            run,
            accounting,
        } => {
            let pairs = if pairs.is_empty() { reference_pairs() } else { pairs };
            let spec = sweep_spec(seed, &run, proportions, accounting);
            let cells = spam_proportion_table(&spec, &pairs)?;
            emit(&SweepReport { spec, cells }, run.out.as_ref())?;
        }
        Command::VerifyProtocols { out } => {
            let report = verify_protocols(seed);
            for s in &report.scenarios {
                println!(
                    "{} {:<4} {}{}",
                    if s.passed { "PASS" } else { "FAIL" },
                    s.protocol,
                    s.name,
                    s.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
                );
            }
            println!("{} passed, {} failed", report.passed, report.failed);
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
                std::fs::write(path, json + "\n").map_err(Error::from)?;
            }
            if !report.all_passed() {
                return Err(Failure::Verification(format!("{} protocol scenarios failed", report.failed)));
            }
        }
    }
    Ok(())
}
