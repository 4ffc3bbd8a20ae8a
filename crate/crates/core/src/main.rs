use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use aruba::harness::{load_config, run_experiment};
use aruba::suite::{run_criterion, run_suite};

#[derive(Parser)]
#[command(name = "aruba", version, about = "Run meta-learning experiments and the acceptance suite")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write results.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the file's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the file's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check an experiment file and list every schema error.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the acceptance criteria.
    Suite {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(parsed) => {
                if cli.json {
                    println!("{}", json!({ "valid": true, "kind": parsed.kind.as_str(), "runs": parsed.run_seeds().len() }));
                } else if !cli.quiet {
                    println!("{}: valid {} experiment, {} run(s)", config.display(), parsed.kind.as_str(), parsed.run_seeds().len());
                }
                ExitCode::SUCCESS
            }
            Err(errors) => {
                if cli.json {
                    println!("{}", json!({ "valid": false, "errors": errors.0 }));
                }
                eprintln!("{errors}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, out, seed, jobs } => {
            let parsed = match load_config(&config) {
                Ok(c) => c,
                Err(errors) => {
                    eprintln!("{errors}");
                    return ExitCode::from(2);
                }
            };
            let parsed = match seed {
                Some(s) => parsed.with_seed(s),
                None => parsed,
            };
            let out = out.unwrap_or_else(|| parsed.output.clone());
            match run_experiment(&parsed, &out, jobs) {
                Ok(written) => {
                    if cli.json {
                        println!("{}", written.report.summary);
                    } else if !cli.quiet {
                        println!("wrote {} and {}", written.csv_path.display(), written.summary_path.display());
                    }
                    if written.report.failed {
                        eprintln!("one or more runs failed; partial results are flagged in the summary");
                        ExitCode::from(1)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Suite { only } => {
            let results: Vec<_> = if only.is_empty() {
                run_suite()
            } else {
                let mut picked = Vec::new();
                for id in only {
                    match run_criterion(id) {
                        Some(r) => picked.push(r),
                        None => {
                            eprintln!("unknown criterion {id}");
                            return ExitCode::from(2);
                        }
                    }
                }
                picked
            };
            for r in &results {
                if cli.json {
                    println!("{}", json!(r));
                } else if !cli.quiet || !r.passed {
                    println!("{r}");
                }
            }
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
