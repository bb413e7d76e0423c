use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bamsdn::metrics::CsvDigest;
use bamsdn::scenario::{self, RunOptions, ScenarioError, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "bamsdn",
    version,
    about = "Simulate MAM / RDM bandwidth allocation under an SDN controller"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its journal and summary.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Rescan every invariant after each event.
        #[arg(long)]
        verify: bool,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: String },
    /// Summarize a CSV journal written by `run`.
    Summary { journal: PathBuf },
}

fn load(arg: &str) -> Result<ScenarioSpec, ScenarioError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(spec) = scenario::bundled(arg) {
            return Ok(spec);
        }
    }
    scenario::load(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            verify,
        } => {
            let spec = match load(&scenario) {
                Ok(spec) => spec,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let output = match scenario::run(&spec, RunOptions { seed, verify }) {
                Ok(output) => output,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(e.exit_code() as u8);
                }
            };
            let seed = output.summary.seed;
            let csv = out.join(format!("{}_seed{seed}.csv", spec.name));
            let summary = out.join(format!("{}_seed{seed}.summary", spec.name));
            let written = fs::create_dir_all(&out)
                .map_err(|e| e.to_string())
                .and_then(|_| output.journal.export_csv(&csv).map_err(|e| e.to_string()))
                .and_then(|_| {
                    fs::write(&summary, output.summary.render()).map_err(|e| e.to_string())
                });
            if let Err(e) = written {
                eprintln!("error: cannot write results: {e}");
                return ExitCode::from(3);
            }
            print!("{}", output.summary.render());
            eprintln!("wrote {} and {}", csv.display(), summary.display());
            ExitCode::SUCCESS
        }
        Command::Validate { scenario } => match load(&scenario) {
            Ok(spec) => {
                println!(
                    "{}: ok ({} requests, {} classes, {} links)",
                    spec.name,
                    spec.stop,
                    spec.classes.len(),
                    spec.topology.links().len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Summary { journal } => {
            let digest = fs::read_to_string(&journal)
                .map_err(|e| e.to_string())
                .and_then(|text| CsvDigest::parse(&text).map_err(|e| e.to_string()));
            match digest {
                Ok(d) => {
                    print!("{}", d.render());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
