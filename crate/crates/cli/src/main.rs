use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bgp_cli::report::{campaign_report, run_report, CampaignSummary, Format};
use bgp_cli::{load_scenario, parse_seeds, run_campaign, run_one, CliError, RunSummary, EXIT_PASS, EXIT_VIOLATION};
use clap::{Parser, Subcommand};

/// Deterministic simulator for Byzantine Generalized Paxos.
#[derive(Parser)]
#[command(name = "bgp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seed of a scenario and check every property.
    RunScenario {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's own seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the event trace and verdict.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        report: Format,
    },
    /// Run a range of seeds and aggregate verdicts and message-step depths.
    Campaign {
        #[arg(long)]
        scenario: PathBuf,
        /// `a..b` or `a..=b`.
        #[arg(long, default_value = "0..100")]
        seeds: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        report: Format,
    },
}

fn init_logging() {
    let level = match std::env::var("BGP_LOG_LEVEL").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Off,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::RunScenario {
            scenario,
            seed,
            trace_out,
            report,
        } => {
            let cfg = load_scenario(&scenario)?;
            let seed = seed.unwrap_or(cfg.seed);
            log::info!("running {} seed {seed}", scenario.display());
            let outcome = run_one(&cfg, seed, trace_out.is_some())?;
            if let Some(path) = &trace_out {
                let write = |path: &PathBuf| -> std::io::Result<()> {
                    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                    outcome.trace.write_to(&mut f, &outcome.verdict)?;
                    f.flush()
                };
                write(path).map_err(|source| CliError::Write {
                    path: path.clone(),
                    source,
                })?;
                log::debug!("trace written to {}", path.display());
            }
            let summary = RunSummary::from_outcome(seed, &outcome);
            print!("{}", run_report(&scenario.display().to_string(), &summary, report));
            Ok(if summary.passed { EXIT_PASS } else { EXIT_VIOLATION })
        }
        Command::Campaign {
            scenario,
            seeds,
            jobs,
            report,
        } => {
            let cfg = load_scenario(&scenario)?;
            let range = parse_seeds(&seeds)?;
            log::info!("campaign {} seeds {seeds} on {jobs} threads", scenario.display());
            let runs = run_campaign(&cfg, range, jobs)?;
            for r in runs.iter().filter(|r| !r.passed) {
                log::debug!("seed {} failed: {:?}", r.seed, r.violations);
            }
            let summary = CampaignSummary::from_runs(&runs);
            print!("{}", campaign_report(&scenario.display().to_string(), &seeds, &summary, report));
            Ok(if summary.failed_seeds.is_empty() { EXIT_PASS } else { EXIT_VIOLATION })
        }
    }
}

fn main() -> ExitCode {
    init_logging();
    let code = match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
