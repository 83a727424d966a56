use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use makersim::metrics::{mcap_tvl_ratio, TvlSeries};
use makersim::scenario::{run, Scenario};
use makersim::{Config, Wad};

#[derive(Parser)]
#[command(
    name = "makersim",
    version,
    about = "Deterministic CDP stablecoin protocol simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the run report.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        /// Also write the final canonical state snapshot.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Rerun a scenario and compare its final state hash.
    Replay {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        expect: String,
    },
    /// Statistics over a `date,tvl_usd` CSV series.
    Metrics {
        #[arg(long)]
        tvl_csv: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Market cap in USD; adds the mcap/TVL ratio at the last point.
        #[arg(long)]
        market_cap: Option<Wad>,
    },
}

enum Failure {
    Input(String),
    Mismatch(String),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(scenario: &Path, config: &Path) -> Result<(Scenario, Config), Failure> {
    let config = Config::from_json(&read(config)?).map_err(|e| Failure::Input(format!("{}: {e}", config.display())))?;
    let scenario =
        Scenario::parse(&read(scenario)?).map_err(|e| Failure::Input(format!("{}: {e}", scenario.display())))?;
    Ok((scenario, config))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            scenario,
            config,
            seed,
            report,
            snapshot,
        } => {
            let (scenario, config) = load(&scenario, &config)?;
            let out = run(&scenario, &config, seed).map_err(|e| Failure::Input(e.to_string()))?;
            fs::write(&report, out.report.to_json() + "\n")?;
            if let Some(path) = snapshot {
                fs::write(path, out.engine.snapshot())?;
            }
            println!("{}", out.report.final_state_hash);
        }
        Command::Replay {
            scenario,
            config,
            seed,
            expect,
        } => {
            let (scenario, config) = load(&scenario, &config)?;
            let out = run(&scenario, &config, seed).map_err(|e| Failure::Input(e.to_string()))?;
            let got = out.report.final_state_hash;
            if !got.eq_ignore_ascii_case(expect.trim()) {
                return Err(Failure::Mismatch(format!("expected {expect}, got {got}")));
            }
            println!("ok {got}");
        }
        Command::Metrics {
            tvl_csv,
            report,
            market_cap,
        } => {
            let series =
                TvlSeries::from_path(&tvl_csv).map_err(|e| Failure::Input(format!("{}: {e}", tvl_csv.display())))?;
            let stats = series.stats().map_err(|e| Failure::Input(e.to_string()))?;
            let ratio = market_cap
                .map(|cap| mcap_tvl_ratio(cap, stats.last.tvl_usd))
                .transpose()
                .map_err(|e| Failure::Input(e.to_string()))?;
            let body = json!({
                "points": series.points(),
                "stats": stats,
                "mcap_tvl_ratio": ratio,
            });
            fs::write(
                &report,
                serde_json::to_string_pretty(&body).expect("report serializes") + "\n",
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Mismatch(msg)) => {
            eprintln!("replay mismatch: {msg}");
            ExitCode::from(2)
        }
    }
}
