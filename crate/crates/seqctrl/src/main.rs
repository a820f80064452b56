//! Thin command-line front end over the library; see the README for the
//! config schema and the examples directory for library usage.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqctrl::cli::{
    cmd_design, cmd_montecarlo, cmd_simulate, cmd_stability, RunConfig, DEFAULT_MONTE_CARLO_KINDS,
};
use seqctrl::harness::ControllerKind;
use seqctrl::Error;

#[derive(Parser)]
#[command(
    name = "seqctrl",
    about = "Sequence-based control over lossy networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the LQR gain for the configured plant and cost weights.
    Design {
        #[arg(long)]
        config: PathBuf,
    },
    /// Mean-square stability verdict for the configured closed loop.
    Stability {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a single episode and write its trajectory CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured controller (cs|ol|vci|vci-filtered).
        #[arg(long)]
        controller: Option<String>,
        /// Output CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo batch with a per-controller cost summary CSV.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured number of runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Restrict the batch to one controller kind (cs|ol|vci|vci-filtered).
        #[arg(long)]
        controller: Option<String>,
        /// Output CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the pendulum benchmark preset config as JSON.
    Pendulum {
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    match path {
        Some(p) => Ok(Box::new(std::fs::File::create(p)?)),
        None => Ok(Box::new(std::io::stdout())),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Design { config } => {
            let config = RunConfig::parse_file(&config)?;
            let report = cmd_design(&config)?;
            println!(
                "gain: {:?}",
                report.gain.iter().copied().collect::<Vec<_>>()
            );
            println!("closed_loop_radius: {:.6}", report.closed_loop_radius);
        }
        Command::Stability { config } => {
            let config = RunConfig::parse_file(&config)?;
            let report = cmd_stability(&config)?;
            println!("radius: {:.6}", report.verdict.radius);
            println!("mss: {}", report.verdict.is_mss);
            println!("stationary_age: {:?}", report.stationary_age);
        }
        Command::Simulate {
            config,
            seed,
            controller,
            out,
        } => {
            let mut config = RunConfig::parse_file(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(kind) = controller {
                config.controller = kind.parse::<ControllerKind>()?;
            }
            let mut writer = open_out(&out)?;
            let result = cmd_simulate(&config, &mut writer)?;
            writer.flush()?;
            eprintln!("episode cost: {:.6}", result.cost);
        }
        Command::Montecarlo {
            config,
            seed,
            runs,
            controller,
            out,
        } => {
            let mut config = RunConfig::parse_file(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(runs) = runs {
                config.runs = runs;
            }
            let kinds: Vec<ControllerKind> = match controller {
                Some(kind) => vec![kind.parse::<ControllerKind>()?],
                None => DEFAULT_MONTE_CARLO_KINDS.to_vec(),
            };
            let mut writer = open_out(&out)?;
            let (rows, comparison) = cmd_montecarlo(&config, &kinds, &mut writer)?;
            writer.flush()?;
            for row in &rows {
                eprintln!(
                    "{}: mean {:.4} (stderr {:.4}, {} runs)",
                    row.controller, row.stats.mean, row.stats.std_error, row.stats.runs
                );
            }
            if let Some(comparison) = comparison {
                eprintln!("{comparison}");
            }
        }
        Command::Pendulum { out } => {
            let json = RunConfig::pendulum_example().to_json_string()?;
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::Io(_) => 2,
        Error::DimensionCap { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code_for(&error))
        }
    }
}
