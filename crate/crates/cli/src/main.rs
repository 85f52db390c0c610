use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fedrep::contract::Objective;
use fedrep_cli::{contract_opt, parse_grid, simulate, sweep, verify, CliError, ContractOptions, GridAxis};

#[derive(Parser)]
#[command(name = "fedrep", version, about = "Reputation-based federated-learning incentive simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write rounds.csv, metrics.csv, summary.json and manifest.json.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Root seed; overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "FEDREP_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Run every combination of grid values and seeds.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "grid", value_parser = grid_axis)]
        grid: Vec<GridAxis>,
        /// Comma-separated seeds; the config's seed when omitted.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, env = "FEDREP_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Solve for the optimal contract and print the result as JSON.
    ContractOpt {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Upper bound on the contribution, C_max by default.
        #[arg(long)]
        c_upper: Option<f64>,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Mechanism)]
        objective: ObjectiveArg,
        /// Comma-separated cost parameters for a sensitivity sweep.
        #[arg(long, value_delimiter = ',')]
        gamma_c: Vec<f64>,
    },
    /// Re-check an output directory against its manifest and invariants.
    Verify {
        #[arg(long, env = "FEDREP_OUT", default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Mechanism,
    Relaxed,
}

fn grid_axis(s: &str) -> Result<GridAxis, String> {
    parse_grid(s).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let m = simulate(config.as_deref(), seed, &out)?;
            for f in &m.files {
                println!("{}  {}", f.sha256, out.join(&f.name).display());
            }
        }
        Command::Sweep { config, grid, seeds, out } => {
            let m = sweep(config.as_deref(), &grid, &seeds, &out)?;
            for f in &m.files {
                println!("{}  {}", f.sha256, out.join(&f.name).display());
            }
        }
        Command::ContractOpt {
            config,
            c_upper,
            objective,
            gamma_c,
        } => {
            let opts = ContractOptions {
                c_upper,
                objective: match objective {
                    ObjectiveArg::Mechanism => Objective::Mechanism,
                    ObjectiveArg::Relaxed => Objective::Relaxed,
                },
                gamma_c,
            };
            let report = contract_opt(config.as_deref(), &opts)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            if !report.ok() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Verify { out } => {
            let report = verify(&out)?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
