use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use duopoly_contract::config::{ExperimentConfig, OutputFormat};
use duopoly_contract::report::{cmd_collusion_check, cmd_equilibrium, cmd_simulate, cmd_sweep_to};
use duopoly_contract::Error;

#[derive(Parser)]
#[command(version, about = "Contracts, collusion and detection for two agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory; defaults to `output.dir` or the current directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Optimal contract, Cournot efforts and oracle cross-checks.
    Equilibrium,
    /// Whether colluding beats the Cournot equilibrium.
    CollusionCheck,
    /// Repeated game under the dynamic contract.
    Simulate,
    /// Parameter sweep from the `[sweep]` section.
    Sweep,
}

fn run(cli: Cli) -> Result<(), Error> {
    let path = cli
        .config
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    let format = cli.format.unwrap_or(cfg.output.format);
    let out = cli
        .out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let print = |value: serde_json::Value| {
        println!(
            "{}",
            serde_json::to_string_pretty(&value).expect("plain json")
        )
    };
    match cli.command {
        Command::Equilibrium => {
            print(serde_json::to_value(cmd_equilibrium(&cfg)?).expect("plain json"))
        }
        Command::CollusionCheck => {
            print(serde_json::to_value(cmd_collusion_check(&cfg)?).expect("plain json"))
        }
        Command::Simulate => {
            let (summary, files) = cmd_simulate(&cfg, &out, format)?;
            eprintln!(
                "wrote {} and {}",
                files.trace.display(),
                files.summary.display()
            );
            println!(
                "seed {} trials {} punished {:.4} first-window {:.4} averages {:?}",
                summary.seed,
                summary.trials,
                summary.punished_fraction,
                summary.first_window_detection_fraction,
                summary.mean_average_utilities
            );
        }
        Command::Sweep => {
            let (table, file) = cmd_sweep_to(&cfg, &out, format)?;
            eprintln!("wrote {} ({} rows)", file.display(), table.rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
