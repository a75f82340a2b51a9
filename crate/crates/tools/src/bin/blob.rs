use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use blob_core::scheme::ControlForm;
use blob_tools::commands::{self, AttackArgs, StrategyArg, SweepArgs, ThresholdArg};
use blob_tools::error::{CliError, Result};
use blob_tools::profile::{self, ModeArg, Profile};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

const ZERO_SEED: &str = "00000000000000000000000000000000";

/// Traceable big-key blob schemes: deployments, protocol runs, collusion
/// attacks, tracing and figure data.
#[derive(Debug, Parser)]
#[command(name = "blob", version)]
struct Cli {
    /// Parameter profile used when no params file is given.
    #[arg(long, global = true, value_enum, default_value = "desk")]
    profile: Profile,
    /// JSON parameter set; overrides the profile.
    #[arg(long, global = true)]
    params_file: Option<PathBuf>,
    /// Overrides the mode of the profile or params file.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Root seed, 32 hex digits.
    #[arg(long, global = true, default_value = ZERO_SEED)]
    seed: String,
    /// Deployment and output directory.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ControlArg {
    Explicit,
    Seeded,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a deployment: operator state and one blob file per user.
    Init {
        /// How control messages describe their indices.
        #[arg(long, value_enum, default_value = "explicit")]
        control: ControlArg,
    },
    /// Run encrypt/decrypt rounds, checking every user.
    Run {
        #[arg(long, default_value_t = 1)]
        rounds: u64,
    },
    /// Build a pirate blob from a coalition's blob files.
    Attack {
        /// Colluding user ids, e.g. "1,5,9".
        #[arg(long)]
        coalition: String,
        /// Erasure fraction; defaults to the untraceability threshold + 0.01.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum, default_value = "uniform")]
        strategy: StrategyArg,
        /// Fresh keys drawn to estimate next-key failure.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Accuse users from a pirate blob.
    Trace {
        /// Defaults to pirate.blob in the output directory.
        #[arg(long)]
        pirate: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "calibrated")]
        threshold: ThresholdArg,
    },
    /// Write the figure CSV files.
    Figures,
    /// Check the pay-TV parameter table.
    Table1,
    /// Attack and trace fresh deployments over a grid of erasure fractions.
    Sweep {
        /// Comma-separated erasure fractions.
        #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5")]
        epsilon: String,
        #[arg(long, default_value_t = 20)]
        trials: u32,
        /// Coalition size.
        #[arg(long, default_value_t = 4)]
        colluders: u32,
        /// Rounds broadcast before the attack.
        #[arg(long, default_value_t = 0)]
        uses: u64,
        #[arg(long, value_enum, default_value = "uniform")]
        strategy: StrategyArg,
        #[arg(long, value_enum, default_value = "calibrated")]
        threshold: ThresholdArg,
        #[arg(long, default_value_t = 200)]
        failure_trials: u64,
    },
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::Io(format!("stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    emit(&serde_json::to_string_pretty(value).expect("serialisable"))
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("BLOB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("BLOB_THREADS={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    let seed = commands::parse_seed(&cli.seed)?;
    let dir = cli.out_dir.as_path();
    let params = || profile::resolve(cli.profile, cli.params_file.as_deref(), cli.mode);
    match cli.command {
        Command::Init { control } => {
            let form = match control {
                ControlArg::Explicit => ControlForm::Explicit,
                ControlArg::Seeded => ControlForm::Seeded,
            };
            print(&commands::init(dir, &params()?, &seed, form)?)
        }
        Command::Run { rounds } => print(&commands::run(dir, &seed, rounds)?),
        Command::Attack {
            coalition,
            epsilon,
            strategy,
            trials,
        } => {
            let args = AttackArgs {
                coalition: commands::parse_coalition(&coalition)?,
                epsilon,
                strategy,
                trials,
            };
            print(&commands::attack(dir, &seed, &args)?)
        }
        Command::Trace { pirate, threshold } => {
            let pirate = pirate.unwrap_or_else(|| dir.join(commands::PIRATE));
            print(&commands::trace(dir, &seed, &pirate, threshold)?)
        }
        Command::Figures => print(&commands::figures(dir)?),
        Command::Table1 => print(&commands::table1(dir)?),
        Command::Sweep {
            epsilon,
            trials,
            colluders,
            uses,
            strategy,
            threshold,
            failure_trials,
        } => {
            let args = SweepArgs {
                epsilons: commands::parse_epsilons(&epsilon)?,
                trials,
                colluders,
                uses,
                strategy,
                threshold,
                failure_trials,
            };
            let records = commands::sweep(dir, &params()?, &seed, &args)?;
            records
                .iter()
                .try_for_each(|r| emit(&serde_json::to_string(r).expect("serialisable")))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
