use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vcanon::commands;
use vcanon::config::{Overrides, RunConfig};
use vcanon::Error;

/// Speech anonymization by voice conversion, and linkage attacks against it.
///
/// Log verbosity follows the VCANON_LOG environment variable (error, warn, info, debug).
#[derive(Parser)]
#[command(name = "vcanon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the configured corpus into <out>/corpus.
    Generate(Common),
    /// Draw the target pool and train its speaker models.
    TrainModels(Common),
    /// Convert the trial set and store the secret assignment table.
    Anonymize(Common),
    /// Run the configured attackers against the anonymized trials.
    Attack(Common),
    /// Render histograms and a summary for a results directory.
    Report {
        /// Results directory; defaults to <out>/results of the config.
        results: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let mut config = RunConfig::load(&common.config)?;
    config.apply(&Overrides { seed: common.seed, out: common.out.clone() });
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(c) => {
            let path = commands::generate(&load(&c)?)?;
            println!("{}", path.display());
        }
        Command::TrainModels(c) => {
            let config = load(&c)?;
            let (pool, _) = commands::train_target_models(&config)?;
            println!("trained {} target models into {}", pool.len(), config.layout()?.target_models().display());
        }
        Command::Anonymize(c) => {
            let config = load(&c)?;
            let converted = commands::anonymize_trials(&config)?;
            println!(
                "converted {} utterances into {}",
                converted.utterances.len(),
                config.layout()?.anonymized_dir().display()
            );
        }
        Command::Attack(c) => {
            let grid = commands::attack(&load(&c)?)?;
            print!("{}", grid.to_text_table());
            for cell in &grid.cells {
                if let Err(e) = &cell.outcome {
                    eprintln!("{}: {e}", cell.attacker);
                }
            }
        }
        Command::Report { results, config, out } => {
            let dir = match (results, config) {
                (Some(dir), _) => dir,
                (None, Some(path)) => {
                    let mut config = RunConfig::load(&path)?;
                    config.apply(&Overrides { seed: None, out });
                    config.layout()?.results_dir()
                }
                (None, None) => return Err(Error::Config("report needs a results directory or --config".into())),
            };
            print!("{}", commands::report(&dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VCANON_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
