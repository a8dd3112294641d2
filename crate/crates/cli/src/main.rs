//! `lrdetect` — pipeline front end for load-redistribution attack
//! detection experiments: synthesize or ingest load histories, build load
//! groups, calibrate the grouped nearest-neighbor detector, generate
//! attacks, evaluate ROC/sensitivity tables, and fit the localization
//! model.
//!
//! Every failure prints one JSON line on stderr. Exit codes: 0 success,
//! 1 usage or configuration error, 2 data or validation error,
//! 3 infeasibility.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "lrdetect", version, about = "Load-redistribution attack detection toolkit")]
struct Cli {
    /// Run configuration (JSON). Required by every command except when all
    /// needed values come from flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override: replaces the history, fold, attack, and split seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single threshold multiplier override.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Case file override (MATPOWER .m or toolkit .json).
    #[arg(long, global = true)]
    case: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a case, print a summary.
    CaseInfo,
    /// Generate the synthetic hourly history configured in the run file.
    SynthesizeHistory,
    /// Rank loads and build the radius-based groups.
    MakeGroups,
    /// Calibrate per-group thresholds on fold 0 of the rotation.
    Calibrate,
    /// Classify one load vector (CSV) against the calibrated model.
    Detect {
        /// Vector CSV: `load_1,...,load_n` header plus one row (an `hour`
        /// column is tolerated).
        #[arg(long)]
        vector: PathBuf,
        /// Detector model path (default: `<out>/detector_model.json`).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Generate random or targeted attack records.
    GenAttacks,
    /// Run the k-fold harness and write ROC and sensitivity tables.
    Evaluate,
    /// Fit the localization model and score the three likelihood schemes.
    Localize,
}

fn load_config(cli: &Cli) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?
        }
        None => {
            let case = cli.case.as_ref().ok_or_else(|| {
                CliError::Config("either --config or --case is required".into())
            })?;
            serde_json::from_value(serde_json::json!({
                "case_path": case.display().to_string()
            }))
            .map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    if let Some(case) = &cli.case {
        cfg.case_path = case.display().to_string();
    }
    cfg.apply_overrides(
        cli.out.as_ref().map(|p| p.display().to_string()),
        cli.seed,
        cli.alpha,
    );
    Ok((cfg, cli.config.clone()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cfg, config_path) = load_config(&cli)?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    let ctx = Ctx { cfg, config_path, out_dir };
    match &cli.command {
        Command::CaseInfo => commands::cmd_case_info(&ctx),
        Command::SynthesizeHistory => commands::cmd_synthesize_history(&ctx),
        Command::MakeGroups => commands::cmd_make_groups(&ctx),
        Command::Calibrate => commands::cmd_calibrate(&ctx),
        Command::Detect { vector, model } => commands::cmd_detect(&ctx, model.clone(), vector),
        Command::GenAttacks => commands::cmd_gen_attacks(&ctx),
        Command::Evaluate => commands::cmd_evaluate(&ctx),
        Command::Localize => commands::cmd_localize(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let err = CliError::Config(e.to_string());
            eprintln!("{}", err.to_json_line());
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json_line());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
