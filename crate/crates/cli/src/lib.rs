//! Command-line front end for the factor research engine.
//!
//! `basislab <verb>` with global flags `--data`, `--schema`, `--catalog`,
//! `--out`, `--config` and `--seed`. A config file supplies the long tail
//! of settings as flat `key = value` lines; flags win over the file. Exit
//! codes: 0 success, 1 domain failure (bad data, bad factor, insufficient
//! observations), 2 environment failure (unreadable or unwritable files,
//! bad usage).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod render;

use commands::{CliError, VerbOutput};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "basislab", version, about = "Factor research over daily futures panels")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
    /// Panel CSV to read.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Column-header mapping file (field = header per line).
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Factor catalog file, or `builtin` for the shipped set.
    #[arg(long, global = true)]
    pub catalog: Option<String>,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Config file with flat `key = value` settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for synthetic data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Verb {
    /// Check a panel file and print the validation report.
    Validate,
    /// Generate a seeded synthetic panel.
    Synth,
    /// Print the built-in factor catalog in loadable form.
    DumpBuiltins,
    /// Per-factor information coefficients.
    Ic,
    /// Single-factor decile backtests.
    Backtest,
    /// The composite grid: every polarity strategy by every trade mode.
    Multi,
    /// Fit the instrumented-PCA benchmark and price every factor portfolio.
    Ipca,
}

/// Builds the effective configuration: defaults, then the config file,
/// then flags.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Env(format!("{}: {e}", path.display())))?;
        config
            .apply_document(&text)
            .map_err(|e| CliError::Domain(format!("config {}: {e}", path.display())))?;
    }
    if let Some(data) = &cli.data {
        config.data = Some(data.clone());
    }
    if let Some(schema) = &cli.schema {
        config.schema = Some(schema.clone());
    }
    if let Some(catalog) = &cli.catalog {
        config.catalog = Some(catalog.clone());
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.check_ranges().map_err(CliError::Domain)?;
    Ok(config)
}

/// Writes through a sibling temp file and renames into place, so a
/// concurrent reader never sees a half-written table.
pub fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Env(format!("{}: {e}", parent.display())))?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Env(format!("{}: not a file path", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, content).map_err(|e| CliError::Env(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| CliError::Env(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn dispatch(verb: Verb, config: &RunConfig) -> Result<VerbOutput, CliError> {
    match verb {
        Verb::Validate => commands::cmd_validate(config),
        Verb::Synth => commands::cmd_synth(config),
        Verb::DumpBuiltins => commands::cmd_dump_builtins(config),
        Verb::Ic => commands::cmd_ic(config),
        Verb::Backtest => commands::cmd_backtest(config),
        Verb::Multi => commands::cmd_multi(config),
        Verb::Ipca => commands::cmd_ipca(config),
    }
}

/// Full run for `main`: parse, dispatch, write files, report. Returns the
/// process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, not usage errors.
            let _ = e.print();
            return if e.exit_code() == 0 { 0 } else { 2 };
        }
    };
    let outcome = effective_config(&cli).and_then(|config| {
        let output = dispatch(cli.verb, &config)?;
        for (path, content) in &output.files {
            write_atomic(path, content)?;
        }
        Ok(output)
    });
    match outcome {
        Ok(output) => {
            print!("{}", output.stdout);
            output.status
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
