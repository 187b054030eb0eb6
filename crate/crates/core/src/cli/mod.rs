//! The `qst` command-line driver.
//!
//! Exit codes: 0 success, 1 a verification failed, 2 bad configuration,
//! 3 numerical failure, 4 I/O failure.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

use crate::error::QstError;
use config::{CommandName, RunConfig};
use output::Outputs;

/// Environment variable consulted for the output directory when neither the
/// flag nor the config names one.
pub const OUTPUT_DIR_ENV: &str = "QST_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{summary}")]
    Failed { summary: String, details: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<QstError> for CliError {
    fn from(e: QstError) -> Self {
        match e {
            QstError::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qst", version, about = "Mirror-symmetric spin chain state transfer")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: CommandName,
    /// JSON config file layered over the command defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dotted override such as `chain.n_sites=6`; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Directory for report files.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

impl Cli {
    /// Flag, then config, then environment, then the working directory.
    fn output_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn execute(&self) -> Result<String, CliError> {
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?),
            None => None,
        };
        let cfg = RunConfig::resolve(self.command, text.as_deref(), &self.overrides)?;
        if self.print_config {
            let bytes = output::json_bytes(&cfg)?;
            return Ok(String::from_utf8_lossy(&bytes).trim_end().to_string());
        }
        let mut out = Outputs::new(self.output_dir(&cfg), cfg.stem());
        commands::execute(&cfg, &mut out)
    }
}

/// Parse `args` (program name first), run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.execute() {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            if let CliError::Failed { summary, details } = &e {
                println!("{summary}");
                eprintln!("{details}");
            } else {
                eprintln!("qst: {e}");
            }
            e.exit_code()
        }
    }
}
