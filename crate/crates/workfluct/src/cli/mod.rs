//! Experiment runner behind the `workfluct` binary.

pub mod config;
pub mod experiment;
pub mod output;
pub mod validate;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::{ConfigFile, ExperimentConfig, Preset};
pub use experiment::{
    crooks_pair, fig1, fig2, open_free_energies, pipeline_oracle, ramp, run, run_pipeline, ExperimentResult,
    FreeEnergies, FtReportFile, Pipeline, PipelineReport, PipelineSpec,
};
pub use output::{FileRecord, GuardSummary, Manifest, Staging, MANIFEST_NAME, MANIFEST_SCHEMA_VERSION};
pub use validate::{validate, ConfigDiagnostics};

use crate::error::Error;
use crate::workstats::Window;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_OTHER: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "workfluct", version, about = "Interferometric work-statistics experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its data files and manifest.
    Run(RunArgs),
    /// Print the diagnostics of a config without running it.
    Validate(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Hann,
    Rect,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// JSON config with a flat parameter namespace.
    pub config: PathBuf,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub u_max: Option<f64>,
    #[arg(long)]
    pub du: Option<f64>,
    #[arg(long, value_enum)]
    pub window: Option<WindowArg>,
    #[arg(long, conflicts_with = "diagonal")]
    pub full_rabi: bool,
    #[arg(long)]
    pub diagonal: bool,
}

impl RunArgs {
    /// The command-line flags as a config layer.
    pub fn overrides(&self) -> ConfigFile {
        ConfigFile {
            preset: self.preset.clone(),
            out: self.out.clone(),
            seed: self.seed,
            shots: self.shots,
            u_max: self.u_max,
            du: self.du,
            window: self.window.map(|w| match w {
                WindowArg::Hann => Window::Hann,
                WindowArg::Rect => Window::Rect,
            }),
            full_rabi: match (self.full_rabi, self.diagonal) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            },
            ..ConfigFile::default()
        }
    }

    pub fn resolve(&self) -> crate::Result<ExperimentConfig> {
        ConfigFile::load(&self.config)?.overlay(self.overrides()).resolve()
    }
}

/// Exit code for a failed run.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical_guard() {
        EXIT_NUMERICAL
    } else if matches!(e, Error::Config(_) | Error::InvalidParameter(_) | Error::UnstableDrive { .. } | Error::Grid(_))
    {
        EXIT_CONFIG
    } else {
        EXIT_OTHER
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Validate(args) => {
            let config = match args.resolve() {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let d = validate(&config);
            match serde_json::to_string_pretty(&d) {
                Ok(s) => println!("{s}"),
                Err(e) => return fail(&e.into()),
            }
            if d.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
        Command::Run(args) => {
            let result = args.resolve().and_then(|c| run(&c));
            match result {
                Ok(r) => {
                    for w in &r.manifest.warnings {
                        eprintln!("warning: {w}");
                    }
                    for f in &r.manifest.files {
                        println!("{}", r.manifest.config.out.join(&f.name).display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e))
}
