//! The `kamcert` command line: constants, certify, iterate and geometry workflows.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use kamcert_core::KamError;

pub use config::{GeometryTask, Mode, RunConfig, SystemSpec, Workflow};

/// Every error maps to exit code 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(KamError),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<KamError> for CliError {
    fn from(e: KamError) -> Self {
        CliError::Core(e)
    }
}

/// What a command produced: exit code 0 (bound / success) or 2 (not applicable), the text
/// for stdout and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub files: Vec<PathBuf>,
}

#[derive(Parser, Debug)]
#[command(name = "kamcert", version, about = "Explicit KAM constants, measure bounds and a numerical KAM iteration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in configuration: pendulum2d, ball-domain or box-domain.
    #[arg(long, global = true, conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(long, global = true)]
    pub markdown: bool,
    /// Directory for report files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the constants ledger.
    Constants {
        #[arg(long = "d")]
        d: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Check the smallness conditions and bound the measure of the complement of the Kolmogorov set.
    Certify {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long = "d")]
        d: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Run the KAM iteration and check the resulting torus.
    Iterate,
    /// Coverings, tube volumes and the quantitative inverse.
    Geometry {
        #[arg(value_enum)]
        op: GeometryOp,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GeometryOp {
    Cover,
    Tube,
    Invert,
}

pub const PRESETS: [(&str, &str); 3] = [
    ("pendulum2d", include_str!("../presets/pendulum2d.json")),
    ("ball-domain", include_str!("../presets/ball-domain.json")),
    ("box-domain", include_str!("../presets/box-domain.json")),
];

pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::Usage(format!("unknown preset {name:?}")))?;
    RunConfig::parse(text)
}

/// Loads the configuration, applies command-line overrides, normalizes it and runs the command.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let workflow = match cli.command {
        Command::Constants { .. } => Workflow::Constants,
        Command::Certify { .. } => Workflow::Certify,
        Command::Iterate => Workflow::Iterate,
        Command::Geometry { .. } => Workflow::Geometry,
    };
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => RunConfig::new(workflow),
    };
    cfg.workflow = workflow;
    match cli.command {
        Command::Constants { d, tau } | Command::Certify { d, tau, .. } => {
            if d.is_some() {
                cfg.d = d;
            }
            if let Some(t) = tau {
                cfg.tau = t;
            }
        }
        _ => {}
    }
    if let Command::Certify { mode: Some(m), .. } = cli.command {
        cfg.mode = m;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.json |= cli.json;
    cfg.markdown |= cli.markdown;
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.display().to_string());
    }
    let cfg = cfg.normalize()?;
    match cli.command {
        Command::Constants { .. } => commands::constants(&cfg),
        Command::Certify { .. } => commands::certify(&cfg),
        Command::Iterate => commands::iterate(&cfg),
        Command::Geometry { op } => commands::geometry(&cfg, op),
    }
}
