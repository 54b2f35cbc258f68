//! Batch front end for the sskcw laboratory. Subcommands compute analytic
//! predictions, run disorder experiments, and emit plot-ready tables.
//! Every run writes a manifest echoing its fully resolved configuration;
//! rerunning with that manifest as --config reproduces the run.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod kde;

use config::ConfigFile;

const ENV_PREFIX_DOC: &str = "Environment overrides: SSKCW_CONFIG, SSKCW_SEED, SSKCW_WORKERS, \
SSKCW_OUT, SSKCW_FORMAT. Precedence: flag, then environment, then config file, then default.";

#[derive(Parser)]
#[command(name = "sskcw", version, about = "Simulation laboratory for a spherical spin glass with a ferromagnetic bias, at its transition window", after_help = ENV_PREFIX_DOC)]
struct Cli {
    /// Config file with one [section] per subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for experiment trials
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format for tabular outputs
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn parse_str(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Analytic predictions for the transition window, as JSON
    Predict(commands::predict::Args),
    /// Run disorder trials and the requested statistical checks
    Experiment(commands::experiment::Args),
    /// Kernel density curves of the limiting free-energy functional
    Density(commands::density::Args),
    /// Phase diagram grid of the limiting free energy
    Phase(commands::phase::Args),
    /// Small-system cross-checks of the partition function pipeline
    Oracle(commands::oracle::Args),
}

/// Failures split by exit code: usage and config problems exit 2, hard
/// invariant violations at run time exit 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Hard(String),
}

impl Failure {
    fn exit(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Hard(_) => ExitCode::from(1),
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Hard(m) => m,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn hard(msg: impl Into<String>) -> Failure {
    Failure::Hard(msg.into())
}

/// Resolved global options plus the loaded config file.
pub struct Ctx {
    pub config: ConfigFile,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub format: Format,
}

impl Ctx {
    pub fn write_file(&self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        let path = self.out.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| hard(format!("writing {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    /// Manifest with the command's fully resolved parameters; reusable as
    /// a config file.
    pub fn write_manifest(
        &self,
        command: &str,
        params: &BTreeMap<String, String>,
    ) -> Result<(), Failure> {
        let mut globals = BTreeMap::new();
        globals.insert("format".to_string(), self.format.name().to_string());
        globals.insert("out".to_string(), self.out.display().to_string());
        self.write_file("manifest.txt", &config::manifest_text(command, &globals, params))?;
        Ok(())
    }
}

fn env_parse<T: FromStr>(name: &str) -> Result<Option<T>, Failure> {
    match std::env::var(name) {
        Err(_) => Ok(None),
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("environment {name}: could not parse {v:?}"))),
    }
}

fn build_ctx(cli: &Cli) -> Result<Ctx, Failure> {
    let config_path = match &cli.config {
        Some(p) => Some(p.clone()),
        None => env_parse::<PathBuf>("SSKCW_CONFIG")?,
    };
    let config = match &config_path {
        Some(p) => ConfigFile::load(p).map_err(usage)?,
        None => ConfigFile::empty(),
    };
    let globals = config.globals();
    let seed = match cli.seed {
        Some(s) => Some(s),
        None => match env_parse::<u64>("SSKCW_SEED")? {
            Some(s) => Some(s),
            None => globals.u64("seed").map_err(usage)?,
        },
    };
    let workers = match cli.workers {
        Some(w) => Some(w),
        None => match env_parse::<usize>("SSKCW_WORKERS")? {
            Some(w) => Some(w),
            None => globals.usize("workers").map_err(usage)?,
        },
    };
    let out = match &cli.out {
        Some(p) => p.clone(),
        None => match env_parse::<PathBuf>("SSKCW_OUT")? {
            Some(p) => p,
            None => PathBuf::from(globals.string("out").unwrap_or_else(|| "sskcw_out".to_string())),
        },
    };
    let format = match cli.format {
        Some(f) => f,
        None => {
            let from_env = match std::env::var("SSKCW_FORMAT") {
                Err(_) => None,
                Ok(v) => Some(
                    Format::parse_str(&v)
                        .ok_or_else(|| usage(format!("environment SSKCW_FORMAT: expected csv or json, found {v:?}")))?,
                ),
            };
            match from_env {
                Some(f) => f,
                None => match globals.string("format") {
                    None => Format::Csv,
                    Some(v) => Format::parse_str(&v)
                        .ok_or_else(|| usage(format!("config format: expected csv or json, found {v:?}")))?,
                },
            }
        }
    };
    std::fs::create_dir_all(&out).map_err(|e| hard(format!("creating {}: {e}", out.display())))?;
    Ok(Ctx { config, seed, workers, out, format })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap exits 0 for --help/--version and 2 for usage errors
        Err(e) => e.exit(),
    };
    let ctx = match build_ctx(&cli) {
        Ok(ctx) => ctx,
        Err(f) => {
            eprintln!("error: {}", f.message());
            return f.exit();
        }
    };
    let result = match &cli.command {
        Cmd::Predict(args) => commands::predict::run(&ctx, args),
        Cmd::Experiment(args) => commands::experiment::run(&ctx, args),
        Cmd::Density(args) => commands::density::run(&ctx, args),
        Cmd::Phase(args) => commands::phase::run(&ctx, args),
        Cmd::Oracle(args) => commands::oracle::run(&ctx, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit()
        }
    }
}
