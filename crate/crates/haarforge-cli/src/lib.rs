//! `haarforge` command line: argument parsing, config loading, seeding and
//! result persistence around the library experiments.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::{canonical, load_config, RunConfig};
use crate::output::{config_hash, tag_row, unix_now, version_string, write_json, write_outputs, Format, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] haarforge::Error),
    /// A check ran to completion and reported failure.
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) => 2,
            Self::Lib(haarforge::Error::Domain(_) | haarforge::Error::Resource(_) | haarforge::Error::Format(_)) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Config(_) => "config",
            Self::Lib(_) => "library",
            Self::Check(_) => "check",
            Self::Io(_) | Self::Csv(_) => "io",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "haarforge", version, about = "Unitary-design experiments with random phased permutations")]
pub struct Cli {
    /// Root seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for records.jsonl, summary.csv and manifest.json.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte-Carlo sample (or pair) count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Parameter grid, e.g. "N=8,16,32;ell=1,2,4,8".
    #[arg(long, global = true)]
    pub grid: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// JSON config file (keys N, m, ell, k, theta, seed, samples, suite).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Ensemble overrides; unset fields fall back to the config file, then defaults.
#[derive(Args, Debug, Clone, Default, Serialize)]
pub struct EnsembleArgs {
    #[arg(long = "n", visible_alias = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagramCheck {
    Mult,
    Mobius,
    Rank,
    Projector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    Haar,
    Ginibre,
    V,
    Phased,
    Permutation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SuiteArg {
    #[value(name = "classic")]
    Classic,
    #[value(name = "largeN")]
    LargeN,
    #[value(name = "poles")]
    Poles,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Smallest positive root θ_m of the Kesten–McKay characteristic function.
    Theta {
        #[arg(long, default_value_t = 2)]
        m: u64,
    },
    /// Word expansion of the truncated exponential and its weight statistics.
    ExpandWords {
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 8)]
        d: usize,
    },
    /// Exact partition-algebra checks.
    Diagram {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long = "n", visible_alias = "N", default_value_t = 5)]
        n: usize,
        #[arg(long, value_enum)]
        check: DiagramCheck,
    },
    /// Moment operator of an ensemble against the exact Haar and Ginibre references.
    Moments {
        #[arg(long, value_enum, default_value_t = Ensemble::V)]
        ensemble: Ensemble,
        /// Exact reference operators only (haar or ginibre), no sampling.
        #[arg(long)]
        exact: bool,
        #[command(flatten)]
        params: EnsembleArgs,
    },
    /// E|tr(U†V)|^{2k} over independent pairs.
    FramePotential {
        #[arg(long, value_enum, default_value_t = Ensemble::V)]
        ensemble: Ensemble,
        #[command(flatten)]
        params: EnsembleArgs,
    },
    /// TV distance of word images from independent uniform images (grid key N).
    Freeness {
        /// Comma-separated words, e.g. "1,2,2.1".
        #[arg(long, default_value = "1,2,2.1")]
        words: String,
    },
    /// Distance of Σ w_j Z_j to the Ginibre moment (grid keys N, m).
    Lindeberg {
        /// Explicit comma-separated weights; otherwise equal weights per grid m.
        #[arg(long, allow_hyphen_values = true)]
        weights: Option<String>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Distance of V to Haar over a grid (keys N, m, ell) with trend checks.
    DesignReport {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
    },
    /// Randomized sweeps of the Markov-type inequalities.
    Markov {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 500)]
        trials: usize,
    },
    /// Fast invariant checks.
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Theta { .. } => "theta",
            Self::ExpandWords { .. } => "expand-words",
            Self::Diagram { .. } => "diagram",
            Self::Moments { .. } => "moments",
            Self::FramePotential { .. } => "frame-potential",
            Self::Freeness { .. } => "freeness",
            Self::Lindeberg { .. } => "lindeberg",
            Self::DesignReport { .. } => "design-report",
            Self::Markov { .. } => "markov",
            Self::Selftest => "selftest",
        }
    }
}

/// Parsed invocation with the config file merged in.
pub struct Invocation {
    pub cli: Cli,
    pub config: RunConfig,
    pub seed: u64,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("HAARFORGE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("HAARFORGE_THREADS must be a positive integer, got '{v}'")))?;
        // Fails only if a pool already exists (repeated in-process runs); keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn execute(argv: &[OsString], started: f64) -> Result<(), CliError> {
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Usage(String::new()),
        _ => CliError::Usage(e.to_string()),
    })?;
    configure_threads()?;
    let config = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(config.ensemble.seed);
    let inv = Invocation { cli, config, seed };
    let hash_input = json!({
        "command": canonical(&inv.cli.command),
        "config": canonical(&inv.config),
        "seed": inv.seed,
        "samples": inv.cli.samples,
        "grid": inv.cli.grid,
    });
    let hash = config_hash(&hash_input);
    let outcome = commands::dispatch(&inv);
    let (records, failure) = match outcome {
        Ok(o) => (o.records, o.failure),
        Err(e) => return Err(e),
    };
    for r in &records {
        println!("{}", tag_row(r, &hash, seed));
    }
    let mut outputs = Vec::new();
    if let Some(dir) = &inv.cli.out {
        outputs = write_outputs(dir, inv.cli.format, &records, &hash, seed)?;
    }
    let mut manifest = RunManifest {
        command_line: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        config_hash: hash,
        seed,
        version: version_string(),
        started_unix: started,
        finished_unix: unix_now(),
        outputs,
    };
    if let Some(dir) = &inv.cli.out {
        let path = dir.join("manifest.json");
        manifest.outputs.push(path.clone());
        write_json(&path, &manifest)?;
    }
    eprintln!("{}", serde_json::to_string_pretty(&manifest).unwrap_or_default());
    match failure {
        Some(msg) => Err(CliError::Check(msg)),
        None => Ok(()),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let started = unix_now();
    match execute(&argv, started) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) if msg.is_empty() => {
            // --help / --version
            let _ = Cli::try_parse_from(&argv).map_err(|e| e.print());
            0
        }
        Err(e) => {
            let diag = json!({"error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()});
            eprintln!("{diag}");
            if let Some(dir) = out_dir(&argv) {
                let _ = std::fs::create_dir_all(&dir).and_then(|_| {
                    std::fs::write(dir.join("diagnostic.json"), format!("{diag}\n"))
                });
            }
            e.exit_code()
        }
    }
}

fn out_dir(argv: &[OsString]) -> Option<PathBuf> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    args.iter().enumerate().find_map(|(i, a)| {
        if a == "--out" {
            args.get(i + 1).map(PathBuf::from)
        } else {
            a.strip_prefix("--out=").map(PathBuf::from)
        }
    })
}
