//! `skewgof`: sample, fit and test multivariate skewed distributions.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure
//! (including a failed oracle check).

mod commands;
mod config;
mod data;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skewgof::gof::{Mode, Shape};
use skewgof::KernelSpec;

use crate::commands::{GofOptions, Lambda0, Settings};
use crate::config::{json_arg, parse_family, ConfigFile};
use crate::data::ReadOptions;
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "skewgof", version = skewgof::VERSION, about = "Characteristic-function goodness-of-fit tests")]
struct Cli {
    /// Master seed of every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Weight kernel: gaussian, stable:<b> or genlaplace:<b>.
    #[arg(long, global = true)]
    kernel: Option<String>,
    /// Output file (sample, fit, gof, oracle-check) or directory (study).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Columns to use, by header name or 1-based position.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    /// Keep only rows with COLUMN equal to VALUE.
    #[arg(long, value_name = "COLUMN=VALUE")]
    filter: Option<String>,
    /// Skip rows with missing values instead of failing.
    #[arg(long)]
    drop_missing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a sample from a parameter set given as JSON (inline or a file).
    Sample {
        #[arg(long)]
        spec: String,
        #[arg(short, long)]
        n: usize,
    },
    /// Maximum-likelihood (or projection, for stable laws) fit of a CSV file.
    Fit {
        input: PathBuf,
        #[arg(long)]
        family: Option<String>,
        /// TOML file with [global] and [gof] keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Goodness-of-fit test of a CSV file.
    Gof {
        input: PathBuf,
        #[arg(long)]
        family: Option<String>,
        /// composite (parametric bootstrap) or simple (fixed shape).
        #[arg(long)]
        mode: Option<String>,
        /// Fixed shape for the simple mode, as JSON, e.g. {"family":"sl","alpha_star":3}.
        #[arg(long)]
        lambda0: Option<String>,
        /// Null sample size; defaults to max(n, 1000).
        #[arg(short, long)]
        m: Option<usize>,
        /// Bootstrap replications B of the composite test.
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Monte Carlo replications M for the simple-mode critical value.
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        /// TOML file with [global], [gof] and [lambda0] keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run a simulation study described by a TOML file.
    Study { config: PathBuf },
    /// Check the statistic against numerical integration and the samplers
    /// against their characteristic functions.
    OracleCheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, default_value_t = 100_000)]
        n_sim: usize,
    },
}

fn settings(cli: &Cli, file: &ConfigFile) -> CliResult<Settings> {
    let kernel = match cli.kernel.as_ref().or(file.global.kernel.as_ref()) {
        Some(k) => k.parse::<KernelSpec>().map_err(|e| CliError::Usage(e.to_string()))?,
        None => KernelSpec::Gaussian,
    };
    let threads = cli.threads.or(file.global.threads).unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(Settings {
        seed: cli.seed.or(file.global.seed).unwrap_or(0),
        kernel,
        out: cli.out.clone().or_else(|| file.global.out.as_ref().map(|p| file.resolve(p))),
    })
}

fn read_options(args: &DataArgs, file: &ConfigFile) -> CliResult<ReadOptions> {
    let columns = if args.columns.is_empty() {
        file.gof.columns.clone().unwrap_or_default()
    } else {
        args.columns.clone()
    };
    let filter = match args.filter.as_ref().or(file.gof.filter.as_ref()) {
        Some(f) => {
            let (c, v) = f
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--filter expects COLUMN=VALUE, got '{f}'")))?;
            Some((c.trim().to_string(), v.trim().to_string()))
        }
        None => None,
    };
    Ok(ReadOptions {
        columns,
        filter,
        drop_missing: args.drop_missing || file.gof.drop_missing.unwrap_or(false),
    })
}

fn load(config: &Option<PathBuf>) -> CliResult<ConfigFile> {
    config.as_deref().map_or_else(|| Ok(ConfigFile::default()), ConfigFile::load)
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match &cli.command {
        Command::Sample { spec, n } => {
            let s = settings(&cli, &ConfigFile::default())?;
            commands::cmd_sample(&s, spec, *n)?;
        }
        Command::Fit {
            input,
            family,
            config,
            data,
        } => {
            let file = load(config)?;
            let s = settings(&cli, &file)?;
            let family = family
                .as_ref()
                .or(file.gof.family.as_ref())
                .ok_or_else(|| CliError::Usage("--family is required".into()))?;
            commands::cmd_fit(&s, input, parse_family(family)?, &read_options(data, &file)?)?;
        }
        Command::Gof {
            input,
            family,
            mode,
            lambda0,
            m,
            bootstrap,
            replications,
            delta,
            config,
            data,
        } => {
            let file = load(config)?;
            let s = settings(&cli, &file)?;
            let family = parse_family(
                family
                    .as_ref()
                    .or(file.gof.family.as_ref())
                    .ok_or_else(|| CliError::Usage("--family is required".into()))?,
            )?;
            let mode = match mode.as_deref().or(file.gof.mode.as_deref()).unwrap_or("composite") {
                "composite" => Mode::Composite,
                "simple" => Mode::Simple,
                other => return Err(CliError::Usage(format!("--mode must be composite or simple, got '{other}'"))),
            };
            let lambda0 = match (lambda0, &file.lambda0) {
                (Some(j), _) => Some(Lambda0::Shape(json_arg::<Shape>(j, "lambda0")?)),
                (None, Some(keys)) => Some(Lambda0::Keys(keys.clone())),
                (None, None) => None,
            };
            if mode == Mode::Simple && lambda0.is_none() {
                return Err(CliError::Usage("--mode simple needs --lambda0".into()));
            }
            let opts = GofOptions {
                family,
                mode,
                lambda0,
                m: m.or(file.gof.m),
                bootstrap: bootstrap.or(file.gof.bootstrap).unwrap_or(1000),
                replications: replications.or(file.gof.replications).unwrap_or(1000),
                delta: delta.or(file.gof.delta).unwrap_or(0.05),
            };
            commands::cmd_gof(&s, input, &opts, &read_options(data, &file)?)?;
        }
        Command::Study { config } => {
            let file = ConfigFile::load(config)?;
            let s = settings(&cli, &file)?;
            commands::cmd_study(&s, &file)?;
        }
        Command::OracleCheck {
            instances,
            draws,
            n_sim,
        } => {
            let s = settings(&cli, &ConfigFile::default())?;
            if !commands::cmd_oracle_check(&s, *instances, *draws, *n_sim)? {
                return Ok(ExitCode::from(4));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("skewgof: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
