//! Command-line front end for `fdensity`.
//!
//! Settings merge in the order built-in defaults, then a TOML file given
//! with `--config`, then command-line flags.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::Config;
use error::{CliResult, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "fdensity", version, about = "Density surrogates and small-ball diagnostics for curve samples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Principal components of a curve file: model.json and scores.csv.
    Fpca {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full analysis of a curve file.
    Analyze {
        input: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of density groups.
        #[arg(long)]
        groups: Option<usize>,
        /// Points per axis of the score-plane grid.
        #[arg(long)]
        contour_points: Option<usize>,
    },
    /// Small-ball probabilities against their product approximation.
    Smallball {
        #[command(flatten)]
        common: CommonArgs,
        /// power:<a>, geometric:<rho>, gaussian:<c> or explicit:<t1>,<t2>,...
        #[arg(long)]
        decay: Option<String>,
        /// Number of retained eigenvalues.
        #[arg(long)]
        jmax: Option<usize>,
        /// gaussian, uniform or chisq:<k>.
        #[arg(long)]
        law: Option<String>,
        /// Center coordinates, zero-padded.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Option<Vec<f64>>,
        /// Comma-separated radii; may be empty.
        #[arg(long, allow_hyphen_values = true)]
        radii: Option<String>,
        /// exponential, superexponential or bracket.
        #[arg(long)]
        regime: Option<String>,
    },
    /// Draw a sample from one of the generative models.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Integrated squared error of modal-curve estimators.
    ModeStudy {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        truncations: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
    },
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML file with default settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of principal components to compute.
    #[arg(long)]
    pub components: Option<usize>,
    /// Resolutions for the log-density surrogate.
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<usize>>,
    /// Components used by the modal curve.
    #[arg(long)]
    pub truncation: Option<usize>,
    /// gaussian or epanechnikov.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Fixed bandwidth instead of the normal-reference rule.
    #[arg(long, allow_hyphen_values = true)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self, flags: Config) -> CliResult<Config> {
        let base = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let top = Config {
            components: self.components,
            r: self.r.clone(),
            truncation: self.truncation,
            kernel: self.kernel.clone(),
            bandwidth: self.bandwidth,
            seed: self.seed,
            mc_samples: self.mc_samples,
            lambda: self.lambda,
            out: self.out.clone(),
            ..flags
        };
        Ok(base.overlay(top))
    }
}

fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| error::CliError::input(format!("cannot parse radius '{t}'"))))
        .collect()
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fpca { input, common } => {
            let cfg = common.resolve(Config::default())?;
            report(&commands::run_fpca(&input, &cfg)?);
        }
        Command::Analyze { input, common, groups, contour_points } => {
            let cfg = common.resolve(Config { groups, contour_points, ..Config::default() })?;
            report(&commands::run_analysis(&input, &cfg)?);
        }
        Command::Smallball { common, decay, jmax, law, center, radii, regime } => {
            let radii = radii.as_deref().map(parse_list).transpose()?;
            let cfg = common.resolve(Config { decay, jmax, law, center, radii, regime, ..Config::default() })?;
            report(&[commands::run_smallball(&cfg)?]);
        }
        Command::Simulate { common, model, n, m } => {
            let cfg = common.resolve(Config { model, n, m, ..Config::default() })?;
            report(&commands::run_simulate(&cfg)?);
        }
        Command::ModeStudy { common, models, replications, n, m, truncations, estimators } => {
            let cfg = common.resolve(Config {
                models,
                replications,
                n,
                m,
                truncations,
                estimators,
                ..Config::default()
            })?;
            report(&[commands::run_mode_study_cmd(&cfg)?]);
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
