//! Command-line front end: `simulate`, `fit` and `roc`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numerical failure.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::Method;
use crate::error::Error;
use crate::evaluation::{roc_by_magnitude, roc_from_estimates, RocPoint};
use crate::methods::{cross_validate_method, fit_method};
use crate::simulation::{simulate, SimConfig};
use config::{Bandwidth, BandwidthValue, Command, Overrides, RocMode, RunConfig};
use io::{
    EdgeList, FitMetadata, MethodSummary, PathFile, SelectedFile, Summary, TruthFile,
};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Lib(e) => match e {
                Error::NotPositiveDefinite
                | Error::SingularSmoother { .. }
                | Error::Degenerate(_)
                | Error::InsufficientCleanSamples { .. }
                | Error::EffectiveSampleTooSmall { .. } => EXIT_NUMERICAL,
                Error::InvalidInput(_)
                | Error::IndexOutOfRange { .. }
                | Error::DimensionMismatch { .. }
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::Json(_) => EXIT_DATA,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "plaggm", version, about = "Confounder-adjusted sparse Gaussian graphical models")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Simulate a confounded dataset and its true structure.
    Simulate {
        /// Output directory for dataset.csv and truth.json.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit regularization paths, cross-validate and write estimates.
    Fit {
        /// Dataset CSV with header g,z1,...,zp.
        #[arg(long)]
        data: PathBuf,
        /// Output directory; one subdirectory per method.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score fitted paths against a true structure.
    Roc {
        #[arg(long)]
        truth: PathBuf,
        /// Output directory of a previous `fit`.
        #[arg(long)]
        fits: PathBuf,
        /// Output directory for roc.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON file with any of the flag settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// epanechnikov or gaussian.
    #[arg(long)]
    kernel: Option<String>,
    /// Kernel bandwidth, or "auto".
    #[arg(long)]
    bandwidth: Option<Bandwidth>,
    #[arg(long)]
    indicator_k: Option<f64>,
    #[arg(long)]
    n_lambda: Option<usize>,
    #[arg(long)]
    lambda_min_ratio: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated subset of pla,plain,lr,con,tv.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// lambda or magnitude.
    #[arg(long)]
    roc_mode: Option<String>,
    /// Relative ridge on the smoother Gram; departs from the exact smoother.
    #[arg(long)]
    ridge: Option<f64>,
    /// Also write the selected estimate as a dense p x p CSV.
    #[arg(long)]
    dense: bool,
}

impl CommonArgs {
    fn overrides(self) -> Result<Overrides, CliError> {
        let flags = Overrides {
            p: self.p,
            n: self.n,
            seed: self.seed,
            kernel: self.kernel,
            bandwidth: self.bandwidth.map(|b| match b {
                Bandwidth::Auto => BandwidthValue::Text("auto".into()),
                Bandwidth::Fixed(h) => BandwidthValue::Number(h),
            }),
            indicator_k: self.indicator_k,
            n_lambda: self.n_lambda,
            lambda_min_ratio: self.lambda_min_ratio,
            folds: self.folds,
            methods: self.methods,
            roc_mode: self.roc_mode,
            ridge: self.ridge,
            dense: self.dense.then_some(true),
        };
        Ok(match &self.config {
            Some(path) => flags.or(Overrides::from_file(path)?),
            None => flags,
        })
    }
}

/// Parses `args` (including the program name) into a validated config.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let (command, common) = match cli.command {
        Sub::Simulate { out, common } => (Command::Simulate { out }, common),
        Sub::Fit { data, out, common } => (Command::Fit { data, out }, common),
        Sub::Roc { truth, fits, out, common } => (Command::Roc { truth, fits, out }, common),
    };
    common
        .overrides()
        .and_then(|o| RunConfig::resolve(command, o))
        .map_err(|e| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{e}\n")))
}

/// Runs the command line and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match parse_config(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
        }
    };
    match run(&config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    match &config.command {
        Command::Simulate { out } => cmd_simulate(config, out),
        Command::Fit { data, out } => cmd_fit(config, data, out),
        Command::Roc { truth, fits, out } => cmd_roc(config, truth, fits, out),
    }
}

pub fn cmd_simulate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (data, truth) = simulate(&SimConfig::new(config.p, config.n), &mut rng)?;
    io::write_dataset(&out.join("dataset.csv"), &data)?;
    io::write_json(&out.join("truth.json"), &TruthFile::from_truth(&truth))?;
    Ok(())
}

/// Fits every configured method. A failing method does not stop the
/// others; the first failure decides the exit code.
pub fn cmd_fit(config: &RunConfig, data_path: &Path, out: &Path) -> Result<(), CliError> {
    let data = io::read_dataset(data_path)?;
    let settings = config.method_settings();
    let mut first_error = None;
    for &method in &config.methods {
        let dir = out.join(method.as_str());
        if let Err(e) = fit_one(config, method, &data, &settings, &dir) {
            eprintln!("{method}: {e}");
            first_error.get_or_insert(e);
        }
    }
    first_error.map_or(Ok(()), Err)
}

fn fit_one(
    config: &RunConfig,
    method: Method,
    data: &crate::model::ConfoundedDataset,
    settings: &crate::methods::MethodSettings,
    dir: &Path,
) -> Result<(), CliError> {
    let fit = fit_method(method, data, settings)?;
    let cv = cross_validate_method(method, data, settings, &fit.path.lambdas())?;
    let selected = fit
        .path
        .nearest(cv.best_lambda)
        .ok_or_else(|| Error::Degenerate("empty path".into()))?;

    io::write_json(&dir.join("path.json"), &PathFile::new(method.as_str(), &fit.path))?;
    io::write_cv_curve(&dir.join("cv.csv"), &cv.curve)?;
    io::write_json(
        &dir.join("selected.json"),
        &SelectedFile {
            method: method.to_string(),
            lambda: selected.lambda,
            estimate: EdgeList::from_param(&selected.theta),
        },
    )?;
    if config.dense {
        io::write_dense(&dir.join("selected_dense.csv"), &selected.theta)?;
    }
    io::write_json(
        &dir.join("metadata.json"),
        &FitMetadata {
            method: method.to_string(),
            n: data.n(),
            p: data.p(),
            n_lambda: fit.path.len(),
            seed: config.seed,
            bandwidth: fit.bandwidth,
            ridge_enabled: fit.ridge > 0.0,
            ridge: fit.ridge,
            screening_repairs: fit.path.total_repairs(),
            all_converged: fit.path.all_converged(),
            selected_lambda: selected.lambda,
            cv_fold_failures: cv.fold_failures,
            notes: fit.notes,
        },
    )?;
    Ok(())
}

/// Scores each configured method found under `fits`.
pub fn cmd_roc(config: &RunConfig, truth_path: &Path, fits: &Path, out: &Path) -> Result<(), CliError> {
    let truth = io::read_json::<TruthFile>(truth_path)?.theta0()?;
    let mut rows: Vec<(String, RocPoint)> = Vec::new();
    let mut summary = Summary::new();
    for &method in &config.methods {
        let dir = fits.join(method.as_str());
        let path_file = dir.join("path.json");
        if !path_file.exists() {
            // `fit` may have been run on a subset of the methods
            continue;
        }
        let roc = match config.roc_mode {
            RocMode::Lambda => {
                let estimates = io::read_json::<PathFile>(&path_file)?.estimates()?;
                let refs: Vec<_> = estimates.iter().map(|(l, t)| (*l, t)).collect();
                roc_from_estimates(&refs, &truth)?
            }
            RocMode::Magnitude => {
                let sel: SelectedFile = io::read_json(&dir.join("selected.json"))?;
                roc_by_magnitude(&sel.estimate.to_param()?, &truth)?
            }
        };
        rows.extend(roc.points.iter().map(|pt| (method.to_string(), *pt)));
        summary.insert(
            method.to_string(),
            MethodSummary {
                auc: roc.auc,
                degenerate: roc.degenerate,
            },
        );
    }
    if summary.is_empty() {
        return Err(Error::InvalidInput(format!("no fitted paths found under {}", fits.display())).into());
    }
    io::write_roc(&out.join("roc.csv"), &rows)?;
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(Error::Parse { line: 3, message: "m".into() }).exit_code(), 3);
        let singular = Error::SingularSmoother { sample: 0, node: 1, rcond: 0.0 };
        assert_eq!(CliError::from(singular).exit_code(), 4);
    }

    #[test]
    fn p_one_is_a_config_error() {
        let err = parse_config(["plaggm", "simulate", "--out", "x", "--p", "1"]).unwrap_err();
        assert!(err.to_string().contains("p must be at least 2"));
        assert_eq!(main_with_args(["plaggm", "simulate", "--out", "x", "--p", "1"]), EXIT_CONFIG);
    }

    #[test]
    fn methods_flag_parses_list() {
        let c = parse_config(["plaggm", "fit", "--data", "d", "--out", "o", "--methods", "pla,lr"]).unwrap();
        assert_eq!(c.methods, vec![Method::Pla, Method::Lr]);
    }
}
