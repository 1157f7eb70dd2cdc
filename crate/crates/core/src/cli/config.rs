//! Validated run configuration: command-line flags layered over an
//! optional JSON config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::CliError;
use crate::baselines::Method;
use crate::kernel::{IndicatorSpec, KernelFamily, SmootherOptions};
use crate::methods::{MethodSettings, DEFAULT_INDICATOR_K};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bandwidth::Auto);
        }
        s.parse::<f64>()
            .map(Bandwidth::Fixed)
            .map_err(|_| format!("bandwidth must be 'auto' or a number, got '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RocMode {
    /// One ROC point per regularization level.
    Lambda,
    /// Thresholds on entry magnitudes of the selected estimate.
    Magnitude,
}

impl std::str::FromStr for RocMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" => Ok(RocMode::Lambda),
            "magnitude" => Ok(RocMode::Magnitude),
            other => Err(format!("roc mode must be 'lambda' or 'magnitude', got '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Simulate { out: PathBuf },
    Fit { data: PathBuf, out: PathBuf },
    Roc { truth: PathBuf, fits: PathBuf, out: PathBuf },
}

/// Optional settings shared by the flags and the config file. Every field
/// left `None` falls back to the file, then to the default.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub kernel: Option<String>,
    pub bandwidth: Option<BandwidthValue>,
    pub indicator_k: Option<f64>,
    pub n_lambda: Option<usize>,
    pub lambda_min_ratio: Option<f64>,
    pub folds: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub roc_mode: Option<String>,
    pub ridge: Option<f64>,
    pub dense: Option<bool>,
}

/// A bandwidth in a config file: `"auto"` or a number.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BandwidthValue {
    Number(f64),
    Text(String),
}

impl Overrides {
    /// `self` wins over `base` field by field.
    pub fn or(self, base: Overrides) -> Overrides {
        Overrides {
            p: self.p.or(base.p),
            n: self.n.or(base.n),
            seed: self.seed.or(base.seed),
            kernel: self.kernel.or(base.kernel),
            bandwidth: self.bandwidth.or(base.bandwidth),
            indicator_k: self.indicator_k.or(base.indicator_k),
            n_lambda: self.n_lambda.or(base.n_lambda),
            lambda_min_ratio: self.lambda_min_ratio.or(base.lambda_min_ratio),
            folds: self.folds.or(base.folds),
            methods: self.methods.or(base.methods),
            roc_mode: self.roc_mode.or(base.roc_mode),
            ridge: self.ridge.or(base.ridge),
            dense: self.dense.or(base.dense),
        }
    }

    pub fn from_file(path: &Path) -> Result<Overrides, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub kernel: KernelFamily,
    pub bandwidth: Bandwidth,
    pub indicator_k: f64,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub folds: usize,
    pub methods: Vec<Method>,
    pub roc_mode: RocMode,
    /// Smoother ridge; `None` keeps the exact smoother.
    pub ridge: Option<f64>,
    pub dense: bool,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Resolves defaults and validates every field.
    pub fn resolve(command: Command, o: Overrides) -> Result<RunConfig, CliError> {
        let solver = SolverConfig::default();
        let kernel = match o.kernel {
            Some(k) => k.parse().map_err(|e: crate::Error| config_err(e.to_string()))?,
            None => KernelFamily::Epanechnikov,
        };
        let bandwidth = match o.bandwidth {
            None => Bandwidth::Auto,
            Some(BandwidthValue::Number(h)) => Bandwidth::Fixed(h),
            Some(BandwidthValue::Text(s)) => s.parse().map_err(config_err)?,
        };
        let methods = match o.methods {
            None => Method::ALL.to_vec(),
            Some(list) => list
                .iter()
                .map(|m| m.parse().map_err(|e: crate::Error| config_err(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let roc_mode = match o.roc_mode {
            None => RocMode::Lambda,
            Some(s) => s.parse().map_err(config_err)?,
        };
        let config = RunConfig {
            command,
            p: o.p.unwrap_or(10),
            n: o.n.unwrap_or(800),
            seed: o.seed.unwrap_or(0),
            kernel,
            bandwidth,
            indicator_k: o.indicator_k.unwrap_or(DEFAULT_INDICATOR_K),
            n_lambda: o.n_lambda.unwrap_or(solver.n_lambda),
            lambda_min_ratio: o.lambda_min_ratio.unwrap_or(solver.lambda_min_ratio),
            folds: o.folds.unwrap_or(solver.folds),
            methods,
            roc_mode,
            ridge: o.ridge,
            dense: o.dense.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.p < 2 {
            return Err(config_err(format!("p must be at least 2, got {}", self.p)));
        }
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(config_err(format!("n must be even and at least 2, got {}", self.n)));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(config_err(format!("bandwidth must be positive, got {h}")));
            }
        }
        if !(self.indicator_k.is_finite() && self.indicator_k > 0.0) {
            return Err(config_err(format!(
                "indicator coefficient must be positive, got {}",
                self.indicator_k
            )));
        }
        if self.methods.is_empty() {
            return Err(config_err("method list is empty"));
        }
        for (a, m) in self.methods.iter().enumerate() {
            if self.methods[..a].contains(m) {
                return Err(config_err(format!("method '{m}' listed twice")));
            }
        }
        if let Some(r) = self.ridge {
            if !(r.is_finite() && r >= 0.0) {
                return Err(config_err(format!("ridge must be nonnegative, got {r}")));
            }
        }
        self.solver().validate().map_err(|e| config_err(e.to_string()))
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            n_lambda: self.n_lambda,
            lambda_min_ratio: self.lambda_min_ratio,
            folds: self.folds,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }

    pub fn method_settings(&self) -> MethodSettings {
        MethodSettings {
            kernel_family: self.kernel,
            bandwidth: match self.bandwidth {
                Bandwidth::Auto => None,
                Bandwidth::Fixed(h) => Some(h),
            },
            indicator: IndicatorSpec::Soft {
                k: self.indicator_k,
            },
            smoother: SmootherOptions {
                ridge: self.ridge.unwrap_or(0.0),
                ..SmootherOptions::default()
            },
            solver: self.solver(),
            ..MethodSettings::default()
        }
    }
}
