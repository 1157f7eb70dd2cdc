//! One entry point for the estimator and every baseline.

use crate::baselines::{
    fit_con_ggm, fit_lr_ggm, fit_plain_ggm, fit_tv_ggm, fit_tv_ggm_averaged, CleanSubsetDesign,
    JointConfounderDesign, KernelWeightedDesign, LinearResidualDesign, Method, TvMode,
};
use crate::cv::{cross_validate_design, CvResult, DesignBuilder, PplDesign};
use crate::error::Result;
use crate::kernel::{default_bandwidth, IndicatorSpec, KernelFamily, KernelSpec, SmootherOptions};
use crate::model::ConfoundedDataset;
use crate::objective::assemble_quadratic;
use crate::solver::{fit_path, lambda_grid, lambda_max, FitPath, SolverConfig};

/// Indicator coefficient used when none is given.
pub const DEFAULT_INDICATOR_K: f64 = 0.002;
/// Threshold `g*` for the plain GGM's clean subsample.
pub const DEFAULT_G_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSettings {
    pub kernel_family: KernelFamily,
    /// Fixed bandwidth; `None` uses `bandwidth_constant * sd(g) * n^(-1/4)`.
    pub bandwidth: Option<f64>,
    pub bandwidth_constant: f64,
    pub indicator: IndicatorSpec,
    pub smoother: SmootherOptions,
    pub g_threshold: f64,
    pub tv_mode: TvMode,
    pub solver: SolverConfig,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            kernel_family: KernelFamily::Epanechnikov,
            bandwidth: None,
            bandwidth_constant: 1.0,
            indicator: IndicatorSpec::Soft {
                k: DEFAULT_INDICATOR_K,
            },
            smoother: SmootherOptions::default(),
            g_threshold: DEFAULT_G_THRESHOLD,
            tv_mode: TvMode::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl MethodSettings {
    pub fn kernel_for(&self, dataset: &ConfoundedDataset) -> Result<KernelSpec> {
        let h = match self.bandwidth {
            Some(h) => h,
            None => default_bandwidth(dataset.n(), dataset.g(), self.bandwidth_constant)?,
        };
        KernelSpec::new(self.kernel_family, h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodFit {
    pub method: Method,
    pub path: FitPath,
    pub notes: Vec<String>,
    /// Bandwidth used by kernel-based methods.
    pub bandwidth: Option<f64>,
    /// Smoother ridge, nonzero only when the exact smoother was relaxed.
    pub ridge: f64,
}

/// The L1-regularized pseudo-profile likelihood path on the default grid.
pub fn fit_pla(
    dataset: &ConfoundedDataset,
    indicator: &IndicatorSpec,
    kernel: &KernelSpec,
    smoother: &SmootherOptions,
    config: &SolverConfig,
) -> Result<FitPath> {
    let builder = PplDesign {
        indicator: *indicator,
        kernel: *kernel,
        smoother: *smoother,
    };
    let qf = assemble_quadratic(&builder.train_design(dataset)?);
    let grid = lambda_grid(lambda_max(&qf)?, config.n_lambda, config.lambda_min_ratio);
    fit_path(&qf, &grid, config)
}

pub fn fit_method(
    method: Method,
    dataset: &ConfoundedDataset,
    settings: &MethodSettings,
) -> Result<MethodFit> {
    let config = &settings.solver;
    let fit = |path, notes, bandwidth, ridge| MethodFit {
        method,
        path,
        notes,
        bandwidth,
        ridge,
    };
    match method {
        Method::Pla => {
            let kernel = settings.kernel_for(dataset)?;
            let path = fit_pla(dataset, &settings.indicator, &kernel, &settings.smoother, config)?;
            let mut notes = Vec::new();
            if settings.smoother.ridge > 0.0 {
                notes.push(format!(
                    "smoother ridge {} departs from the exact local-linear smoother",
                    settings.smoother.ridge
                ));
            }
            Ok(fit(path, notes, Some(kernel.bandwidth()), settings.smoother.ridge))
        }
        Method::Plain => {
            let r = fit_plain_ggm(dataset, settings.g_threshold, config)?;
            Ok(fit(r.path, r.notes, None, 0.0))
        }
        Method::Lr => {
            let r = fit_lr_ggm(dataset, config)?;
            Ok(fit(r.path, r.notes, None, 0.0))
        }
        Method::Con => {
            let r = fit_con_ggm(dataset, config)?;
            Ok(fit(r.path, r.notes, None, 0.0))
        }
        Method::Tv => {
            let kernel = settings.kernel_for(dataset)?;
            let r = match &settings.tv_mode {
                TvMode::Point(e) => fit_tv_ggm(dataset, *e, &kernel, config)?,
                TvMode::Average(points) => fit_tv_ggm_averaged(dataset, points, &kernel, config)?,
            };
            Ok(fit(r.path, r.notes, Some(kernel.bandwidth()), 0.0))
        }
    }
}

/// Design builder of `method`, for cross-validation.
pub fn design_builder(
    method: Method,
    dataset: &ConfoundedDataset,
    settings: &MethodSettings,
) -> Result<Box<dyn DesignBuilder>> {
    Ok(match method {
        Method::Pla => Box::new(PplDesign {
            indicator: settings.indicator,
            kernel: settings.kernel_for(dataset)?,
            smoother: settings.smoother,
        }),
        Method::Plain => Box::new(CleanSubsetDesign {
            g_threshold: settings.g_threshold,
        }),
        Method::Lr => Box::new(LinearResidualDesign),
        Method::Con => Box::new(JointConfounderDesign),
        Method::Tv => {
            let eval_point = match &settings.tv_mode {
                TvMode::Point(e) => *e,
                // the averaged mode is validated at its central point
                TvMode::Average(points) => points.iter().sum::<f64>() / points.len().max(1) as f64,
            };
            Box::new(KernelWeightedDesign {
                kernel: settings.kernel_for(dataset)?,
                eval_point,
            })
        }
    })
}

/// Cross-validates `method` over the lambdas of its full-data path.
pub fn cross_validate_method(
    method: Method,
    dataset: &ConfoundedDataset,
    settings: &MethodSettings,
    lambdas: &[f64],
) -> Result<CvResult> {
    let builder = design_builder(method, dataset, settings)?;
    cross_validate_design(builder.as_ref(), dataset, lambdas, &settings.solver)
}
