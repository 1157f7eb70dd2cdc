//! K-fold cross-validation of the regularization parameter.
//!
//! Each fold builds its design from the training samples only and scores
//! the held-out samples with the same quadratic loss, where every smoother
//! row of a held-out sample is computed from the training samples.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{
    profile_design, profile_rows, IndicatorSpec, KernelSpec, ProfileDesign, SmootherOptions,
};
use crate::model::ConfoundedDataset;
use crate::objective::{assemble_quadratic, ppl_value};
use crate::solver::{fit_path, lambda_grid, lambda_max, CvSelection, SolverConfig};

/// How a method turns samples into a profiled design.
pub trait DesignBuilder: Sync {
    fn train_design(&self, train: &ConfoundedDataset) -> Result<ProfileDesign>;

    /// Design rows of `test`, with anything data-dependent estimated on `train`.
    fn heldout_design(
        &self,
        train: &ConfoundedDataset,
        test: &ConfoundedDataset,
    ) -> Result<ProfileDesign>;
}

/// The pseudo-profile likelihood design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PplDesign {
    pub indicator: IndicatorSpec,
    pub kernel: KernelSpec,
    pub smoother: SmootherOptions,
}

impl DesignBuilder for PplDesign {
    fn train_design(&self, train: &ConfoundedDataset) -> Result<ProfileDesign> {
        profile_design(train, &self.indicator, &self.kernel, &self.smoother)
    }

    fn heldout_design(
        &self,
        train: &ConfoundedDataset,
        test: &ConfoundedDataset,
    ) -> Result<ProfileDesign> {
        profile_rows(test, train, &self.indicator, &self.kernel, &self.smoother)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub lambda: f64,
    pub mean: f64,
    pub sd: f64,
    /// Folds that produced a loss at this lambda.
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_lambda: f64,
    pub curve: Vec<CvPoint>,
    /// `(fold, message)` for folds whose design or fit failed.
    pub fold_failures: Vec<(usize, String)>,
}

/// Seeded random assignment of `n` samples to `folds` folds.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (pos, &i) in order.iter().enumerate() {
        out[pos % folds].push(i);
    }
    for f in out.iter_mut() {
        f.sort_unstable();
    }
    out
}

/// Held-out loss per lambda for one fold; `None` where the fit failed.
fn fold_losses<B: DesignBuilder + ?Sized>(
    builder: &B,
    dataset: &ConfoundedDataset,
    test_rows: &[usize],
    lambdas: &[f64],
    config: &SolverConfig,
) -> Result<Vec<Option<f64>>> {
    let train_rows: Vec<usize> = (0..dataset.n())
        .filter(|i| test_rows.binary_search(i).is_err())
        .collect();
    let train = dataset.subset(&train_rows)?;
    let test = dataset.subset(test_rows)?;
    let pd_train = builder.train_design(&train)?;
    let pd_test = builder.heldout_design(&train, &test)?;
    let path = fit_path(&assemble_quadratic(&pd_train), lambdas, config)?;
    path.points
        .iter()
        .map(|pt| {
            if pt.converged {
                ppl_value(&pt.theta, &pd_test).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Cross-validates `lambdas` for any design. Lambda points failing in at
/// least half of the folds are dropped from the curve.
pub fn cross_validate_design<B: DesignBuilder + ?Sized>(
    builder: &B,
    dataset: &ConfoundedDataset,
    lambdas: &[f64],
    config: &SolverConfig,
) -> Result<CvResult> {
    config.validate()?;
    if dataset.n() < config.folds {
        return Err(Error::InvalidInput(format!(
            "{} samples cannot fill {} folds",
            dataset.n(),
            config.folds
        )));
    }
    let assignment = fold_assignment(dataset.n(), config.folds, config.seed);
    let per_fold: Vec<Result<Vec<Option<f64>>>> = assignment
        .par_iter()
        .map(|rows| fold_losses(builder, dataset, rows, lambdas, config))
        .collect();

    let mut fold_failures = Vec::new();
    let mut table: Vec<Vec<Option<f64>>> = Vec::with_capacity(config.folds);
    for (f, res) in per_fold.into_iter().enumerate() {
        match res {
            Ok(losses) => table.push(losses),
            Err(e) => {
                fold_failures.push((f, e.to_string()));
                table.push(vec![None; lambdas.len()]);
            }
        }
    }

    let mut curve = Vec::new();
    for (k, &lambda) in lambdas.iter().enumerate() {
        let vals: Vec<f64> = table.iter().filter_map(|row| row[k]).collect();
        let failed = config.folds - vals.len();
        if 2 * failed >= config.folds {
            continue;
        }
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let sd = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        } else {
            0.0
        };
        curve.push(CvPoint {
            lambda,
            mean,
            sd,
            folds: vals.len(),
        });
    }
    if curve.is_empty() {
        return Err(Error::Degenerate(format!(
            "every lambda failed in at least half of the folds ({} fold failures)",
            fold_failures.len()
        )));
    }
    let best_lambda = select_lambda(&curve, config.cv_selection);
    Ok(CvResult {
        best_lambda,
        curve,
        fold_failures,
    })
}

fn select_lambda(curve: &[CvPoint], rule: CvSelection) -> f64 {
    let best = curve
        .iter()
        .min_by(|a, b| a.mean.partial_cmp(&b.mean).unwrap_or(std::cmp::Ordering::Equal))
        .expect("nonempty curve");
    match rule {
        CvSelection::Min => best.lambda,
        CvSelection::OneStandardError => curve
            .iter()
            .filter(|pt| pt.mean <= best.mean + best.sd)
            .map(|pt| pt.lambda)
            .fold(best.lambda, f64::max),
    }
}

/// Cross-validation of the pseudo-profile likelihood estimator on its
/// default lambda grid (computed on the full data).
pub fn cross_validate(
    dataset: &ConfoundedDataset,
    ind: &IndicatorSpec,
    kernel: &KernelSpec,
    smoother: &SmootherOptions,
    config: &SolverConfig,
) -> Result<CvResult> {
    let builder = PplDesign {
        indicator: *ind,
        kernel: *kernel,
        smoother: *smoother,
    };
    let qf = assemble_quadratic(&builder.train_design(dataset)?);
    let grid = lambda_grid(lambda_max(&qf)?, config.n_lambda, config.lambda_min_ratio);
    cross_validate_design(&builder, dataset, &grid, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_samples() {
        let f = fold_assignment(23, 5, 3);
        assert_eq!(f.len(), 5);
        let mut all: Vec<usize> = f.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(f.iter().all(|rows| rows.len() == 4 || rows.len() == 5));
        assert_eq!(f, fold_assignment(23, 5, 3));
    }

    #[test]
    fn one_se_picks_larger_lambda() {
        let curve = vec![
            CvPoint { lambda: 1.0, mean: 1.05, sd: 0.1, folds: 3 },
            CvPoint { lambda: 0.5, mean: 1.0, sd: 0.1, folds: 3 },
            CvPoint { lambda: 0.1, mean: 1.2, sd: 0.1, folds: 3 },
        ];
        assert_eq!(select_lambda(&curve, CvSelection::Min), 0.5);
        assert_eq!(select_lambda(&curve, CvSelection::OneStandardError), 1.0);
    }

    fn noise_dataset(n: usize, p: usize, seed: u64) -> ConfoundedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = crate::model::sample_ggm(&crate::model::SymmetricParam::zeros(p), n, &mut rng).unwrap();
        let g = (0..n).map(|i| i as f64 - (n / 2) as f64).collect();
        ConfoundedDataset::new(g, z).unwrap()
    }

    fn pla_setup(data: &ConfoundedDataset) -> (IndicatorSpec, KernelSpec) {
        let h = crate::kernel::default_bandwidth(data.n(), data.g(), 1.0).unwrap();
        (
            IndicatorSpec::soft(crate::methods::DEFAULT_INDICATOR_K).unwrap(),
            KernelSpec::new(crate::kernel::KernelFamily::Epanechnikov, h).unwrap(),
        )
    }

    #[test]
    fn pure_noise_selects_heavy_regularization() {
        let config = SolverConfig::default();
        let pooled = crate::baselines::CleanSubsetDesign {
            g_threshold: f64::INFINITY,
        };
        let mut top_quartile = 0;
        for seed in 0..10 {
            let data = noise_dataset(200, 5, seed);
            let qf = assemble_quadratic(&pooled.train_design(&data).unwrap());
            let grid = lambda_grid(lambda_max(&qf).unwrap(), config.n_lambda, config.lambda_min_ratio);
            let cv = cross_validate_design(&pooled, &data, &grid, &config).unwrap();
            let rank = grid.iter().position(|&l| l == cv.best_lambda).unwrap();
            top_quartile += (rank < grid.len() / 4) as usize;
        }
        assert!(top_quartile > 5, "{top_quartile}/10");
    }

    #[test]
    fn leave_one_out_runs() {
        let data = noise_dataset(12, 2, 3);
        let config = SolverConfig {
            folds: 12,
            n_lambda: 8,
            ..SolverConfig::default()
        };
        let cv = cross_validate_design(&crate::baselines::LinearResidualDesign, &data, &[0.5, 0.2, 0.1], &config)
            .unwrap();
        assert_eq!(cv.curve.len(), 3);
        assert!(cv.curve.iter().all(|pt| pt.folds == 12));
    }

    #[test]
    fn curve_keeps_surviving_lambdas_only() {
        let data = noise_dataset(200, 3, 4);
        let config = SolverConfig {
            folds: 4,
            ..SolverConfig::default()
        };
        // a bandwidth this small leaves every training fold singular
        let builder = PplDesign {
            indicator: IndicatorSpec::soft(0.01).unwrap(),
            kernel: KernelSpec::new(crate::kernel::KernelFamily::Epanechnikov, 0.5).unwrap(),
            smoother: SmootherOptions::default(),
        };
        let err = cross_validate_design(&builder, &data, &[0.5, 0.1], &config).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));

        let (ind, kernel) = pla_setup(&data);
        let cv = cross_validate(&data, &ind, &kernel, &SmootherOptions::default(), &config).unwrap();
        assert_eq!(cv.curve.len(), config.n_lambda);
        assert!(cv.fold_failures.is_empty());
        assert!(cv.curve.windows(2).all(|w| w[0].lambda > w[1].lambda));
    }

    #[test]
    fn cv_is_deterministic() {
        let data = noise_dataset(200, 3, 5);
        let (ind, kernel) = pla_setup(&data);
        let config = SolverConfig { folds: 5, ..SolverConfig::default() };
        let a = cross_validate(&data, &ind, &kernel, &SmootherOptions::default(), &config).unwrap();
        let b = cross_validate(&data, &ind, &kernel, &SmootherOptions::default(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_many_folds_rejected() {
        let data = noise_dataset(6, 2, 6);
        let config = SolverConfig { folds: 7, ..SolverConfig::default() };
        assert!(cross_validate_design(&crate::baselines::LinearResidualDesign, &data, &[0.1], &config).is_err());
    }
}
