//! Comparison estimators. All of them reuse the coordinate-descent core:
//! they only differ in how the samples are turned into node designs.
//!
//! * plain GGM: pseudo-likelihood lasso on the samples with `|g| <= g*`;
//! * LR-GGM: regress every variable on `(1, g)` and fit the residuals;
//! * CON-GGM: joint GGM over `(G, Z)`, keeping the `ZZ` block;
//! * TV-GGM: kernel-weighted pseudo-likelihood around an evaluation point.
//!
//! CON-GGM is fitted with the pseudo-likelihood instead of a covariance
//! graphical lasso; the `ZZ` block of the joint parameter is the
//! conditional structure of `Z | G` either way.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cv::DesignBuilder;
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, ProfileDesign};
use crate::model::{ConfoundedDataset, SymmetricParam};
use crate::objective::assemble_quadratic;
use crate::solver::{fit_path, lambda_grid, lambda_max, FitPath, PathPoint, SolverConfig};

/// Minimum number of retained samples for the plain GGM.
pub const MIN_CLEAN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pla,
    Plain,
    Lr,
    Con,
    Tv,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Plain, Method::Lr, Method::Con, Method::Tv, Method::Pla];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pla => "pla",
            Method::Plain => "plain",
            Method::Lr => "lr",
            Method::Con => "con",
            Method::Tv => "tv",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pla" => Ok(Method::Pla),
            "plain" | "ggm" => Ok(Method::Plain),
            "lr" => Ok(Method::Lr),
            "con" => Ok(Method::Con),
            "tv" => Ok(Method::Tv),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub method: Method,
    /// Path in the `p`-variable layout.
    pub path: FitPath,
    pub notes: Vec<String>,
}

fn default_path(pd: &ProfileDesign, config: &SolverConfig) -> Result<FitPath> {
    let qf = assemble_quadratic(pd);
    let grid = lambda_grid(lambda_max(&qf)?, config.n_lambda, config.lambda_min_ratio);
    fit_path(&qf, &grid, config)
}

/// Pseudo-likelihood on the samples with `|g| <= g_threshold` only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanSubsetDesign {
    pub g_threshold: f64,
}

impl CleanSubsetDesign {
    pub fn retained(&self, data: &ConfoundedDataset) -> Vec<usize> {
        (0..data.n())
            .filter(|&i| data.g()[i].abs() <= self.g_threshold)
            .collect()
    }

    fn subset(&self, data: &ConfoundedDataset, required: usize) -> Result<ConfoundedDataset> {
        let rows = self.retained(data);
        if rows.len() < required {
            return Err(Error::InsufficientCleanSamples {
                found: rows.len(),
                required,
            });
        }
        data.subset(&rows)
    }
}

impl DesignBuilder for CleanSubsetDesign {
    fn train_design(&self, train: &ConfoundedDataset) -> Result<ProfileDesign> {
        ProfileDesign::raw(&self.subset(train, MIN_CLEAN_SAMPLES)?)
    }

    fn heldout_design(
        &self,
        _train: &ConfoundedDataset,
        test: &ConfoundedDataset,
    ) -> Result<ProfileDesign> {
        ProfileDesign::raw(&self.subset(test, 1)?)
    }
}

pub fn fit_plain_ggm(
    dataset: &ConfoundedDataset,
    g_threshold: f64,
    config: &SolverConfig,
) -> Result<BaselineResult> {
    let builder = CleanSubsetDesign { g_threshold };
    let retained = builder.retained(dataset).len();
    let path = default_path(&builder.train_design(dataset)?, config)?;
    Ok(BaselineResult {
        method: Method::Plain,
        path,
        notes: vec![format!("retained {retained} samples with |g| <= {g_threshold}")],
    })
}

/// Per-column least squares on `(1, g)`: `(intercepts, slopes)`. A constant
/// confounder reduces this to centering.
pub fn linear_confounder_fit(dataset: &ConfoundedDataset) -> (Vec<f64>, Vec<f64>) {
    let n = dataset.n() as f64;
    let g = dataset.g();
    let gbar = g.iter().sum::<f64>() / n;
    let sgg: f64 = g.iter().map(|v| (v - gbar).powi(2)).sum();
    let z = dataset.z();
    let mut intercepts = Vec::with_capacity(dataset.p());
    let mut slopes = Vec::with_capacity(dataset.p());
    for j in 0..dataset.p() {
        let col = z.column(j);
        let zbar = col.mean();
        let slope = if sgg > 0.0 {
            g.iter().zip(col.iter()).map(|(gi, zi)| (gi - gbar) * (zi - zbar)).sum::<f64>() / sgg
        } else {
            0.0
        };
        intercepts.push(zbar - slope * gbar);
        slopes.push(slope);
    }
    (intercepts, slopes)
}

/// Pseudo-likelihood on residuals of the linear confounder regression.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearResidualDesign;

impl LinearResidualDesign {
    fn residualize(
        data: &ConfoundedDataset,
        fit: &(Vec<f64>, Vec<f64>),
    ) -> Result<ConfoundedDataset> {
        let (a, b) = fit;
        let z = DMatrix::from_fn(data.n(), data.p(), |i, j| {
            data.z()[(i, j)] - a[j] - b[j] * data.g()[i]
        });
        data.with_z(z)
    }
}

impl DesignBuilder for LinearResidualDesign {
    fn train_design(&self, train: &ConfoundedDataset) -> Result<ProfileDesign> {
        let fit = linear_confounder_fit(train);
        ProfileDesign::raw(&Self::residualize(train, &fit)?)
    }

    fn heldout_design(
        &self,
        train: &ConfoundedDataset,
        test: &ConfoundedDataset,
    ) -> Result<ProfileDesign> {
        let fit = linear_confounder_fit(train);
        ProfileDesign::raw(&Self::residualize(test, &fit)?)
    }
}

pub fn fit_lr_ggm(dataset: &ConfoundedDataset, config: &SolverConfig) -> Result<BaselineResult> {
    if dataset.n() < 3 {
        return Err(Error::InvalidInput("LR-GGM needs at least 3 samples".into()));
    }
    let path = default_path(&LinearResidualDesign.train_design(dataset)?, config)?;
    Ok(BaselineResult {
        method: Method::Lr,
        path,
        notes: vec!["residuals of per-variable OLS on (1, g)".into()],
    })
}

/// `[Sigma_ZZ - Sigma_ZG Sigma_GG^{-1} Sigma_GZ]^{-1}` for a joint
/// covariance ordered `(G, Z)`.
pub fn conditional_precision(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = sigma.nrows();
    if m < 2 || sigma.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m.max(2),
            found: sigma.ncols(),
        });
    }
    if (sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax().max(1.0) {
        return Err(Error::InvalidInput("covariance must be symmetric".into()));
    }
    if sigma.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let p = m - 1;
    let sgg = sigma[(0, 0)];
    let szg = sigma.view((1, 0), (p, 1)).into_owned();
    let szz = sigma.view((1, 1), (p, p)).into_owned();
    let schur = szz - &szg * szg.transpose() / sgg;
    let chol = schur.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.inverse())
}

/// Joint pseudo-likelihood over `(G, Z)` with the confounder standardized
/// and placed first.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointConfounderDesign;

impl JointConfounderDesign {
    fn standardization(g: &[f64]) -> (f64, f64) {
        let n = g.len() as f64;
        let mean = g.iter().sum::<f64>() / n;
        let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        (mean, sd)
    }

    fn augment(data: &ConfoundedDataset, centre: (f64, f64)) -> Result<ConfoundedDataset> {
        let (mean, sd) = centre;
        let z = DMatrix::from_fn(data.n(), data.p() + 1, |i, j| {
            if j == 0 {
                (data.g()[i] - mean) / sd
            } else {
                data.z()[(i, j - 1)]
            }
        });
        data.with_z(z)
    }
}

impl DesignBuilder for JointConfounderDesign {
    fn train_design(&self, train: &ConfoundedDataset) -> Result<ProfileDesign> {
        ProfileDesign::raw(&Self::augment(train, Self::standardization(train.g()))?)
    }

    fn heldout_design(
        &self,
        train: &ConfoundedDataset,
        test: &ConfoundedDataset,
    ) -> Result<ProfileDesign> {
        ProfileDesign::raw(&Self::augment(test, Self::standardization(train.g()))?)
    }
}

/// `ZZ` block of a joint `(G, Z)` parameter.
pub fn zz_block(joint: &SymmetricParam) -> SymmetricParam {
    let p = joint.p() - 1;
    let mut out = SymmetricParam::zeros(p);
    for j in 0..p {
        for k in j..p {
            out.set(j, k, joint.get(j + 1, k + 1));
        }
    }
    out
}

/// Maps a joint `(G, Z)` path onto the `Z` layout.
pub fn joint_path_to_zz(path: &FitPath) -> FitPath {
    FitPath {
        points: path
            .points
            .iter()
            .map(|pt| {
                let theta = zz_block(&pt.theta);
                PathPoint {
                    active: theta.support_size(0.0),
                    theta,
                    ..pt.clone()
                }
            })
            .collect(),
    }
}

pub fn fit_con_ggm(dataset: &ConfoundedDataset, config: &SolverConfig) -> Result<BaselineResult> {
    let joint = default_path(&JointConfounderDesign.train_design(dataset)?, config)?;
    let mut notes = vec!["pseudo-likelihood joint fit over (G, Z); ZZ block reported".into()];
    if dataset.n() <= dataset.p() + 1 {
        notes.push(format!("n = {} <= p + 1 = {}", dataset.n(), dataset.p() + 1));
    }
    Ok(BaselineResult {
        method: Method::Con,
        path: joint_path_to_zz(&joint),
        notes,
    })
}

/// Joint `(G, Z)` path without the `ZZ` projection.
pub fn fit_con_joint(dataset: &ConfoundedDataset, config: &SolverConfig) -> Result<FitPath> {
    default_path(&JointConfounderDesign.train_design(dataset)?, config)
}

/// Kernel weights `psi(|g_i - e| / h)` rescaled to mean one.
pub fn tv_weights(g: &[f64], eval_point: f64, kernel: &KernelSpec) -> Result<Vec<f64>> {
    let raw: Vec<f64> = g.iter().map(|&gi| kernel.weight(eval_point, gi)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EffectiveSampleTooSmall {
            weight: total,
            required: f64::MIN_POSITIVE,
        });
    }
    let mean = total / g.len() as f64;
    Ok(raw.iter().map(|w| w / mean).collect())
}

/// Pseudo-likelihood with each sample weighted by its kernel distance to
/// `eval_point`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelWeightedDesign {
    pub kernel: KernelSpec,
    pub eval_point: f64,
}

impl KernelWeightedDesign {
    fn check_weight(&self, data: &ConfoundedDataset) -> Result<()> {
        let total: f64 = data
            .g()
            .iter()
            .map(|&gi| self.kernel.weight(self.eval_point, gi))
            .sum();
        let required = 3.0 * data.p() as f64;
        if total < required {
            return Err(Error::EffectiveSampleTooSmall {
                weight: total,
                required,
            });
        }
        Ok(())
    }
}

impl DesignBuilder for KernelWeightedDesign {
    fn train_design(&self, train: &ConfoundedDataset) -> Result<ProfileDesign> {
        self.check_weight(train)?;
        let w = tv_weights(train.g(), self.eval_point, &self.kernel)?;
        ProfileDesign::raw(train)?.weighted(&w)
    }

    fn heldout_design(
        &self,
        _train: &ConfoundedDataset,
        test: &ConfoundedDataset,
    ) -> Result<ProfileDesign> {
        let w = tv_weights(test.g(), self.eval_point, &self.kernel)?;
        ProfileDesign::raw(test)?.weighted(&w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TvMode {
    /// Structure at a single confounder value.
    Point(f64),
    /// Path-wise average of the structures over several confounder values.
    Average(Vec<f64>),
}

impl Default for TvMode {
    fn default() -> Self {
        TvMode::Point(0.0)
    }
}

pub fn fit_tv_ggm(
    dataset: &ConfoundedDataset,
    eval_point: f64,
    kernel: &KernelSpec,
    config: &SolverConfig,
) -> Result<BaselineResult> {
    let builder = KernelWeightedDesign {
        kernel: *kernel,
        eval_point,
    };
    let path = default_path(&builder.train_design(dataset)?, config)?;
    Ok(BaselineResult {
        method: Method::Tv,
        path,
        notes: vec![format!(
            "kernel weights at g = {eval_point}, h = {}",
            kernel.bandwidth()
        )],
    })
}

/// TV-GGM averaged over `eval_points` on a shared lambda grid.
pub fn fit_tv_ggm_averaged(
    dataset: &ConfoundedDataset,
    eval_points: &[f64],
    kernel: &KernelSpec,
    config: &SolverConfig,
) -> Result<BaselineResult> {
    if eval_points.is_empty() {
        return Err(Error::InvalidInput("no evaluation points".into()));
    }
    let qfs = eval_points
        .iter()
        .map(|&e| {
            KernelWeightedDesign {
                kernel: *kernel,
                eval_point: e,
            }
            .train_design(dataset)
            .map(|pd| assemble_quadratic(&pd))
        })
        .collect::<Result<Vec<_>>>()?;
    let lmax = qfs
        .iter()
        .map(lambda_max)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let grid = lambda_grid(lmax, config.n_lambda, config.lambda_min_ratio);
    let paths = qfs
        .iter()
        .map(|qf| fit_path(qf, &grid, config))
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / paths.len() as f64;
    let points = (0..grid.len())
        .map(|k| {
            let mut theta = SymmetricParam::zeros(dataset.p());
            for path in &paths {
                theta = theta.add(&path.points[k].theta)?;
            }
            let theta = theta.scaled(scale);
            let first = &paths[0].points[k];
            Ok(PathPoint {
                lambda: grid[k],
                active: theta.support_size(0.0),
                theta,
                objective: paths.iter().map(|p| p.points[k].objective).sum::<f64>() * scale,
                sweeps: paths.iter().map(|p| p.points[k].sweeps).sum(),
                kkt_violation: paths.iter().map(|p| p.points[k].kkt_violation).fold(0.0, f64::max),
                repairs: paths.iter().map(|p| p.points[k].repairs).sum(),
                converged: paths.iter().all(|p| p.points[k].converged) && first.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BaselineResult {
        method: Method::Tv,
        path: FitPath { points },
        notes: vec![format!("averaged over {} evaluation points", eval_points.len())],
    })
}

/// Sample covariance of `(g, z)`, `g` first. Used by tests and diagnostics.
pub fn joint_covariance(dataset: &ConfoundedDataset) -> DMatrix<f64> {
    let n = dataset.n();
    let m = dataset.p() + 1;
    let cols: Vec<DVector<f64>> = std::iter::once(DVector::from_column_slice(dataset.g()))
        .chain((0..dataset.p()).map(|j| dataset.z().column(j).into_owned()))
        .collect();
    let means: Vec<f64> = cols.iter().map(|c| c.mean()).collect();
    DMatrix::from_fn(m, m, |a, b| {
        cols[a]
            .iter()
            .zip(cols[b].iter())
            .map(|(x, y)| (x - means[a]) * (y - means[b]))
            .sum::<f64>()
            / (n as f64 - 1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use crate::model::sample_ggm;
    use crate::simulation::simulate_dataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &FitPath, b: &FitPath) -> f64 {
        a.points
            .iter()
            .zip(&b.points)
            .flat_map(|(x, y)| {
                x.theta
                    .to_flat()
                    .into_iter()
                    .zip(y.theta.to_flat())
                    .map(|(u, v)| (u - v).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    fn plain_on_all(data: &ConfoundedDataset, config: &SolverConfig) -> FitPath {
        default_path(&ProfileDesign::raw(data).unwrap(), config).unwrap()
    }

    fn random_pd(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(m, m) * 0.5
    }

    #[test]
    fn conditional_precision_scalar_case() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let k = conditional_precision(&sigma).unwrap();
        assert!((k[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn conditional_precision_matches_full_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m in 2..7 {
            let sigma = random_pd(m, &mut rng);
            let full = sigma.clone().try_inverse().unwrap();
            let block = full.view((1, 1), (m - 1, m - 1)).into_owned();
            assert!((conditional_precision(&sigma).unwrap() - block).amax() < 1e-10);
        }
        // block diagonal: the confounder drops out
        let mut sigma = random_pd(4, &mut rng);
        for k in 1..4 {
            sigma[(0, k)] = 0.0;
            sigma[(k, 0)] = 0.0;
        }
        let szz_inv = sigma.view((1, 1), (3, 3)).into_owned().try_inverse().unwrap();
        assert!((conditional_precision(&sigma).unwrap() - szz_inv).amax() < 1e-12);

        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(conditional_precision(&indefinite), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn plain_keeps_the_clean_grid_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (data, _) = simulate_dataset(10, 800, &mut rng).unwrap();
        let builder = CleanSubsetDesign { g_threshold: 10.0 };
        assert_eq!(builder.retained(&data).len(), 21);
        let fit = fit_plain_ggm(&data, 10.0, &SolverConfig::default()).unwrap();
        assert!(fit.notes[0].contains("21"));
    }

    #[test]
    fn plain_without_clean_samples_errors() {
        let g: Vec<f64> = (0..30).map(|i| i as f64 + 0.5).collect();
        let z = DMatrix::from_fn(30, 3, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let data = ConfoundedDataset::new(g, z).unwrap();
        assert!(matches!(
            fit_plain_ggm(&data, 0.0, &SolverConfig::default()),
            Err(Error::InsufficientCleanSamples { found: 0, .. })
        ));
    }

    #[test]
    fn plain_on_fully_clean_data_is_the_pooled_lasso() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = sample_ggm(&SymmetricParam::zeros(4), 80, &mut rng).unwrap();
        let g = (0..80).map(|i| i as f64 / 100.0).collect();
        let data = ConfoundedDataset::new(g, z).unwrap();
        let config = SolverConfig::default();
        let plain = fit_plain_ggm(&data, 10.0, &config).unwrap();
        assert_eq!(plain.path, plain_on_all(&data, &config));
    }

    #[test]
    fn lr_with_zero_slope_is_the_plain_lasso() {
        // quarter-integer values and paired rows keep every regression sum exact
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = 4;
        let mut g = Vec::new();
        let mut rows = Vec::new();
        for _ in 0..15 {
            let r: Vec<f64> = (0..p).map(|_| rng.random_range(-16i32..=16) as f64 / 4.0).collect();
            for (gv, sign) in [(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
                g.push(gv);
                rows.extend(r.iter().map(|v| sign * v));
            }
        }
        let data = ConfoundedDataset::new(g, DMatrix::from_row_slice(60, p, &rows)).unwrap();
        let (a, b) = linear_confounder_fit(&data);
        assert!(a.iter().chain(&b).all(|v| *v == 0.0));
        let config = SolverConfig::default();
        let lr = fit_lr_ggm(&data, &config).unwrap();
        assert_eq!(lr.path, plain_on_all(&data, &config));
    }

    #[test]
    fn lr_with_constant_confounder_centres() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = DMatrix::from_fn(40, 3, |_, _| rng.random_range(0.0..5.0));
        let data = ConfoundedDataset::new(vec![2.0; 40], z.clone()).unwrap();
        let (a, b) = linear_confounder_fit(&data);
        for j in 0..3 {
            assert_eq!(b[j], 0.0);
            assert!((a[j] - z.column(j).mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn lr_removes_linear_confounding() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 500;
        let p = 4;
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(1.0..2.0)).collect();
        let noise = sample_ggm(&SymmetricParam::zeros(p), n, &mut rng).unwrap();
        let z = DMatrix::from_fn(n, p, |i, j| beta[j] * g[i] + noise[(i, j)]);
        let data = ConfoundedDataset::new(g, z).unwrap();
        let config = SolverConfig::default();
        // noise gradients are O(n^-1/2); the confounded correlations are O(1)
        let grid = [1.0, 0.5, 0.2];
        let lr_qf = assemble_quadratic(&LinearResidualDesign.train_design(&data).unwrap());
        let raw_qf = assemble_quadratic(&ProfileDesign::raw(&data).unwrap());
        let lr = fit_path(&lr_qf, &grid, &config).unwrap();
        let raw = fit_path(&raw_qf, &grid, &config).unwrap();
        assert_eq!(lr.points[2].theta.support_size(0.0), 0);
        assert!(raw.points[2].theta.support_size(0.0) > 0);
    }

    #[test]
    fn con_on_independent_data_is_nearly_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4000;
        let z = sample_ggm(&SymmetricParam::zeros(5), n, &mut rng).unwrap();
        let g = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let data = ConfoundedDataset::new(g, z).unwrap();
        let con = fit_con_ggm(&data, &SolverConfig::default()).unwrap();
        let last = con.path.points.last().unwrap();
        assert_eq!(last.theta.p(), 5);
        let off = last.theta.offdiag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(off < 0.05, "{off}");
    }

    #[test]
    fn con_collinear_confounder_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 300;
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let noise = sample_ggm(&SymmetricParam::zeros(3), n, &mut rng).unwrap();
        let (mean, sd) = JointConfounderDesign::standardization(&g);
        let z = DMatrix::from_fn(n, 3, |i, j| if j == 0 { (g[i] - mean) / sd } else { noise[(i, j)] });
        let data = ConfoundedDataset::new(g, z).unwrap();
        let joint = fit_con_joint(&data, &SolverConfig::default()).unwrap();
        let last = joint.points.last().unwrap();
        let idx = last.theta.index();
        let (m, _) = last
            .theta
            .offdiag()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap();
        assert_eq!(idx.pairs().nth(m).unwrap(), (0, 1));
    }

    #[test]
    fn tv_with_huge_bandwidth_is_the_pooled_lasso() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (data, _) = simulate_dataset(4, 100, &mut rng).unwrap();
        let config = SolverConfig::default();
        let kernel = KernelSpec::new(KernelFamily::Gaussian, 1e12).unwrap();
        let tv = fit_tv_ggm(&data, 0.0, &kernel, &config).unwrap();
        assert!(max_abs_diff(&tv.path, &plain_on_all(&data, &config)) < 1e-10);

        // every sample at the evaluation point
        let flat = ConfoundedDataset::new(vec![0.0; data.n()], data.z().clone()).unwrap();
        let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 1.0).unwrap();
        let tv = fit_tv_ggm(&flat, 0.0, &kernel, &config).unwrap();
        assert!(max_abs_diff(&tv.path, &plain_on_all(&flat, &config)) < 1e-10);
    }

    #[test]
    fn tv_weight_scale_moves_lambda_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (data, _) = simulate_dataset(4, 200, &mut rng).unwrap();
        let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 60.0).unwrap();
        let w = tv_weights(data.g(), 0.0, &kernel).unwrap();
        assert!((w.iter().sum::<f64>() / w.len() as f64 - 1.0).abs() < 1e-12);
        let c = 3.5;
        let wc: Vec<f64> = w.iter().map(|v| v * c).collect();
        let raw = ProfileDesign::raw(&data).unwrap();
        let qf = assemble_quadratic(&raw.weighted(&w).unwrap());
        let qfc = assemble_quadratic(&raw.weighted(&wc).unwrap());
        let grid = lambda_grid(lambda_max(&qf).unwrap(), 20, 0.05);
        let grid_c: Vec<f64> = grid.iter().map(|l| l * c).collect();
        let config = SolverConfig { tol: 1e-10, ..SolverConfig::default() };
        let a = fit_path(&qf, &grid, &config).unwrap();
        let b = fit_path(&qfc, &grid_c, &config).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-8);
    }

    #[test]
    fn tv_rejects_thin_kernel_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (data, _) = simulate_dataset(5, 100, &mut rng).unwrap();
        let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 2.0).unwrap();
        assert!(matches!(
            fit_tv_ggm(&data, 0.0, &kernel, &SolverConfig::default()),
            Err(Error::EffectiveSampleTooSmall { .. })
        ));
    }

    #[test]
    fn tv_average_of_one_point_is_the_point_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let (data, _) = simulate_dataset(4, 200, &mut rng).unwrap();
        let kernel = KernelSpec::new(KernelFamily::Epanechnikov, 80.0).unwrap();
        let config = SolverConfig::default();
        let point = fit_tv_ggm(&data, 0.0, &kernel, &config).unwrap();
        let avg = fit_tv_ggm_averaged(&data, &[0.0], &kernel, &config).unwrap();
        assert_eq!(point.path.lambdas(), avg.path.lambdas());
        assert!(max_abs_diff(&point.path, &avg.path) == 0.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("glasso".parse::<Method>().is_err());
    }
}
