//! L1-penalized minimization of a [`QuadraticForm`] by cyclic coordinate
//! descent.
//!
//! Only off-diagonal coordinates are penalized; the diagonal (intercept)
//! coordinates are free. Regularization paths are warm-started and use the
//! sequential strong rule: at `lambda_k` an off-diagonal coordinate is
//! skipped when `|grad_m F(theta(lambda_{k-1}))| < 2 lambda_k - lambda_{k-1}`.
//! Skipped coordinates are KKT-checked after convergence and re-admitted
//! until none violates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::SymmetricParam;
use crate::objective::QuadraticForm;

/// Slack on `|grad| <= lambda` before a screened coordinate is re-admitted.
const SCREEN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvSelection {
    /// Plain argmin of the mean held-out loss.
    Min,
    /// Largest lambda whose mean loss is within one sd of the minimum.
    OneStandardError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_sweeps: usize,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub screening: bool,
    pub folds: usize,
    pub seed: u64,
    pub cv_selection: CvSelection,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 10_000,
            n_lambda: 100,
            lambda_min_ratio: 0.01,
            screening: true,
            folds: 10,
            seed: 0,
            cv_selection: CvSelection::Min,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if self.n_lambda < 1 {
            return Err(Error::InvalidInput("n_lambda must be at least 1".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidInput(format!(
                "lambda_min_ratio must lie in (0, 1), got {}",
                self.lambda_min_ratio
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidInput("need at least 2 folds".into()));
        }
        Ok(())
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Diagonal coordinates at their unpenalized optimum, off-diagonals zero.
pub fn intercept_only(qf: &QuadraticForm) -> Vec<f64> {
    let idx = qf.index();
    let h = qf.hessian();
    let b = qf.linear();
    let mut theta = vec![0.0; qf.dim()];
    // diagonal coordinates belong to distinct regressions, so H_DD is diagonal
    for m in 0..idx.p() {
        let a = h[(m, m)];
        if a > 0.0 {
            theta[m] = b[m] / a;
        }
    }
    theta
}

/// Smallest `lambda` at which every off-diagonal coordinate is zero.
pub fn lambda_max(qf: &QuadraticForm) -> Result<f64> {
    if qf.hessian().iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("all-zero design".into()));
    }
    let theta = intercept_only(qf);
    let grad = qf.gradient(&theta);
    let p = qf.p();
    Ok(grad[p..].iter().fold(0.0, |acc, g| acc.max(g.abs())))
}

/// `n_lambda` log-spaced values from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_grid(lambda_max: f64, n_lambda: usize, ratio: f64) -> Vec<f64> {
    if n_lambda == 1 || lambda_max <= 0.0 {
        return vec![lambda_max.max(0.0)];
    }
    let lo = ratio.ln();
    (0..n_lambda)
        .map(|k| lambda_max * (lo * k as f64 / (n_lambda - 1) as f64).exp())
        .collect()
}

/// Largest violation of the optimality conditions of `F + lambda ||offdiag||_1`.
pub fn kkt_violation(qf: &QuadraticForm, theta: &[f64], lambda: f64) -> f64 {
    let grad = qf.gradient(theta);
    kkt_from_gradient(qf, theta, &grad, lambda)
}

fn kkt_from_gradient(qf: &QuadraticForm, theta: &[f64], grad: &[f64], lambda: f64) -> f64 {
    let idx = qf.index();
    let mut worst = 0.0f64;
    for m in 0..theta.len() {
        let g = grad[m];
        let v = if idx.is_diag(m) {
            g.abs()
        } else if theta[m] > 0.0 {
            (g + lambda).abs()
        } else if theta[m] < 0.0 {
            (g - lambda).abs()
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

fn penalized_objective(qf: &QuadraticForm, theta: &[f64], lambda: f64) -> f64 {
    let p = qf.p();
    qf.value(theta) + lambda * theta[p..].iter().map(|v| v.abs()).sum::<f64>()
}

/// Coordinate descent state: iterate and the running gradient `H theta - b`.
struct Descent<'a> {
    qf: &'a QuadraticForm,
    theta: Vec<f64>,
    grad: Vec<f64>,
    sweeps: usize,
}

impl<'a> Descent<'a> {
    fn new(qf: &'a QuadraticForm, theta: Vec<f64>) -> Self {
        let grad = qf.gradient(&theta);
        Self {
            qf,
            theta,
            grad,
            sweeps: 0,
        }
    }

    fn refresh_gradient(&mut self) {
        self.grad = self.qf.gradient(&self.theta);
    }

    fn update(&mut self, m: usize, lambda: f64) -> f64 {
        let h = self.qf.hessian();
        let a = h[(m, m)];
        let old = self.theta[m];
        if a <= 0.0 {
            return 0.0;
        }
        let z = a * old - self.grad[m];
        let new = if self.qf.index().is_diag(m) {
            z / a
        } else {
            soft_threshold(z, lambda) / a
        };
        let delta = new - old;
        if delta != 0.0 {
            self.theta[m] = new;
            for (g, hm) in self.grad.iter_mut().zip(h.column(m).iter()) {
                *g += delta * hm;
            }
        }
        delta.abs()
    }

    fn sweep(&mut self, coords: &[usize], lambda: f64) -> f64 {
        self.sweeps += 1;
        coords
            .iter()
            .fold(0.0f64, |acc, &m| acc.max(self.update(m, lambda)))
    }

    /// Full sweeps interleaved with active-set cycling until a full sweep
    /// moves no coordinate by more than `tol`. Returns whether it converged.
    fn run(&mut self, eligible: &[bool], lambda: f64, config: &SolverConfig) -> bool {
        let idx = self.qf.index();
        let all: Vec<usize> = (0..self.theta.len()).filter(|&m| eligible[m]).collect();
        loop {
            if self.sweeps >= config.max_sweeps {
                return false;
            }
            if self.sweep(&all, lambda) < config.tol {
                return true;
            }
            loop {
                if self.sweeps >= config.max_sweeps {
                    return false;
                }
                let active: Vec<usize> = all
                    .iter()
                    .copied()
                    .filter(|&m| idx.is_diag(m) || self.theta[m] != 0.0)
                    .collect();
                if self.sweep(&active, lambda) < config.tol {
                    break;
                }
            }
        }
    }

    /// Solves the active-set stationarity system exactly and keeps it when
    /// the signs agree and the eligible inactive coordinates stay feasible.
    fn polish(&mut self, eligible: &[bool], lambda: f64) {
        let idx = self.qf.index();
        let active: Vec<usize> = (0..self.theta.len())
            .filter(|&m| eligible[m] && (idx.is_diag(m) || self.theta[m] != 0.0))
            .collect();
        let h = self.qf.hessian();
        let b = self.qf.linear();
        let k = active.len();
        let sub = DMatrix::from_fn(k, k, |r, c| h[(active[r], active[c])]);
        let sign = |m: usize| {
            if idx.is_diag(m) {
                0.0
            } else {
                self.theta[m].signum()
            }
        };
        let rhs = DVector::from_fn(k, |r, _| {
            let m = active[r];
            let mut v = b[m] - lambda * sign(m);
            // coordinates outside the eligible set keep their values
            for (c, &t) in self.theta.iter().enumerate() {
                if !eligible[c] && t != 0.0 {
                    v -= h[(m, c)] * t;
                }
            }
            v
        });
        let Some(chol) = sub.cholesky() else {
            return;
        };
        let sol = chol.solve(&rhs);
        let mut candidate = self.theta.clone();
        for (r, &m) in active.iter().enumerate() {
            if !idx.is_diag(m) && sol[r].signum() != sign(m) {
                return;
            }
            candidate[m] = sol[r];
        }
        let grad = self.qf.gradient(&candidate);
        let feasible = (0..candidate.len())
            .filter(|&m| eligible[m] && !idx.is_diag(m) && candidate[m] == 0.0)
            .all(|m| grad[m].abs() <= lambda);
        if !feasible {
            return;
        }
        let before = penalized_objective(self.qf, &self.theta, lambda);
        let after = penalized_objective(self.qf, &candidate, lambda);
        if after <= before + 1e-12 * (1.0 + before.abs()) {
            self.theta = candidate;
            self.grad = grad;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleFit {
    pub theta: SymmetricParam,
    pub objective: f64,
    pub sweeps: usize,
    pub kkt_violation: f64,
    pub converged: bool,
}

/// Minimizer of `F(theta) + lambda * sum_{j<k} |theta_jk|` from a warm start.
/// On non-convergence the last iterate is returned with `converged = false`.
pub fn fit_single(
    qf: &QuadraticForm,
    lambda: f64,
    warm: &SymmetricParam,
    config: &SolverConfig,
) -> Result<SingleFit> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {lambda}")));
    }
    if warm.p() != qf.p() {
        return Err(Error::DimensionMismatch {
            expected: qf.p(),
            found: warm.p(),
        });
    }
    let eligible = vec![true; qf.dim()];
    let mut cd = Descent::new(qf, warm.to_flat());
    let converged = cd.run(&eligible, lambda, config);
    if converged {
        cd.polish(&eligible, lambda);
    }
    cd.refresh_gradient();
    let kkt = kkt_from_gradient(qf, &cd.theta, &cd.grad, lambda);
    Ok(SingleFit {
        objective: penalized_objective(qf, &cd.theta, lambda),
        theta: SymmetricParam::from_flat(qf.p(), &cd.theta)?,
        sweeps: cd.sweeps,
        kkt_violation: kkt,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub lambda: f64,
    pub theta: SymmetricParam,
    /// `F + lambda * ||offdiag||_1` at the solution.
    pub objective: f64,
    pub active: usize,
    pub sweeps: usize,
    pub kkt_violation: f64,
    pub repairs: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitPath {
    pub points: Vec<PathPoint>,
}

impl FitPath {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|pt| pt.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_repairs(&self) -> usize {
        self.points.iter().map(|pt| pt.repairs).sum()
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|pt| pt.converged)
    }

    /// Path point whose lambda is closest to `lambda` on a log scale.
    pub fn nearest(&self, lambda: f64) -> Option<&PathPoint> {
        let key = |pt: &PathPoint| (pt.lambda.max(1e-300).ln() - lambda.max(1e-300).ln()).abs();
        self.points
            .iter()
            .min_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal))
    }
}

/// Warm-started fits along a strictly decreasing `lambdas`.
pub fn fit_path(qf: &QuadraticForm, lambdas: &[f64], config: &SolverConfig) -> Result<FitPath> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("empty lambda sequence".into()));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput("lambdas must be finite and nonnegative".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("lambda sequence must be strictly decreasing".into()));
    }
    let idx = qf.index();
    let dim = qf.dim();
    let mut cd = Descent::new(qf, intercept_only(qf));
    let mut prev_lambda = lambdas[0].max(lambda_max(qf).unwrap_or(0.0));
    let mut points = Vec::with_capacity(lambdas.len());

    for &lambda in lambdas {
        cd.sweeps = 0;
        cd.refresh_gradient();
        let mut eligible: Vec<bool> = if config.screening {
            let cut = 2.0 * lambda - prev_lambda;
            (0..dim)
                .map(|m| idx.is_diag(m) || cd.theta[m] != 0.0 || cd.grad[m].abs() >= cut)
                .collect()
        } else {
            vec![true; dim]
        };
        let mut repairs = 0;
        let converged = loop {
            let ok = cd.run(&eligible, lambda, config);
            if ok {
                cd.polish(&eligible, lambda);
            }
            cd.refresh_gradient();
            let violators: Vec<usize> = (0..dim)
                .filter(|&m| !eligible[m] && cd.grad[m].abs() > lambda + SCREEN_SLACK)
                .collect();
            if violators.is_empty() || !ok {
                break ok;
            }
            repairs += violators.len();
            for m in violators {
                eligible[m] = true;
            }
        };
        let kkt = kkt_from_gradient(qf, &cd.theta, &cd.grad, lambda);
        let theta = SymmetricParam::from_flat(qf.p(), &cd.theta)?;
        points.push(PathPoint {
            lambda,
            objective: penalized_objective(qf, &cd.theta, lambda),
            active: theta.support_size(0.0),
            theta,
            sweeps: cd.sweeps,
            kkt_violation: kkt,
            repairs,
            converged,
        });
        prev_lambda = lambda;
    }
    Ok(FitPath { points })
}

/// Default path: the grid of `config` starting at [`lambda_max`].
pub fn fit_default_path(qf: &QuadraticForm, config: &SolverConfig) -> Result<FitPath> {
    let lmax = lambda_max(qf)?;
    fit_path(qf, &lambda_grid(lmax, config.n_lambda, config.lambda_min_ratio), config)
}
