//! Structure-recovery scoring on the off-diagonal support.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SymmetricParam;
use crate::solver::FitPath;

pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn tpr(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    pub fn fpr(&self) -> Option<f64> {
        let neg = self.fp + self.tn;
        (neg > 0).then(|| self.fp as f64 / neg as f64)
    }
}

fn same_p(est: &SymmetricParam, truth: &SymmetricParam) -> Result<()> {
    if est.p() != truth.p() {
        return Err(Error::DimensionMismatch {
            expected: truth.p(),
            found: est.p(),
        });
    }
    Ok(())
}

pub fn support_confusion(
    est: &SymmetricParam,
    truth: &SymmetricParam,
    zero_tol: f64,
) -> Result<Confusion> {
    same_p(est, truth)?;
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (e, t) in est.offdiag().iter().zip(truth.offdiag()) {
        match (e.abs() > zero_tol, t.abs() > zero_tol) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Largest absolute error over the true off-diagonal support.
pub fn support_max_error(est: &SymmetricParam, truth: &SymmetricParam) -> Result<f64> {
    same_p(est, truth)?;
    Ok(est
        .offdiag()
        .iter()
        .zip(truth.offdiag())
        .filter(|(_, t)| **t != 0.0)
        .fold(0.0f64, |acc, (e, t)| acc.max((e - t).abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub lambda: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// One point per path entry, in path order.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    /// Truth has no positives or no negatives, or no estimate has any edge.
    pub degenerate: bool,
}

/// Trapezoid area under `(fpr, tpr)` pairs augmented with `(0,0)` and
/// `(1,1)`; ties on FPR keep the largest TPR.
pub fn trapezoid_auc(pairs: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = pairs.to_vec();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal))
    });
    pts.dedup_by(|later, earlier| later.0 == earlier.0);
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// ROC over the regularization path: one support per lambda.
pub fn roc_auc(path: &FitPath, truth: &SymmetricParam) -> Result<RocCurve> {
    let estimates: Vec<(f64, &SymmetricParam)> =
        path.points.iter().map(|pt| (pt.lambda, &pt.theta)).collect();
    roc_from_estimates(&estimates, truth)
}

/// Same as [`roc_auc`] for arbitrary `(lambda, estimate)` pairs.
pub fn roc_from_estimates(
    estimates: &[(f64, &SymmetricParam)],
    truth: &SymmetricParam,
) -> Result<RocCurve> {
    if estimates.is_empty() {
        return Err(Error::InvalidInput("empty path".into()));
    }
    let mut points = Vec::with_capacity(estimates.len());
    let mut degenerate = false;
    let mut informative = false;
    for (lambda, est) in estimates {
        let c = support_confusion(est, truth, DEFAULT_ZERO_TOL)?;
        informative |= c.tp + c.fp > 0;
        let (fpr, tpr) = match (c.fpr(), c.tpr()) {
            (Some(f), Some(t)) => (f, t),
            _ => {
                degenerate = true;
                (0.0, 0.0)
            }
        };
        points.push(RocPoint {
            lambda: *lambda,
            fpr,
            tpr,
        });
    }
    degenerate |= !informative;
    // a degenerate curve carries no ranking information
    let auc = if degenerate {
        0.5
    } else {
        let pairs: Vec<(f64, f64)> = points.iter().map(|pt| (pt.fpr, pt.tpr)).collect();
        trapezoid_auc(&pairs)
    };
    Ok(RocCurve {
        points,
        auc,
        degenerate,
    })
}

/// ROC of a single estimate obtained by thresholding `|entries|`.
pub fn roc_by_magnitude(est: &SymmetricParam, truth: &SymmetricParam) -> Result<RocCurve> {
    same_p(est, truth)?;
    let mut thresholds: Vec<f64> = est.offdiag().iter().map(|v| v.abs()).collect();
    thresholds.push(0.0);
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    thresholds.dedup();
    let cut: Vec<SymmetricParam> = thresholds
        .iter()
        .map(|&t| {
            let off = est
                .offdiag()
                .iter()
                .map(|v| if v.abs() >= t && v.abs() > 0.0 { 1.0 } else { 0.0 })
                .collect();
            SymmetricParam::new(est.p(), vec![0.0; est.p()], off).expect("same layout")
        })
        .collect();
    let pairs: Vec<(f64, &SymmetricParam)> = thresholds.iter().copied().zip(cut.iter()).collect();
    roc_from_estimates(&pairs, truth)
}
