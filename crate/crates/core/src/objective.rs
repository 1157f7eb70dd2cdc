//! The profiled pseudo-likelihood loss `F = -l_PPL / n` over the
//! unique-entry parameterization.
//!
//! `F(theta) = (1/n) sum_j 1/2 || Yp_j - Xp_j beta_j(theta) ||^2`, where
//! `beta_j` is column `j` of the symmetric parameter with its diagonal
//! entry in slot `j` as the intercept. An off-diagonal coordinate `(j, k)`
//! appears in both regression `j` and regression `k`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::ProfileDesign;
use crate::model::{FlatIndex, SymmetricParam};

fn check_dims(theta: &SymmetricParam, pd: &ProfileDesign) -> Result<()> {
    if theta.p() != pd.p() {
        return Err(Error::DimensionMismatch {
            expected: pd.p(),
            found: theta.p(),
        });
    }
    Ok(())
}

/// Residuals `Xp_j beta_j - Yp_j` for every node.
fn residuals(theta: &SymmetricParam, pd: &ProfileDesign) -> Vec<DVector<f64>> {
    (0..pd.p())
        .map(|j| pd.xp(j) * theta.column(j) - pd.yp(j))
        .collect()
}

pub fn ppl_value(theta: &SymmetricParam, pd: &ProfileDesign) -> Result<f64> {
    check_dims(theta, pd)?;
    let n = pd.n() as f64;
    Ok(residuals(theta, pd)
        .iter()
        .map(|r| 0.5 * r.norm_squared())
        .sum::<f64>()
        / n)
}

/// Exact gradient of [`ppl_value`] in the flat layout.
pub fn ppl_gradient(theta: &SymmetricParam, pd: &ProfileDesign) -> Result<Vec<f64>> {
    check_dims(theta, pd)?;
    let p = pd.p();
    let n = pd.n() as f64;
    let idx = FlatIndex::new(p);
    let mut grad = vec![0.0; idx.len()];
    for (j, r) in residuals(theta, pd).iter().enumerate() {
        let per_node = pd.xp(j).tr_mul(r);
        for k in 0..p {
            grad[idx.flat(k, j)] += per_node[k] / n;
        }
    }
    Ok(grad)
}

/// `F(theta) = 1/2 theta^T H theta - b^T theta + c` in the flat layout.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    index: FlatIndex,
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
}

impl QuadraticForm {
    pub fn new(p: usize, hessian: DMatrix<f64>, linear: DVector<f64>, constant: f64) -> Result<Self> {
        let index = FlatIndex::new(p);
        let m = index.len();
        if hessian.shape() != (m, m) || linear.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: linear.len(),
            });
        }
        Ok(Self {
            index,
            hessian,
            linear,
            constant,
        })
    }

    pub fn index(&self) -> FlatIndex {
        self.index
    }

    pub fn p(&self) -> usize {
        self.index.p()
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Per-coordinate curvature `a_m = H_mm`.
    pub fn curvature(&self, m: usize) -> f64 {
        self.hessian[(m, m)]
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let t = DVector::from_column_slice(theta);
        0.5 * t.dot(&(&self.hessian * &t)) - self.linear.dot(&t) + self.constant
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let t = DVector::from_column_slice(theta);
        (&self.hessian * &t - &self.linear).as_slice().to_vec()
    }

    pub fn value_of(&self, theta: &SymmetricParam) -> f64 {
        self.value(&theta.to_flat())
    }
}

/// Gram blocks of every node design folded into a single quadratic.
pub fn assemble_quadratic(pd: &ProfileDesign) -> QuadraticForm {
    let p = pd.p();
    let n = pd.n() as f64;
    let idx = FlatIndex::new(p);
    let blocks: Vec<(DMatrix<f64>, DVector<f64>, f64)> = (0..p)
        .into_par_iter()
        .map(|j| {
            let x = pd.xp(j);
            let y = pd.yp(j);
            (x.tr_mul(x), x.tr_mul(y), 0.5 * y.norm_squared())
        })
        .collect();
    let mut hessian = DMatrix::zeros(idx.len(), idx.len());
    let mut linear = DVector::zeros(idx.len());
    let mut constant = 0.0;
    for (j, (gram, xty, c)) in blocks.into_iter().enumerate() {
        for k in 0..p {
            let mk = idx.flat(k, j);
            linear[mk] += xty[k] / n;
            for l in 0..p {
                hessian[(mk, idx.flat(l, j))] += gram[(k, l)] / n;
            }
        }
        constant += c / n;
    }
    QuadraticForm {
        index: idx,
        hessian,
        linear,
        constant,
    }
}
