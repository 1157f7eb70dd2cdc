//! Local-linear kernel smoothing of the confounding term and the profiled
//! node designs built from it.
//!
//! For a query sample `i` and node `j` the smoother row is
//! `S_ij^T = [x_ij^T, 0^T] (D_ij^T W_i D_ij)^{-1} D_ij^T W_i`, where row `r`
//! of `D_ij` is `[iota(g_r) z_{r,-j}^T, ((g_r - g_i)/h) iota(g_r) z_{r,-j}^T]`
//! and `W_i = diag(psi(|g_i - g_r| / h))`. The profiled design replaces
//! `x_ij` by `x_ij - S_ij^T x_j` and `y_ij` by `y_ij - S_ij^T y_j`.
//!
//! [`profile_design`] never materialises `D_ij`: for each query it
//! accumulates the weighted moments of the indicator-scaled augmented basis
//! `[z_r, 1]` once, and reads the `(i, j)` Gram as a principal submatrix.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{node_design, ConfoundedDataset};

/// Reciprocal condition estimate below which a smoother Gram is singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Epanechnikov,
    Gaussian,
}

impl KernelFamily {
    /// Symmetric kernel density `psi(u)`.
    pub fn density(self, u: f64) -> f64 {
        match self {
            KernelFamily::Epanechnikov => {
                let v = 1.0 - u * u;
                if v > 0.0 {
                    0.75 * v
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(KernelFamily::Epanechnikov),
            "gaussian" | "normal" => Ok(KernelFamily::Gaussian),
            other => Err(Error::InvalidInput(format!("unknown kernel family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { family, bandwidth })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `psi(|center - other| / h)`.
    pub fn weight(&self, center: f64, other: f64) -> f64 {
        self.family.density((center - other).abs() / self.bandwidth)
    }
}

/// The down-weighting function applied to samples with small confounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndicatorSpec {
    /// `1 - exp(-k^2 g^2) / 2`.
    Soft { k: f64 },
    /// `1` when `|g| >= g_star`, `inside` otherwise.
    Step { g_star: f64, inside: f64 },
    /// Same value everywhere.
    Constant(f64),
}

impl IndicatorSpec {
    pub fn soft(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "indicator coefficient must be positive, got {k}"
            )));
        }
        Ok(IndicatorSpec::Soft { k })
    }

    pub fn value(&self, g: f64) -> f64 {
        match *self {
            IndicatorSpec::Soft { k } => 1.0 - 0.5 * (-(k * k) * g * g).exp(),
            IndicatorSpec::Step { g_star, inside } => {
                if g.abs() >= g_star {
                    1.0
                } else {
                    inside
                }
            }
            IndicatorSpec::Constant(c) => c,
        }
    }
}

pub fn indicator(g: f64, spec: &IndicatorSpec) -> f64 {
    spec.value(g)
}

/// Diagonal of `W_i`.
pub fn build_weight_matrix(i: usize, g: &[f64], spec: &KernelSpec) -> Result<DVector<f64>> {
    let gi = *g.get(i).ok_or(Error::IndexOutOfRange {
        index: i,
        len: g.len(),
    })?;
    Ok(DVector::from_iterator(
        g.len(),
        g.iter().map(|&gr| spec.weight(gi, gr)),
    ))
}

/// The `n x 2p` auxiliary matrix `D_ij`.
pub fn build_dij(
    i: usize,
    j: usize,
    dataset: &ConfoundedDataset,
    ind: &IndicatorSpec,
    spec: &KernelSpec,
) -> Result<DMatrix<f64>> {
    let n = dataset.n();
    let p = dataset.p();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let x = node_design(dataset, j)?.x;
    let g = dataset.g();
    let h = spec.bandwidth();
    Ok(DMatrix::from_fn(n, 2 * p, |r, c| {
        let iota = ind.value(g[r]);
        if c < p {
            iota * x[(r, c)]
        } else {
            (g[r] - g[i]) / h * iota * x[(r, c - p)]
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherOptions {
    /// Relative ridge added to the equilibrated Gram diagonal; `0` keeps the
    /// exact local-linear smoother.
    pub ridge: f64,
    pub rcond_threshold: f64,
}

impl Default for SmootherOptions {
    fn default() -> Self {
        Self {
            ridge: 0.0,
            rcond_threshold: RCOND_THRESHOLD,
        }
    }
}

/// Cholesky factor of an equilibrated Gram `E^{-1} G E^{-1}`.
struct GramFactor {
    scale: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl GramFactor {
    /// Returns the factor, or the reciprocal condition estimate on failure.
    fn new(gram: &DMatrix<f64>, opts: &SmootherOptions) -> std::result::Result<Self, f64> {
        let m = gram.nrows();
        let mut scale = DVector::zeros(m);
        for k in 0..m {
            let d = gram[(k, k)];
            if d > 0.0 && d.is_finite() {
                scale[k] = d.sqrt();
            } else if opts.ridge > 0.0 {
                scale[k] = 1.0;
            } else {
                return Err(0.0);
            }
        }
        let mut eq = DMatrix::from_fn(m, m, |a, b| gram[(a, b)] / (scale[a] * scale[b]));
        if opts.ridge > 0.0 {
            for k in 0..m {
                eq[(k, k)] += opts.ridge;
            }
        }
        let norm1 = one_norm(&eq);
        let chol = eq.cholesky().ok_or(0.0)?;
        let inv_norm1 = inverse_one_norm_estimate(&chol, m);
        let rcond = 1.0 / (norm1 * inv_norm1);
        if !(rcond >= opts.rcond_threshold) {
            return Err(if rcond.is_finite() { rcond } else { 0.0 });
        }
        Ok(Self { scale, chol })
    }

    /// `G^{-1} v`.
    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let scaled = v.component_div(&self.scale);
        self.chol.solve(&scaled).component_div(&self.scale)
    }
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Hager's estimate of `||A^{-1}||_1` for symmetric `A` from its Cholesky factor.
fn inverse_one_norm_estimate(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, m: usize) -> f64 {
    let mut x = DVector::from_element(m, 1.0 / m as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = chol.solve(&x);
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = chol.solve(&xi);
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .map(|(k, v)| (k, v.abs()))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if zmax <= z.dot(&x) {
            break;
        }
        x.fill(0.0);
        x[jmax] = 1.0;
    }
    est
}

/// Smoother row `S_ij` (length `n`), assembled directly from `D_ij` and `W_i`.
pub fn smoother_row(
    i: usize,
    j: usize,
    dataset: &ConfoundedDataset,
    ind: &IndicatorSpec,
    spec: &KernelSpec,
    opts: &SmootherOptions,
) -> Result<DVector<f64>> {
    let d = build_dij(i, j, dataset, ind, spec)?;
    let w = build_weight_matrix(i, dataset.g(), spec)?;
    let p = dataset.p();
    let mut wd = d.clone();
    for (r, mut row) in wd.row_iter_mut().enumerate() {
        row *= w[r];
    }
    let gram = d.transpose() * &wd;
    let factor = GramFactor::new(&gram, opts).map_err(|rcond| Error::SingularSmoother {
        sample: i,
        node: j,
        rcond,
    })?;
    let x = node_design(dataset, j)?.x;
    let mut lead = DVector::zeros(2 * p);
    for k in 0..p {
        lead[k] = x[(i, k)];
    }
    let t = factor.solve(&lead);
    Ok(wd * t)
}

/// Node designs after the profile transform `(1_i - S_ij)^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileDesign {
    xp: Vec<DMatrix<f64>>,
    yp: Vec<DVector<f64>>,
    ridge: f64,
}

impl ProfileDesign {
    pub fn new(xp: Vec<DMatrix<f64>>, yp: Vec<DVector<f64>>) -> Result<Self> {
        let p = xp.len();
        if p < 2 || yp.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: yp.len(),
            });
        }
        let n = yp[0].len();
        for (x, y) in xp.iter().zip(&yp) {
            if x.nrows() != n || y.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: x.nrows().max(y.len()),
                });
            }
            if x.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: x.ncols(),
                });
            }
        }
        if xp.iter().any(|x| x.iter().any(|v| !v.is_finite()))
            || yp.iter().any(|y| y.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput("profile design has non-finite entries".into()));
        }
        Ok(Self { xp, yp, ridge: 0.0 })
    }

    /// Unsmoothed node designs (`S_ij = 0`): the plain pseudo-likelihood.
    pub fn raw(dataset: &ConfoundedDataset) -> Result<Self> {
        let mut xp = Vec::with_capacity(dataset.p());
        let mut yp = Vec::with_capacity(dataset.p());
        for j in 0..dataset.p() {
            let nd = node_design(dataset, j)?;
            xp.push(nd.x);
            yp.push(nd.y);
        }
        Self::new(xp, yp)
    }

    /// Each sample's squared residual weighted by `weights[i]`.
    pub fn weighted(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let xp = self
            .xp
            .iter()
            .map(|x| {
                let mut x = x.clone();
                for (r, mut row) in x.row_iter_mut().enumerate() {
                    row *= sq[r];
                }
                x
            })
            .collect();
        let yp = self.yp.iter().map(|y| y.component_mul(&DVector::from_column_slice(&sq))).collect();
        Ok(Self {
            xp,
            yp,
            ridge: self.ridge,
        })
    }

    pub fn n(&self) -> usize {
        self.yp[0].len()
    }

    pub fn p(&self) -> usize {
        self.xp.len()
    }

    pub fn xp(&self, j: usize) -> &DMatrix<f64> {
        &self.xp[j]
    }

    pub fn yp(&self, j: usize) -> &DVector<f64> {
        &self.yp[j]
    }

    /// Ridge used in the smoother, `0` when the exact smoother was used.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

/// Profiled designs of `dataset` smoothed against itself.
pub fn profile_design(
    dataset: &ConfoundedDataset,
    ind: &IndicatorSpec,
    spec: &KernelSpec,
    opts: &SmootherOptions,
) -> Result<ProfileDesign> {
    profile_rows(dataset, dataset, ind, spec, opts)
}

/// Profiled designs for the samples of `query`, with smoother rows built
/// from the samples of `reference`. Used to score held-out samples.
pub fn profile_rows(
    query: &ConfoundedDataset,
    reference: &ConfoundedDataset,
    ind: &IndicatorSpec,
    spec: &KernelSpec,
    opts: &SmootherOptions,
) -> Result<ProfileDesign> {
    let p = reference.p();
    if query.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: query.p(),
        });
    }
    let moments = ReferenceBasis::new(reference, ind);
    let rows: Vec<Result<QueryRows>> = (0..query.n())
        .into_par_iter()
        .map(|q| moments.query_rows(q, query, spec, opts))
        .collect();

    let n = query.n();
    let mut xp = vec![DMatrix::zeros(n, p); p];
    let mut yp = vec![DVector::zeros(n); p];
    for (q, row) in rows.into_iter().enumerate() {
        let row = row?;
        for j in 0..p {
            for k in 0..p {
                xp[j][(q, k)] = row.x[j * p + k];
            }
            yp[j][q] = row.y[j];
        }
    }
    let mut pd = ProfileDesign::new(xp, yp)?;
    pd.ridge = opts.ridge;
    Ok(pd)
}

/// Augmented basis `a_r = [z_r, 1]` and indicator values of the reference set.
struct ReferenceBasis<'a> {
    reference: &'a ConfoundedDataset,
    iota: Vec<f64>,
}

struct QueryRows {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl<'a> ReferenceBasis<'a> {
    fn new(reference: &'a ConfoundedDataset, ind: &IndicatorSpec) -> Self {
        let iota = reference.g().iter().map(|&g| ind.value(g)).collect();
        Self { reference, iota }
    }

    fn query_rows(
        &self,
        q: usize,
        query: &ConfoundedDataset,
        spec: &KernelSpec,
        opts: &SmootherOptions,
    ) -> Result<QueryRows> {
        let p = self.reference.p();
        let a_len = p + 1;
        let b_len = 2 * a_len;
        let gq = query.g()[q];
        let h = spec.bandwidth();
        let zr = self.reference.z();

        // moments: big = sum w iota^2 b b^T, cross = sum w iota b a^T, b = [a; delta a]
        let mut big = DMatrix::<f64>::zeros(b_len, b_len);
        let mut cross = DMatrix::<f64>::zeros(b_len, a_len);
        let mut b = vec![0.0; b_len];
        for r in 0..self.reference.n() {
            let gr = self.reference.g()[r];
            let w = spec.weight(gq, gr);
            if w == 0.0 {
                continue;
            }
            let iota = self.iota[r];
            let delta = (gr - gq) / h;
            for k in 0..p {
                b[k] = zr[(r, k)];
            }
            b[p] = 1.0;
            for k in 0..a_len {
                b[a_len + k] = delta * b[k];
            }
            let w2 = w * iota * iota;
            let w1 = w * iota;
            for c in 0..b_len {
                let bc = b[c];
                if bc == 0.0 {
                    continue;
                }
                for r2 in c..b_len {
                    big[(r2, c)] += w2 * b[r2] * bc;
                }
            }
            for c in 0..a_len {
                let ac = b[c];
                if ac == 0.0 {
                    continue;
                }
                for r2 in 0..b_len {
                    cross[(r2, c)] += w1 * b[r2] * ac;
                }
            }
        }
        for c in 0..b_len {
            for r2 in c + 1..b_len {
                big[(c, r2)] = big[(r2, c)];
            }
        }

        let zq = query.z();
        let mut x_out = vec![0.0; p * p];
        let mut y_out = vec![0.0; p];
        let mut sel = vec![0usize; 2 * p];
        for j in 0..p {
            // position k of z_{r,-j} reads basis entry k, except k = j reads the intercept
            for k in 0..p {
                let src = if k == j { p } else { k };
                sel[k] = src;
                sel[p + k] = a_len + src;
            }
            let gram = DMatrix::from_fn(2 * p, 2 * p, |u, v| big[(sel[u], sel[v])]);
            let factor =
                GramFactor::new(&gram, opts).map_err(|rcond| Error::SingularSmoother {
                    sample: q,
                    node: j,
                    rcond,
                })?;
            let mut lead = DVector::zeros(2 * p);
            for k in 0..p {
                lead[k] = if k == j { 1.0 } else { zq[(q, k)] };
            }
            let t = factor.solve(&lead);
            for k in 0..p {
                let col = sel[k];
                let smoothed: f64 = (0..2 * p).map(|u| t[u] * cross[(sel[u], col)]).sum();
                x_out[j * p + k] = lead[k] - smoothed;
            }
            let smoothed_y: f64 = (0..2 * p).map(|u| t[u] * cross[(sel[u], j)]).sum();
            y_out[j] = zq[(q, j)] - smoothed_y;
        }
        Ok(QueryRows { x: x_out, y: y_out })
    }
}

/// `c_h * sd(g) * n^(-1/4)`.
pub fn default_bandwidth(n: usize, g: &[f64], c_h: f64) -> Result<f64> {
    if n < 2 || g.len() < 2 {
        return Err(Error::InvalidInput("bandwidth rule needs n >= 2".into()));
    }
    if !(c_h > 0.0) {
        return Err(Error::InvalidInput(format!("bandwidth constant must be positive, got {c_h}")));
    }
    let m = g.len() as f64;
    let mean = g.iter().sum::<f64>() / m;
    let var = g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Degenerate("confounder has zero variance".into()));
    }
    Ok(c_h * sd * (n as f64).powf(-0.25))
}
