//! Parameterization of the partially linear additive GGM.
//!
//! The conditional density of `Z | G = g` is proportional to
//! `exp{ sum_j w_jj z_j + sum_{j<k} w_jk z_j z_k - 1/2 sum_j z_j^2 }`, so the
//! off-diagonal entries are interactions and the diagonal entries are linear
//! (intercept) terms. The implied conditional precision is `K = I - B` where
//! `B` holds the off-diagonal interactions with a zero diagonal.
//!
//! The literature convention says the *covariance* diagonal is one; the
//! quadratic form above actually fixes the *precision* diagonal at one. This
//! module follows the density.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// `n` observations `z_i` together with their scalar confounder `g_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfoundedDataset {
    g: Vec<f64>,
    z: DMatrix<f64>,
}

impl ConfoundedDataset {
    pub fn new(g: Vec<f64>, z: DMatrix<f64>) -> Result<Self> {
        if g.len() != z.nrows() {
            return Err(Error::DimensionMismatch {
                expected: z.nrows(),
                found: g.len(),
            });
        }
        if g.is_empty() {
            return Err(Error::InvalidInput("dataset needs at least one sample".into()));
        }
        if z.ncols() < 2 {
            return Err(Error::InvalidInput(format!(
                "dataset needs p >= 2 variables, got {}",
                z.ncols()
            )));
        }
        if g.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Self { g, z })
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Samples at the given row indices, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.n(),
            });
        }
        let g = rows.iter().map(|&r| self.g[r]).collect();
        let z = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.z[(rows[i], j)]);
        Self::new(g, z)
    }

    /// Same confounder, replaced observations.
    pub fn with_z(&self, z: DMatrix<f64>) -> Result<Self> {
        Self::new(self.g.clone(), z)
    }
}

/// Bijection between `(j, k)` pairs and positions of the flat parameter
/// vector: the `p` diagonal slots first, then the upper triangle row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatIndex {
    p: usize,
}

impl FlatIndex {
    pub fn new(p: usize) -> Self {
        Self { p }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_offdiag(&self) -> usize {
        self.p * (self.p - 1) / 2
    }

    pub fn len(&self) -> usize {
        self.p + self.n_offdiag()
    }

    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    /// Slot of the off-diagonal pair within the off-diagonal block.
    pub fn offdiag_slot(&self, j: usize, k: usize) -> usize {
        debug_assert!(j != k && j < self.p && k < self.p);
        let (a, b) = if j < k { (j, k) } else { (k, j) };
        a * self.p - a * (a + 1) / 2 + (b - a - 1)
    }

    /// Flat position of entry `(j, k)`; symmetric in its arguments.
    pub fn flat(&self, j: usize, k: usize) -> usize {
        if j == k {
            j
        } else {
            self.p + self.offdiag_slot(j, k)
        }
    }

    /// Inverse of [`FlatIndex::flat`], returning `(j, k)` with `j <= k`.
    pub fn pair(&self, m: usize) -> (usize, usize) {
        if m < self.p {
            return (m, m);
        }
        let mut slot = m - self.p;
        for a in 0..self.p {
            let row = self.p - a - 1;
            if slot < row {
                return (a, a + 1 + slot);
            }
            slot -= row;
        }
        panic!("flat index {m} out of range for p = {}", self.p);
    }

    pub fn is_diag(&self, m: usize) -> bool {
        m < self.p
    }

    /// All off-diagonal pairs `(j, k)`, `j < k`, in slot order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.p).flat_map(move |j| (j + 1..self.p).map(move |k| (j, k)))
    }
}

/// Unique-entry parameterization of a symmetric parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricParam {
    p: usize,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymmetricParam {
    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            diag: vec![0.0; p],
            offdiag: vec![0.0; p * p.saturating_sub(1) / 2],
        }
    }

    pub fn new(p: usize, diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: diag.len(),
            });
        }
        let n_off = p * p.saturating_sub(1) / 2;
        if offdiag.len() != n_off {
            return Err(Error::DimensionMismatch {
                expected: n_off,
                found: offdiag.len(),
            });
        }
        if diag.iter().chain(offdiag.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("parameter contains non-finite values".into()));
        }
        Ok(Self { p, diag, offdiag })
    }

    /// Rebuild from the flat layout of [`FlatIndex`].
    pub fn from_flat(p: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() < p {
            return Err(Error::DimensionMismatch {
                expected: FlatIndex::new(p).len(),
                found: flat.len(),
            });
        }
        Self::new(p, flat[..p].to_vec(), flat[p..].to_vec())
    }

    /// Read diagonal and upper triangle of a square matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let p = m.nrows();
        let idx = FlatIndex::new(p);
        let diag = (0..p).map(|j| m[(j, j)]).collect();
        let offdiag = idx.pairs().map(|(j, k)| m[(j, k)]).collect();
        Self::new(p, diag, offdiag)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn index(&self) -> FlatIndex {
        FlatIndex::new(self.p)
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        if j == k {
            self.diag[j]
        } else {
            self.offdiag[self.index().offdiag_slot(j, k)]
        }
    }

    pub fn set(&mut self, j: usize, k: usize, value: f64) {
        if j == k {
            self.diag[j] = value;
        } else {
            let s = self.index().offdiag_slot(j, k);
            self.offdiag[s] = value;
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.diag.len() + self.offdiag.len());
        v.extend_from_slice(&self.diag);
        v.extend_from_slice(&self.offdiag);
        v
    }

    /// Full symmetric matrix, diagonal included.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.p, |j, k| self.get(j, k))
    }

    /// Coefficients of node `j`'s regression: column `j` with the diagonal
    /// entry acting as intercept.
    pub fn column(&self, j: usize) -> DVector<f64> {
        DVector::from_fn(self.p, |k, _| self.get(k, j))
    }

    pub fn add(&self, other: &SymmetricParam) -> Result<SymmetricParam> {
        if self.p != other.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: other.p,
            });
        }
        let diag = self.diag.iter().zip(&other.diag).map(|(a, b)| a + b).collect();
        let offdiag = self.offdiag.iter().zip(&other.offdiag).map(|(a, b)| a + b).collect();
        Ok(SymmetricParam {
            p: self.p,
            diag,
            offdiag,
        })
    }

    pub fn scaled(&self, c: f64) -> SymmetricParam {
        SymmetricParam {
            p: self.p,
            diag: self.diag.iter().map(|v| v * c).collect(),
            offdiag: self.offdiag.iter().map(|v| v * c).collect(),
        }
    }

    /// Off-diagonal entries larger than `tol` in magnitude.
    pub fn support_size(&self, tol: f64) -> usize {
        self.offdiag.iter().filter(|v| v.abs() > tol).count()
    }
}

/// Design of node `j`'s regression: `x` is `Z` with column `j` replaced by
/// ones, `y` is column `j` of `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDesign {
    pub j: usize,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

pub fn node_design(dataset: &ConfoundedDataset, j: usize) -> Result<NodeDesign> {
    let p = dataset.p();
    if j >= p {
        return Err(Error::IndexOutOfRange { index: j, len: p });
    }
    let z = dataset.z();
    let mut x = z.clone();
    x.column_mut(j).fill(1.0);
    let y = z.column(j).into_owned();
    Ok(NodeDesign { j, x, y })
}

/// `K = I - B`: unit diagonal, minus the interactions off the diagonal.
/// The diagonal of `theta` does not enter.
pub fn precision_from_param(theta: &SymmetricParam) -> DMatrix<f64> {
    let p = theta.p();
    DMatrix::from_fn(p, p, |j, k| if j == k { 1.0 } else { -theta.get(j, k) })
}

/// GGM with parameter `theta`, prepared for repeated sampling. Draws are
/// `N(K^{-1} eta, K^{-1})` with `eta = diag(theta)`.
#[derive(Debug, Clone)]
pub struct GgmSampler {
    chol_l: DMatrix<f64>,
    mean: DVector<f64>,
}

impl GgmSampler {
    pub fn new(theta: &SymmetricParam) -> Result<Self> {
        let k = precision_from_param(theta);
        let chol = k.cholesky().ok_or(Error::NotPositiveDefinite)?;
        let eta = DVector::from_column_slice(theta.diag());
        let mean = chol.solve(&eta);
        Ok(Self {
            chol_l: chol.l(),
            mean,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// One draw `mean + L^{-T} e`, `e ~ N(0, I)`, where `K = L L^T`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let p = self.mean.len();
        let e = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lt = self.chol_l.transpose();
        let x = lt
            .solve_upper_triangular(&e)
            .expect("Cholesky factor has a positive diagonal");
        x + &self.mean
    }
}

/// `n` i.i.d. rows from the GGM with parameter `theta`.
pub fn sample_ggm<R: Rng + ?Sized>(
    theta: &SymmetricParam,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let sampler = GgmSampler::new(theta)?;
    let mut out = DMatrix::zeros(n, theta.p());
    for i in 0..n {
        let row = sampler.draw(rng);
        for (j, v) in row.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// `sum_i sum_j { z_ij eta_ij - z_ij^2 / 2 - eta_ij^2 / 2 }` with
/// `eta_ij = z_{i,-j}^T Omega(g_i)_{.j}`; one parameter per sample.
pub fn log_pseudo_likelihood(
    dataset: &ConfoundedDataset,
    omega_per_sample: &[SymmetricParam],
) -> Result<f64> {
    let n = dataset.n();
    let p = dataset.p();
    if omega_per_sample.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: omega_per_sample.len(),
        });
    }
    if let Some(bad) = omega_per_sample.iter().find(|o| o.p() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: bad.p(),
        });
    }
    let z = dataset.z();
    let mut total = 0.0;
    for (i, omega) in omega_per_sample.iter().enumerate() {
        for j in 0..p {
            let mut eta = omega.get(j, j);
            for k in (0..p).filter(|&k| k != j) {
                eta += omega.get(k, j) * z[(i, k)];
            }
            let zij = z[(i, j)];
            total += zij * eta - 0.5 * zij * zij - 0.5 * eta * eta;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ds(g: Vec<f64>, rows: &[&[f64]]) -> ConfoundedDataset {
        let p = rows[0].len();
        let z = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        ConfoundedDataset::new(g, z).unwrap()
    }

    #[test]
    fn node_design_replaces_component_with_one() {
        let d = ds(vec![0.0], &[&[2.0, 3.0]]);
        let nd0 = node_design(&d, 0).unwrap();
        assert_eq!(nd0.x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 3.0]);
        assert_eq!(nd0.y[0], 2.0);
        let nd1 = node_design(&d, 1).unwrap();
        assert_eq!(nd1.x.row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 1.0]);
        assert!(matches!(node_design(&d, 2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn node_design_on_zero_data() {
        let d = ConfoundedDataset::new(vec![0.0; 4], DMatrix::zeros(4, 3)).unwrap();
        for j in 0..3 {
            let nd = node_design(&d, j).unwrap();
            for k in 0..3 {
                let want = if k == j { 1.0 } else { 0.0 };
                assert!(nd.x.column(k).iter().all(|&v| v == want));
            }
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(ConfoundedDataset::new(vec![0.0], DMatrix::zeros(1, 1)).is_err());
        assert!(ConfoundedDataset::new(vec![0.0, 1.0], DMatrix::zeros(1, 2)).is_err());
        assert!(ConfoundedDataset::new(vec![f64::NAN], DMatrix::zeros(1, 2)).is_err());
        assert!(ConfoundedDataset::new(vec![], DMatrix::zeros(0, 2)).is_err());
    }

    #[test]
    fn flat_index_roundtrip() {
        for p in 2..7 {
            let idx = FlatIndex::new(p);
            for m in 0..idx.len() {
                let (j, k) = idx.pair(m);
                assert_eq!(idx.flat(j, k), m);
                assert_eq!(idx.flat(k, j), m);
            }
            let slots: Vec<_> = idx.pairs().map(|(j, k)| idx.offdiag_slot(j, k)).collect();
            assert_eq!(slots, (0..idx.n_offdiag()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn precision_examples() {
        let k = precision_from_param(&SymmetricParam::zeros(3));
        assert_eq!(k, DMatrix::identity(3, 3));

        let t = SymmetricParam::new(2, vec![0.0, 0.0], vec![0.3]).unwrap();
        let k = precision_from_param(&t);
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 1.0]));

        let t = SymmetricParam::new(3, vec![0.7, -1.0, 2.0], vec![0.5, 0.0, 0.0]).unwrap();
        let k = precision_from_param(&t);
        assert_eq!(k[(0, 1)], -0.5);
        assert_eq!(k[(1, 0)], -0.5);
        assert!((0..3).all(|j| k[(j, j)] == 1.0));
        assert_eq!(k[(0, 2)], 0.0);
    }

    #[test]
    fn lpl_zero_cases() {
        let d = ConfoundedDataset::new(vec![0.0; 3], DMatrix::zeros(3, 2)).unwrap();
        let om = vec![SymmetricParam::zeros(2); 3];
        assert_eq!(log_pseudo_likelihood(&d, &om).unwrap(), 0.0);

        let d = ds(vec![0.0], &[&[1.0, 1.0]]);
        let lpl = log_pseudo_likelihood(&d, &[SymmetricParam::zeros(2)]).unwrap();
        assert_eq!(lpl, -1.0);

        assert!(log_pseudo_likelihood(&d, &[]).is_err());
    }

    #[test]
    fn lpl_diagonal_only_is_sum_of_location_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = DMatrix::from_fn(7, 3, |_, _| rng.random_range(-2.0..2.0));
        let d = ConfoundedDataset::new(vec![0.0; 7], z.clone()).unwrap();
        let theta = SymmetricParam::new(3, vec![0.4, -1.2, 0.9], vec![0.0; 3]).unwrap();
        let lpl = log_pseudo_likelihood(&d, &vec![theta.clone(); 7]).unwrap();
        // each term is -(z - mu)^2 / 2 for a Gaussian location model
        let want: f64 = (0..7)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| -0.5 * (z[(i, j)] - theta.diag()[j]).powi(2))
            .sum();
        assert!((lpl - want).abs() < 1e-12);
    }

    #[test]
    fn sampler_rejects_indefinite() {
        let t = SymmetricParam::new(2, vec![0.0; 2], vec![1.5]).unwrap();
        assert!(matches!(GgmSampler::new(&t), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn sampler_reproducible_and_standard_at_zero() {
        let t = SymmetricParam::zeros(3);
        let a = sample_ggm(&t, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_ggm(&t, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let big = sample_ggm(&t, 40_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for j in 0..3 {
            let col = big.column(j);
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 40_000.0;
            assert!(mean.abs() < 0.03);
            assert!((var - 1.0).abs() < 0.03);
        }
    }

    #[test]
    fn sampler_mean_follows_intercepts() {
        let t = SymmetricParam::new(2, vec![1.0, 0.0], vec![0.0]).unwrap();
        let x = sample_ggm(&t, 200_000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!((x.column(0).mean() - 1.0).abs() < 0.02);
        assert!(x.column(1).mean().abs() < 0.02);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn sampler_covariance_2x2() {
        let t = SymmetricParam::new(2, vec![0.0; 2], vec![0.3]).unwrap();
        let x = sample_ggm(&t, 200_000, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        // [[1, -0.3], [-0.3, 1]]^{-1} = [[1, 0.3], [0.3, 1]] / 0.91
        let want = [[1.0 / 0.91, 0.3 / 0.91], [0.3 / 0.91, 1.0 / 0.91]];
        let n = x.nrows() as f64;
        for a in 0..2 {
            for b in 0..2 {
                let ma = x.column(a).mean();
                let mb = x.column(b).mean();
                let c = x
                    .column(a)
                    .iter()
                    .zip(x.column(b).iter())
                    .map(|(u, v)| (u - ma) * (v - mb))
                    .sum::<f64>()
                    / (n - 1.0);
                assert!((c - want[a][b]).abs() < 0.02, "cov[{a}][{b}] = {c}");
            }
        }
    }
}
