//! Synthetic data from a partially linear additive GGM: sparse `Omega_0`,
//! dense confounding direction `W`, and `Omega(g) = Omega_0 + f(g) W` with
//! `f` vanishing on `|g| <= 10`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConfoundedDataset, FlatIndex, GgmSampler, SymmetricParam};

/// Spectral-norm cap for the sparse part before confounding is added.
pub const OMEGA0_SPECTRAL_CAP: f64 = 0.5;
/// Spectral-norm cap for `B_0 + f(g) B_W` over the whole grid.
pub const TOTAL_SPECTRAL_CAP: f64 = 0.9;

/// Piecewise confounding profile. Zero on `(-10, 10]`, slope one beyond 12.
/// The negative branch on `(-12, -10]` is the odd reflection of the
/// positive one.
pub fn f_of_g(g: f64) -> f64 {
    if g > 12.0 {
        g - 10.0
    } else if g > 10.0 {
        g + (g - 12.0).powi(2) / 4.0 - 11.0
    } else if g > -10.0 {
        0.0
    } else if g > -12.0 {
        g - (g + 12.0).powi(2) / 4.0 + 11.0
    } else {
        g + 10.0
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Interaction matrix `B` (zero diagonal) of a parameter.
fn interactions(theta: &SymmetricParam) -> DMatrix<f64> {
    let p = theta.p();
    DMatrix::from_fn(p, p, |j, k| if j == k { 0.0 } else { theta.get(j, k) })
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Sparse truth: each off-diagonal entry nonzero with probability `density`,
/// magnitude `U(0.1, 0.3)` with random sign, then rescaled so that
/// `||B_0||_2 <= 0.5`. Returns the parameter and the applied scale.
pub fn gen_sparse_omega0<R: Rng + ?Sized>(
    p: usize,
    density: f64,
    rng: &mut R,
) -> Result<(SymmetricParam, f64)> {
    if p < 2 {
        return Err(Error::InvalidInput(format!("p must be at least 2, got {p}")));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidInput(format!("density must lie in [0, 1], got {density}")));
    }
    let idx = FlatIndex::new(p);
    let offdiag: Vec<f64> = (0..idx.n_offdiag())
        .map(|_| {
            if rng.random_bool(density) {
                random_sign(rng) * rng.random_range(0.1..0.3)
            } else {
                0.0
            }
        })
        .collect();
    let theta = SymmetricParam::new(p, vec![0.0; p], offdiag)?;
    let norm = spectral_norm(&interactions(&theta));
    let scale = if norm > OMEGA0_SPECTRAL_CAP {
        OMEGA0_SPECTRAL_CAP / norm
    } else {
        1.0
    };
    Ok((theta.scaled(scale), scale))
}

/// Dense confounding direction: every off-diagonal entry `+-U(0.5, 1)`,
/// zero diagonal.
pub fn gen_dense_w<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<SymmetricParam> {
    if p < 2 {
        return Err(Error::InvalidInput(format!("p must be at least 2, got {p}")));
    }
    let idx = FlatIndex::new(p);
    let offdiag = (0..idx.n_offdiag())
        .map(|_| random_sign(rng) * rng.random_range(0.5..1.0))
        .collect();
    SymmetricParam::new(p, vec![0.0; p], offdiag)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: usize,
    pub n: usize,
    pub density: f64,
    /// Grid spans `[-half_width, half_width)` with spacing `2 half_width / n`.
    /// `None` gives the integer grid `{-n/2, ..., n/2 - 1}`.
    pub half_width: Option<f64>,
}

impl SimConfig {
    pub fn new(p: usize, n: usize) -> Self {
        Self {
            p,
            n,
            density: 0.3,
            half_width: None,
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        let half = self.n as f64 / 2.0;
        let step = match self.half_width {
            Some(w) => 2.0 * w / self.n as f64,
            None => 1.0,
        };
        (0..self.n).map(|k| (k as f64 - half) * step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    /// Factor applied to the raw sparse draw.
    pub omega0: f64,
    /// Factor applied to the raw dense direction.
    pub w: f64,
    /// `max_g ||B_0 + f(g) B_W||_2` after scaling.
    pub max_spectral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub theta0: SymmetricParam,
    /// Scaled confounding direction.
    pub w: SymmetricParam,
    pub g_grid: Vec<f64>,
    pub scale: ScaleReport,
}

impl SimTruth {
    /// `Omega(g) = Omega_0 + f(g) W`.
    pub fn omega_at(&self, g: f64) -> SymmetricParam {
        self.theta0
            .add(&self.w.scaled(f_of_g(g)))
            .expect("truth parts share a dimension")
    }
}

fn max_grid_norm(b0: &DMatrix<f64>, bw: &DMatrix<f64>, fs: &[f64], s: f64) -> f64 {
    fs.iter()
        .map(|f| spectral_norm(&(b0 + bw * (f * s))))
        .fold(0.0, f64::max)
}

/// Largest scale `s` with `max_g ||B_0 + s f(g) B_W||_2 <= cap`. The map
/// is convex in `s` and below `cap` at zero, so its sublevel set is an
/// interval starting at zero.
fn confounding_scale(b0: &DMatrix<f64>, bw: &DMatrix<f64>, fs: &[f64], cap: f64) -> f64 {
    let f_max = fs.iter().fold(0.0f64, |acc, f| acc.max(f.abs()));
    if f_max == 0.0 {
        return 1.0;
    }
    // only the extreme |f| values can be binding for a convex norm in f
    let extremes: Vec<f64> = {
        let hi = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = fs.iter().copied().fold(f64::INFINITY, f64::min);
        vec![hi, lo]
    };
    let mut lo = 0.0;
    let mut hi = 2.0 * cap / (f_max * spectral_norm(bw)).max(1e-300);
    while max_grid_norm(b0, bw, &extremes, hi) <= cap {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if max_grid_norm(b0, bw, &extremes, mid) <= cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One sample per grid point from the GGM with parameter `Omega(g)`.
pub fn simulate<R: Rng + ?Sized>(
    config: &SimConfig,
    rng: &mut R,
) -> Result<(ConfoundedDataset, SimTruth)> {
    if config.p < 2 {
        return Err(Error::InvalidInput(format!("p must be at least 2, got {}", config.p)));
    }
    if config.n < 2 || !config.n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "n must be even and at least 2, got {}",
            config.n
        )));
    }
    let (theta0, omega0_scale) = gen_sparse_omega0(config.p, config.density, rng)?;
    let w_raw = gen_dense_w(config.p, rng)?;
    let g_grid = config.grid();
    let fs: Vec<f64> = g_grid.iter().map(|&g| f_of_g(g)).collect();

    let b0 = interactions(&theta0);
    let bw = interactions(&w_raw);
    let w_scale = confounding_scale(&b0, &bw, &fs, TOTAL_SPECTRAL_CAP);
    let w = w_raw.scaled(w_scale);
    let truth_scale = ScaleReport {
        omega0: omega0_scale,
        w: w_scale,
        max_spectral: max_grid_norm(&b0, &bw, &fs, w_scale),
    };
    let truth = SimTruth {
        theta0,
        w,
        g_grid: g_grid.clone(),
        scale: truth_scale,
    };

    let mut z = DMatrix::zeros(config.n, config.p);
    for (i, &g) in g_grid.iter().enumerate() {
        let sampler = GgmSampler::new(&truth.omega_at(g))?;
        let row = sampler.draw(rng);
        for j in 0..config.p {
            z[(i, j)] = row[j];
        }
    }
    Ok((ConfoundedDataset::new(g_grid, z)?, truth))
}

/// [`simulate`] on the default integer grid with edge density 0.3.
pub fn simulate_dataset<R: Rng + ?Sized>(
    p: usize,
    n: usize,
    rng: &mut R,
) -> Result<(ConfoundedDataset, SimTruth)> {
    simulate(&SimConfig::new(p, n), rng)
}
