//! FastICA with eigen-whitening and symmetric fixed-point updates
//! (log-cosh contrast).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::stats::mean;
use crate::error::{Error, Result};
use crate::linalg::{dot, gram, mul_rows, sym_eigen_desc, symmetric_decorrelate};
use crate::model::{PipelineConfig, Recording};

/// Relative eigenvalue floor below which whitened dimensions are dropped.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    pub whitened: Vec<Vec<f64>>,
    /// `r × m`; maps centered data to unit-covariance rows.
    pub matrix: DMatrix<f64>,
    /// `m × r`; pseudo-inverse of `matrix`.
    pub dewhitening: DMatrix<f64>,
    pub mean: Vec<f64>,
    /// Channel-covariance eigenvalues of the retained dimensions.
    pub eigenvalues: Vec<f64>,
}

/// Centers the rows and whitens them through the eigen-decomposition of the
/// `1/T` covariance.
pub fn whiten(rows: &[Vec<f64>]) -> Result<Whitening> {
    let m = rows.len();
    if m < 2 {
        return Err(Error::InsufficientChannels { needed: 2, got: m });
    }
    let t = rows[0].len();
    if rows.iter().any(|r| r.len() != t) {
        return Err(Error::ShapeMismatch("rows differ in length".into()));
    }
    if t <= m {
        return Err(Error::SignalTooShort { needed: m + 1, got: t });
    }
    let means: Vec<f64> = rows.iter().map(|r| mean(r)).collect();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .zip(&means)
        .map(|(r, mu)| r.iter().map(|v| v - mu).collect())
        .collect();
    let (vals, vecs) = sym_eigen_desc(gram(&centered));
    let top = vals[0];
    if !(top > 0.0) {
        return Err(Error::RankZero);
    }
    let r = vals.iter().take_while(|&&v| v > RANK_TOLERANCE * top).count();
    let e = vecs.columns(0, r).into_owned();
    let d_inv_sqrt = DVector::from_iterator(r, vals[..r].iter().map(|v| 1.0 / v.sqrt()));
    let d_sqrt = DVector::from_iterator(r, vals[..r].iter().map(|v| v.sqrt()));
    let matrix = DMatrix::from_diagonal(&d_inv_sqrt) * e.transpose();
    let dewhitening = &e * DMatrix::from_diagonal(&d_sqrt);
    let whitened = mul_rows(&matrix, &centered);
    Ok(Whitening {
        whitened,
        matrix,
        dewhitening,
        mean: means,
        eigenvalues: vals[..r].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcaConfig {
    /// Defaults to the retained whitened dimension.
    pub n_components: Option<usize>,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self {
            n_components: None,
            seed: 0,
            tol: 1e-4,
            max_iter: 200,
        }
    }
}

impl From<&PipelineConfig> for IcaConfig {
    fn from(cfg: &PipelineConfig) -> Self {
        Self {
            n_components: None,
            seed: cfg.random_seed,
            tol: cfg.ica_tol,
            max_iter: cfg.ica_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDecomposition {
    /// `n_components × n_samples`, unit variance per row.
    pub sources: Vec<Vec<f64>>,
    /// `n_active × n_components`; columns are component patterns.
    pub mixing: DMatrix<f64>,
    /// `n_components × n_active`.
    pub unmixing: DMatrix<f64>,
    pub whitening_matrix: DMatrix<f64>,
    /// Row `i` of the active data came from channel `channel_index_map[i]`.
    pub channel_index_map: Vec<usize>,
    pub mean_vector: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl ComponentDecomposition {
    pub fn n_components(&self) -> usize {
        self.sources.len()
    }

    /// `mixing · sources + mean` with the sources listed in `zeroed` removed.
    pub fn reconstruct_without(&self, zeroed: &[usize]) -> Vec<Vec<f64>> {
        let mut mixing = self.mixing.clone();
        for &k in zeroed {
            mixing.column_mut(k).fill(0.0);
        }
        let mut rows = mul_rows(&mixing, &self.sources);
        for (row, mu) in rows.iter_mut().zip(&self.mean_vector) {
            for v in row.iter_mut() {
                *v += mu;
            }
        }
        rows
    }
}

fn initial_unmixing(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    symmetric_decorrelate(&w)
}

const BLOCK: usize = 512;

/// `Σ_t g(y_t) z_tᵀ` and `Σ_t g'(y_t)` for `y = W z`, `g = tanh`, in one
/// blocked pass so each block of `y` stays in cache.
fn contrast_moments(w: &DMatrix<f64>, z: &[Vec<f64>]) -> (DMatrix<f64>, Vec<f64>) {
    let n = w.nrows();
    let t = z[0].len();
    let mut g_z = DMatrix::zeros(n, n);
    let mut dg = vec![0.0; n];
    let mut block = vec![0.0; n * BLOCK];
    for start in (0..t).step_by(BLOCK) {
        let len = BLOCK.min(t - start);
        for i in 0..n {
            let yi = &mut block[i * BLOCK..i * BLOCK + len];
            yi.fill(0.0);
            for (j, zj) in z.iter().enumerate() {
                let c = w[(i, j)];
                for (y, v) in yi.iter_mut().zip(&zj[start..start + len]) {
                    *y += c * v;
                }
            }
            let mut acc = 0.0;
            for y in yi.iter_mut() {
                let th = y.tanh();
                acc += 1.0 - th * th;
                *y = th;
            }
            dg[i] += acc;
        }
        for i in 0..n {
            let gi = &block[i * BLOCK..i * BLOCK + len];
            for (j, zj) in z.iter().enumerate() {
                g_z[(i, j)] += dot(gi, &zj[start..start + len]);
            }
        }
    }
    (g_z, dg)
}

/// Runs FastICA on already-selected rows; `channel_index_map` is the identity.
pub fn fast_ica(rows: &[Vec<f64>], cfg: &IcaConfig) -> Result<ComponentDecomposition> {
    let wh = whiten(rows)?;
    let r = wh.whitened.len();
    let n = cfg.n_components.unwrap_or(r).clamp(1, r);
    let z = &wh.whitened[..n];
    let t = z[0].len() as f64;

    let mut w = initial_unmixing(n, cfg.seed);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let (g_z, sum_dg) = contrast_moments(&w, z);
        let mut w1 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                w1[(i, j)] = (g_z[(i, j)] - sum_dg[i] * w[(i, j)]) / t;
            }
        }
        let w1 = symmetric_decorrelate(&w1);
        let overlap = &w1 * w.transpose();
        let lim = (0..n).map(|i| (overlap[(i, i)].abs() - 1.0).abs()).fold(0.0, f64::max);
        w = w1;
        if lim < cfg.tol {
            converged = true;
            break;
        }
    }

    let k_n = wh.matrix.rows(0, n).into_owned();
    let unmixing = &w * &k_n;
    let mixing = wh.dewhitening.columns(0, n).into_owned() * w.transpose();
    let sources = mul_rows(&w, z);
    Ok(ComponentDecomposition {
        sources,
        mixing,
        unmixing,
        whitening_matrix: wh.matrix,
        channel_index_map: (0..rows.len()).collect(),
        mean_vector: wh.mean,
        converged,
        iterations,
    })
}

/// Decomposes the active channels of a recording; masked rows never enter.
pub fn decompose(recording: &Recording, cfg: &IcaConfig) -> Result<ComponentDecomposition> {
    let active = recording.active_channels();
    let mut dec = fast_ica(&recording.active_rows(), cfg)?;
    dec.channel_index_map = active;
    Ok(dec)
}

/// Normalized Amari index of a square gain matrix `P = Ŵ·A`; zero when `P`
/// is a scaled permutation.
pub fn amari_index(p: &DMatrix<f64>) -> f64 {
    let n = p.nrows();
    if n < 2 {
        return 0.0;
    }
    let a = p.abs();
    let mut total = 0.0;
    for i in 0..n {
        let row = a.row(i);
        total += row.sum() / row.max() - 1.0;
    }
    for j in 0..n {
        let col = a.column(j);
        total += col.sum() / col.max() - 1.0;
    }
    total / (2.0 * n as f64 * (n as f64 - 1.0))
}
