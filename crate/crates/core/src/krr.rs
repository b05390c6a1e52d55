//! Kernel ridge regression with the RBF (Gaussian) kernel.
//!
//! The dual coefficients solve `(K + lambda I) alpha = y`, where `K` is the
//! training Gram matrix, and predictions are `f(x) = sum_i alpha_i k(x_i, x)`.
//! The system is solved through a Cholesky factorization. A [`KernelSystem`]
//! keeps that factorization so several targets sharing the same training
//! rows can be solved without refactoring.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::{cholesky_in_place, cholesky_in_place_scratch};
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ts::LagDesign;

const JITTER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// `gamma = 1 / D` with `D` the design width, resolved at fit time.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub lambda: f64,
    pub gamma: GammaMode,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { lambda: 1.0, gamma: GammaMode::Auto }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if let GammaMode::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }

    pub fn resolve_gamma(&self, n_features: usize) -> Result<f64> {
        self.validate()?;
        match self.gamma {
            GammaMode::Fixed(g) => Ok(g),
            GammaMode::Auto if n_features == 0 => Err(Error::InvalidParameter("cannot resolve gamma for an empty design".into())),
            GammaMode::Auto => Ok(1.0 / n_features as f64),
        }
    }
}

/// Row-major copy of a design matrix; kernel evaluations walk rows.
#[derive(Debug, Clone, PartialEq)]
struct RowMatrix {
    data: Vec<f64>,
    nrows: usize,
    ncols: usize,
}

impl RowMatrix {
    fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let (nrows, ncols) = m.shape();
        let mut data = Vec::with_capacity(nrows * ncols);
        for i in 0..nrows {
            data.extend(m.row(i).iter());
        }
        Self { data, nrows, ncols }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| {
        let d = x - y;
        acc + d * d
    })
}

/// `exp(-gamma * |x - x'|^2)`.
pub fn rbf_kernel(x: &[f64], x2: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: x2.len() });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok((-gamma * squared_distance(x, x2)).exp())
}

fn gram_row_major(rows: &RowMatrix, gamma: f64) -> Vec<f64> {
    let n = rows.nrows;
    let mut k = vec![0.0; n * n];
    // lower triangle in parallel, one row per task, then mirror
    k.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let ri = rows.row(i);
        for (j, slot) in out.iter_mut().enumerate().take(i) {
            *slot = (-gamma * squared_distance(ri, rows.row(j))).exp();
        }
        out[i] = 1.0;
    });
    for i in 0..n {
        for j in (i + 1)..n {
            k[i * n + j] = k[j * n + i];
        }
    }
    k
}

/// Gram matrix `K[i, j] = k(row_i, row_j)` over the rows of an `N x D` matrix.
pub fn gram_matrix(rows: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    if rows.nrows() == 0 {
        return Err(Error::InsufficientData("gram matrix of zero rows".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let rm = RowMatrix::from_dmatrix(rows);
    let n = rm.nrows;
    // symmetric, so the row-major buffer is also its column-major layout
    Ok(DMatrix::from_vec(n, n, gram_row_major(&rm, gamma)))
}

/// A factorized `K + lambda I` over a fixed set of training rows.
#[derive(Debug, Clone)]
pub struct KernelSystem {
    rows: Arc<RowMatrix>,
    gamma: f64,
    lambda: f64,
    // lower triangle holds L; the strict upper triangle is stale input
    chol: Mat<f64>,
    jittered: bool,
}

// Sequential on purpose: callers already parallelize across pairs, and a
// fixed operation order keeps results independent of the thread count.
fn cholesky_lower(k: &[f64], n: usize, diag: f64) -> Option<Mat<f64>> {
    let mut a = Mat::from_fn(n, n, |i, j| if i == j { k[i * n + j] + diag } else { k[i * n + j] });
    let mut mem = MemBuffer::new(cholesky_in_place_scratch::<f64>(n, Par::Seq, Default::default()));
    cholesky_in_place(a.as_mut(), Default::default(), Par::Seq, MemStack::new(&mut mem), Default::default()).ok()?;
    Some(a)
}

impl KernelSystem {
    pub fn factor(train_rows: &DMatrix<f64>, config: &KernelConfig) -> Result<Self> {
        let gamma = config.resolve_gamma(train_rows.ncols())?;
        if train_rows.nrows() == 0 {
            return Err(Error::InsufficientData("no training rows".into()));
        }
        let rows = RowMatrix::from_dmatrix(train_rows);
        let n = rows.nrows;
        let k = gram_row_major(&rows, gamma);
        let (chol, jittered) = match cholesky_lower(&k, n, config.lambda) {
            Some(c) => (c, false),
            None => {
                log::warn!("kernel system not positive definite; retrying with jitter {JITTER:e}");
                (cholesky_lower(&k, n, config.lambda + JITTER).ok_or(Error::NotPositiveDefinite)?, true)
            }
        };
        Ok(Self { rows: Arc::new(rows), gamma, lambda: config.lambda, chol, jittered })
    }

    pub fn n_train(&self) -> usize {
        self.rows.nrows
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Whether the factorization needed the diagonal jitter retry.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    /// Solves for one target vector, producing a model that shares the
    /// training rows.
    pub fn solve(&self, y: &DVector<f64>) -> Result<KrrModel> {
        if y.len() != self.n_train() {
            return Err(Error::DimensionMismatch { expected: self.n_train(), got: y.len() });
        }
        let mut b = Mat::from_fn(y.len(), 1, |i, _| y[i]);
        let l = self.chol.as_ref();
        solve_lower_triangular_in_place(l, b.as_mut(), Par::Seq);
        solve_upper_triangular_in_place(l.transpose(), b.as_mut(), Par::Seq);
        let alpha = DVector::from_fn(y.len(), |i, _| b[(i, 0)]);
        Ok(KrrModel { alpha, rows: Arc::clone(&self.rows), gamma: self.gamma, lambda: self.lambda })
    }
}

/// Fitted dual coefficients plus the training rows they weight.
#[derive(Debug, Clone)]
pub struct KrrModel {
    alpha: DVector<f64>,
    rows: Arc<RowMatrix>,
    gamma: f64,
    lambda: f64,
}

impl KrrModel {
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols
    }

    pub fn train_rows(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows.nrows, self.rows.ncols, &self.rows.data)
    }
}

/// Kernel values between query rows and a system's training rows. Reusable
/// for every target solved on the same system.
#[derive(Debug, Clone)]
pub struct CrossKernel {
    data: Vec<f64>,
    nrows: usize,
    ntrain: usize,
}

impl CrossKernel {
    fn new(train: &RowMatrix, query: &DMatrix<f64>, gamma: f64) -> Result<Self> {
        if query.ncols() != train.ncols {
            return Err(Error::DimensionMismatch { expected: train.ncols, got: query.ncols() });
        }
        let q = RowMatrix::from_dmatrix(query);
        let n = train.nrows;
        let mut data = vec![0.0; q.nrows * n];
        if n > 0 {
            data.par_chunks_mut(n).enumerate().for_each(|(m, out)| {
                let x = q.row(m);
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = (-gamma * squared_distance(train.row(i), x)).exp();
                }
            });
        }
        Ok(Self { data, nrows: q.nrows, ntrain: n })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn predict(&self, model: &KrrModel) -> Result<DVector<f64>> {
        if model.alpha.len() != self.ntrain {
            return Err(Error::DimensionMismatch { expected: self.ntrain, got: model.alpha.len() });
        }
        let out = (0..self.nrows)
            .map(|m| {
                let k = &self.data[m * self.ntrain..(m + 1) * self.ntrain];
                model.alpha.iter().zip(k).fold(0.0, |acc, (a, k)| acc + a * k)
            })
            .collect();
        Ok(DVector::from_vec(out))
    }
}

impl KernelSystem {
    /// Kernel block between `rows` and this system's training rows.
    pub fn cross_kernel(&self, rows: &DMatrix<f64>) -> Result<CrossKernel> {
        CrossKernel::new(&self.rows, rows, self.gamma)
    }
}

pub fn krr_fit(train: &LagDesign, config: &KernelConfig) -> Result<KrrModel> {
    if train.n_rows() < 2 {
        return Err(Error::InsufficientData(format!("{} training rows; need at least 2", train.n_rows())));
    }
    KernelSystem::factor(&train.x, config)?.solve(&train.y)
}

/// Fits on raw rows; unlike [`krr_fit`] a single training row is allowed.
pub fn krr_fit_rows(rows: &DMatrix<f64>, y: &DVector<f64>, config: &KernelConfig) -> Result<KrrModel> {
    KernelSystem::factor(rows, config)?.solve(y)
}

pub fn krr_predict(model: &KrrModel, rows: &DMatrix<f64>) -> Result<DVector<f64>> {
    CrossKernel::new(&model.rows, rows, model.gamma)?.predict(model)
}
