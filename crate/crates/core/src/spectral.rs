//! Kernel eigendecomposition and the mean/variance view of a task ensemble.
//!
//! A kernel matrix `K` is stored as `K = Qᵀ diag(γ) Q` with the rows of `Q`
//! holding the eigenvectors and `γ` sorted in decreasing order. Task signals
//! are kept as their coordinates `h` on that basis, one column per task.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry tolerance for kernel matrices, relative to `max(1, max |K_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_CLAMP, 0)` are rounded up to zero; anything lower is rejected.
pub const PSD_CLAMP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpectrum {
    gamma: Vec<f64>,
    basis: DMatrix<f64>,
}

impl KernelSpectrum {
    /// Builds a spectrum from eigenvalues with the identity as eigenbasis.
    pub fn diagonal(gamma: Vec<f64>) -> Result<Self> {
        let n = gamma.len();
        Self::new(gamma, DMatrix::identity(n, n))
    }

    /// Wraps precomputed eigenpairs. `basis` rows are eigenvectors.
    pub fn new(gamma: Vec<f64>, basis: DMatrix<f64>) -> Result<Self> {
        let n = gamma.len();
        if n == 0 {
            return Err(Error::dims("n >= 1", 0));
        }
        if basis.shape() != (n, n) {
            return Err(Error::dims(
                format!("{n}x{n} basis"),
                format!("{}x{}", basis.nrows(), basis.ncols()),
            ));
        }
        if let Some(&g) = gamma.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::NotPsd { eigenvalue: g });
        }
        if gamma.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("eigenvalues must be sorted in decreasing order".into()));
        }
        Ok(Self { gamma, basis })
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// The orthogonal matrix `Q`; row `i` is the eigenvector of `gamma[i]`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `Qᵀ diag(γ) Q`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.gamma));
        self.basis.transpose() * d * &self.basis
    }
}

/// Diagonalizes a symmetric positive-semidefinite kernel matrix.
///
/// Eigenvalues come back in decreasing order; ties keep the order in which
/// the solver returned them.
pub fn eigendecompose_kernel(k: &DMatrix<f64>) -> Result<KernelSpectrum> {
    let (r, c) = k.shape();
    if r != c {
        return Err(Error::dims(format!("square matrix ({r}x{r})"), format!("{r}x{c}")));
    }
    if r == 0 {
        return Err(Error::dims("n >= 1", 0));
    }
    let scale = k.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut asym = 0.0_f64;
    for i in 0..r {
        for j in 0..i {
            asym = asym.max((k[(i, j)] - k[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { max_asymmetry: asym });
    }

    let sym = (k + k.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..r).collect();
    // Stable sort: ties keep solver order.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut gamma = Vec::with_capacity(r);
    let mut basis = DMatrix::zeros(r, r);
    for (row, &idx) in order.iter().enumerate() {
        let g = eig.eigenvalues[idx];
        if g < -PSD_CLAMP {
            return Err(Error::NotPsd { eigenvalue: g });
        }
        gamma.push(g.max(0.0));
        basis.set_row(row, &eig.eigenvectors.column(idx).transpose());
    }
    KernelSpectrum::new(gamma, basis)
}

/// Spectral coordinates `h` (n×p) of the task signals.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEnsemble {
    h: DMatrix<f64>,
}

impl TaskEnsemble {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::dims("n >= 1 and p >= 1", format!("{}x{}", h.nrows(), h.ncols())));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("task coefficients must be finite".into()));
        }
        Ok(Self { h })
    }

    /// Builds an ensemble column by column.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::dims(format!("columns of length {n}"), bad.len()));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| columns[j][i]))
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn p(&self) -> usize {
        self.h.ncols()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn task(&self, j: usize) -> Vec<f64> {
        self.h.column(j).iter().copied().collect()
    }

    /// `Σ_ij (h_i^j)²`, which equals `‖f‖²` since `Q` is orthogonal.
    pub fn squared_norm(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum()
    }
}

/// Coordinates of `F` (n×p, column j = task j at the design points) on the kernel eigenbasis.
pub fn project_tasks(spectrum: &KernelSpectrum, f: &DMatrix<f64>) -> Result<TaskEnsemble> {
    if f.nrows() != spectrum.n() {
        return Err(Error::dims(format!("{} rows", spectrum.n()), f.nrows()));
    }
    TaskEnsemble::new(spectrum.basis() * f)
}

/// Inverse of [`project_tasks`]: task values at the design points.
pub fn reconstruct_tasks(spectrum: &KernelSpectrum, tasks: &TaskEnsemble) -> Result<DMatrix<f64>> {
    if tasks.n() != spectrum.n() {
        return Err(Error::dims(format!("{} rows", spectrum.n()), tasks.n()));
    }
    Ok(spectrum.basis().transpose() * tasks.h())
}

/// Per-coordinate task mean `μ_i = Σ_j h_i^j / √p` and between-task variance `ς_i²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVarianceProfile {
    pub mu: Vec<f64>,
    pub varsigma2: Vec<f64>,
    pub p: usize,
}

impl MeanVarianceProfile {
    pub fn n(&self) -> usize {
        self.mu.len()
    }
}

pub fn mean_variance_profile(tasks: &TaskEnsemble) -> MeanVarianceProfile {
    let (n, p) = tasks.h().shape();
    let sqrt_p = (p as f64).sqrt();
    let mut mu = Vec::with_capacity(n);
    let mut varsigma2 = Vec::with_capacity(n);
    for i in 0..n {
        let row = tasks.h().row(i);
        let sum: f64 = row.iter().sum();
        let mean = sum / p as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / p as f64;
        mu.push(sum / sqrt_p);
        varsigma2.push(var);
    }
    MeanVarianceProfile { mu, varsigma2, p }
}
