//! Multi-task ridge estimators and their fixed-design risks.
//!
//! Two computation paths are provided. The dense path builds the `np × np`
//! smoothing operator `A_M = K̃(K̃ + np I)⁻¹` with `K̃ = M⁻¹ ⊗ K` and evaluates
//! the bias-variance decomposition directly; it is cubic in `np` and exists to
//! cross-check the spectral path, which reduces everything to per-eigenvalue
//! shrinkage factors `s_i = γ_i / (γ_i + nλ)`.
//!
//! Every public risk is normalized globally, i.e. averaged over all `np`
//! observations. Single-task risks are per task (normalized by `n`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::RiskCurve;
use crate::spectral::{reconstruct_tasks, KernelSpectrum, MeanVarianceProfile, TaskEnsemble};

/// Largest `np` accepted by the dense operator path unless overridden.
pub const DEFAULT_DENSE_CAP: usize = 512;

fn check_penalty(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        return Err(Error::Domain(format!("{name} must be nonnegative, got {v}")));
    }
    Ok(())
}

/// A `p × p` penalty matrix coupling the tasks.
pub trait Regularizer {
    fn p(&self) -> usize;
    fn materialize(&self) -> DMatrix<f64>;
}

/// Penalizes the norm of the task average (`lambda`) and the task variance (`mu`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerAv {
    pub p: usize,
    pub lambda: f64,
    pub mu: f64,
}

impl RegularizerAv {
    pub fn new(p: usize, lambda: f64, mu: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::dims("p >= 1", 0));
        }
        check_penalty("lambda", lambda)?;
        check_penalty("mu", mu)?;
        Ok(Self { p, lambda, mu })
    }

    /// `M⁻¹ = (p/λ) J/p + (p/μ)(I - J/p)`; exact where a general inverse would lose digits for `λ/μ` far from 1.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        if !(self.lambda > 0.0 && self.mu > 0.0) || !(self.lambda.is_finite() && self.mu.is_finite()) {
            return Err(Error::SingularRegularizer {
                lambda: self.lambda,
                mu: self.mu,
            });
        }
        let p = self.p as f64;
        Ok(DMatrix::from_fn(self.p, self.p, |j, l| {
            let avg = 1.0 / p;
            let centered = if j == l { 1.0 - avg } else { -avg };
            p / self.lambda * avg + p / self.mu * centered
        }))
    }
}

impl Regularizer for RegularizerAv {
    fn p(&self) -> usize {
        self.p
    }

    fn materialize(&self) -> DMatrix<f64> {
        let p = self.p as f64;
        DMatrix::from_fn(self.p, self.p, |j, l| {
            let avg = 1.0 / p;
            let centered = if j == l { 1.0 - avg } else { -avg };
            self.lambda / p * avg + self.mu / p * centered
        })
    }
}

/// Penalizes the task norms (`alpha`) and the pairwise task differences (`beta_pen`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSd {
    pub p: usize,
    pub alpha: f64,
    pub beta_pen: f64,
}

impl RegularizerSd {
    pub fn new(p: usize, alpha: f64, beta_pen: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::dims("p >= 1", 0));
        }
        check_penalty("alpha", alpha)?;
        check_penalty("beta_pen", beta_pen)?;
        Ok(Self { p, alpha, beta_pen })
    }

    /// The equivalent mean/variance parameterization `(α, α + pβ)`.
    pub fn to_av(&self) -> RegularizerAv {
        RegularizerAv {
            p: self.p,
            lambda: self.alpha,
            mu: self.alpha + self.p as f64 * self.beta_pen,
        }
    }
}

impl Regularizer for RegularizerSd {
    fn p(&self) -> usize {
        self.p
    }

    fn materialize(&self) -> DMatrix<f64> {
        let p = self.p as f64;
        let (a, b) = (self.alpha, self.beta_pen);
        DMatrix::from_fn(self.p, self.p, |j, l| {
            let avg = 1.0 / p;
            let centered = if j == l { 1.0 - avg } else { -avg };
            a / p * avg + (a + p * b) / p * centered
        })
    }
}

/// `Σ_{j,ℓ} M_jℓ ⟨g^j, g^ℓ⟩` given the Gram matrix of the task functions.
pub fn penalty_value<R: Regularizer + ?Sized>(reg: &R, gram: &DMatrix<f64>) -> Result<f64> {
    let p = reg.p();
    if gram.shape() != (p, p) {
        return Err(Error::dims(format!("{p}x{p} Gram matrix"), format!("{}x{}", gram.nrows(), gram.ncols())));
    }
    // Validates symmetry and positive semidefiniteness.
    crate::spectral::eigendecompose_kernel(gram)?;
    Ok(reg.materialize().component_mul(gram).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskBreakdown {
    pub bias: f64,
    pub variance: f64,
    pub total: f64,
}

impl RiskBreakdown {
    pub fn new(bias: f64, variance: f64) -> Self {
        Self {
            bias,
            variance,
            total: bias + variance,
        }
    }
}

impl std::ops::Add for RiskBreakdown {
    type Output = RiskBreakdown;

    fn add(self, rhs: Self) -> Self {
        RiskBreakdown::new(self.bias + rhs.bias, self.variance + rhs.variance)
    }
}

/// Dense `np × np` smoothing operator; task `j`, point `i` sits at index `j·n + i`.
pub fn build_operator(spectrum: &KernelSpectrum, reg: &RegularizerAv, cap: usize) -> Result<DMatrix<f64>> {
    let (n, p) = (spectrum.n(), reg.p);
    let rows = n * p;
    if rows > cap {
        return Err(Error::TooLarge { rows, cap });
    }
    let m_inv = reg.inverse()?;
    let k_tilde = m_inv.kronecker(&spectrum.reconstruct());
    let shifted = &k_tilde + DMatrix::identity(rows, rows) * rows as f64;
    // K̃ and (K̃ + npI)⁻¹ commute, so solving on the left gives the same operator.
    let a = shifted
        .lu()
        .solve(&k_tilde)
        .ok_or(Error::SingularRegularizer {
            lambda: reg.lambda,
            mu: reg.mu,
        })?;
    Ok((&a + a.transpose()) * 0.5)
}

/// Bias and variance of the multi-task estimator through the dense operator.
pub fn risk_direct(
    spectrum: &KernelSpectrum,
    tasks: &TaskEnsemble,
    reg: &RegularizerAv,
    sigma2: f64,
    cap: usize,
) -> Result<RiskBreakdown> {
    if tasks.p() != reg.p {
        return Err(Error::dims(format!("p = {}", reg.p), tasks.p()));
    }
    let a = build_operator(spectrum, reg, cap)?;
    let f = reconstruct_tasks(spectrum, tasks)?;
    let f = DVector::from_column_slice(f.as_slice());
    let np = f.len() as f64;
    let resid = &a * &f - &f;
    Ok(RiskBreakdown::new(
        resid.norm_squared() / np,
        sigma2 * a.norm_squared() / np,
    ))
}

/// `(s, 1 - s)` with `s = γ / (γ + nλ)`; a zero eigenvalue or an infinite `λ` gives `(0, 1)`.
fn shrink(gamma: f64, n_lambda: f64) -> (f64, f64) {
    if gamma == 0.0 || n_lambda == f64::INFINITY {
        return (0.0, 1.0);
    }
    let d = gamma + n_lambda;
    (gamma / d, n_lambda / d)
}

/// One separable piece of a ridge risk:
/// `λ ↦ Σ_i w_i (1 - s_i(λ))² + v Σ_i s_i(λ)²` with `s_i = γ_i/(γ_i + nλ)`.
///
/// The mean part, the variance part and each single-task risk are all of this form.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeComponent {
    n: f64,
    gamma: Vec<f64>,
    signal: Vec<f64>,
    noise: f64,
}

impl RidgeComponent {
    pub fn new(n: usize, gamma: Vec<f64>, signal: Vec<f64>, noise: f64) -> Result<Self> {
        if gamma.len() != signal.len() {
            return Err(Error::dims(gamma.len(), signal.len()));
        }
        if signal.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::Domain("risk weights must be finite and nonnegative".into()));
        }
        Ok(Self {
            n: n as f64,
            gamma,
            signal,
            noise,
        })
    }

    /// The λ-part: signal `μ_i²/(np)`, noise `σ²/(np)`.
    pub fn mean_part(spectrum: &KernelSpectrum, profile: &MeanVarianceProfile, sigma2: f64) -> Result<Self> {
        let np = (spectrum.n() * profile.p) as f64;
        let signal = profile.mu.iter().map(|m| m * m / np).collect();
        Self::new(spectrum.n(), spectrum.gamma().to_vec(), signal, sigma2 / np)
    }

    /// The μ-part: signal `pς_i²/(np)`, noise `σ²(p-1)/(np)`.
    pub fn variance_part(spectrum: &KernelSpectrum, profile: &MeanVarianceProfile, sigma2: f64) -> Result<Self> {
        let n = spectrum.n() as f64;
        let p = profile.p as f64;
        let signal = profile.varsigma2.iter().map(|v| v / n).collect();
        Self::new(spectrum.n(), spectrum.gamma().to_vec(), signal, sigma2 * (p - 1.0) / (n * p))
    }

    /// Per-task ridge risk: signal `h_i²/n`, noise `σ²/n`.
    pub fn single_task(spectrum: &KernelSpectrum, h: &[f64], sigma2: f64) -> Result<Self> {
        if h.len() != spectrum.n() {
            return Err(Error::dims(spectrum.n(), h.len()));
        }
        let n = spectrum.n() as f64;
        let signal = h.iter().map(|x| x * x / n).collect();
        Self::new(spectrum.n(), spectrum.gamma().to_vec(), signal, sigma2 / n)
    }

    pub fn breakdown(&self, lambda: f64) -> RiskBreakdown {
        let nl = self.n * lambda;
        let (mut bias, mut var) = (0.0, 0.0);
        for (g, w) in self.gamma.iter().zip(&self.signal) {
            let (s, b) = shrink(*g, nl);
            bias += w * b * b;
            var += s * s;
        }
        RiskBreakdown::new(bias, self.noise * var)
    }

    /// Total signal weight; the risk of the zero estimator.
    pub fn signal_weight(&self) -> f64 {
        self.signal.iter().sum()
    }
}

impl RiskCurve for RidgeComponent {
    fn eval(&self, lambda: f64) -> (f64, f64, f64) {
        let n = self.n;
        let nl = n * lambda;
        let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for (&g, &w) in self.gamma.iter().zip(&self.signal) {
            let (s, b) = shrink(g, nl);
            f += w * b * b + self.noise * s * s;
            if g == 0.0 {
                continue;
            }
            let d = g + nl;
            let k = 2.0 * n * g / (d * d);
            let core = w * b - self.noise * s;
            d1 += k * core;
            d2 += k * (-2.0 * n / d * core + (w + self.noise) * n * g / (d * d));
        }
        (f, d1, d2)
    }

    fn value(&self, lambda: f64) -> f64 {
        self.breakdown(lambda).total
    }

    fn at_zero(&self) -> f64 {
        self.gamma
            .iter()
            .zip(&self.signal)
            .map(|(g, w)| if *g == 0.0 { *w } else { self.noise })
            .sum()
    }

    fn at_infinity(&self) -> f64 {
        self.signal_weight()
    }

    fn natural_range(&self) -> (f64, f64) {
        let positive = self.gamma.iter().copied().filter(|g| *g > 0.0);
        let lo = positive.clone().fold(f64::INFINITY, f64::min);
        let hi = positive.fold(0.0_f64, f64::max);
        if hi == 0.0 {
            return (1e-12, 1.0);
        }
        ((lo / self.n) * 1e-4, (hi / self.n) * 1e4)
    }
}

/// The four-term spectral risk of the mean/variance estimator at `(λ, μ)`.
pub fn risk_spectral(
    spectrum: &KernelSpectrum,
    profile: &MeanVarianceProfile,
    lambda: f64,
    mu: f64,
    sigma2: f64,
) -> Result<RiskBreakdown> {
    if profile.n() != spectrum.n() {
        return Err(Error::dims(spectrum.n(), profile.n()));
    }
    check_penalty("lambda", lambda)?;
    check_penalty("mu", mu)?;
    let mean = RidgeComponent::mean_part(spectrum, profile, sigma2)?;
    let var = RidgeComponent::variance_part(spectrum, profile, sigma2)?;
    Ok(mean.breakdown(lambda) + var.breakdown(mu))
}

/// Risk of single-task ridge regression on one task, normalized by `n`.
pub fn risk_single_task(spectrum: &KernelSpectrum, h: &[f64], lambda: f64, sigma2: f64) -> Result<RiskBreakdown> {
    check_penalty("lambda", lambda)?;
    Ok(RidgeComponent::single_task(spectrum, h, sigma2)?.breakdown(lambda))
}
