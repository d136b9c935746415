//! The scalar template risk
//!
//! ```text
//! R(λ) = C λ² S₁(n, λ) + (σ²/np) S₂(n, λ)
//! S₁ = Σ_{i≤n} i^(4β-2δ) / (1 + λ i^(2β))²,   S₂ = Σ_{i≤n} 1 / (1 + λ i^(2β))²
//! ```
//!
//! together with the integrals that control its minimum, the rate constant
//! `κ(β, δ)`, the localization cap `ε` and the upper/lower bounds on
//! `R* = inf_λ R(λ)`.
//!
//! | quantity | meaning |
//! |---|---|
//! | `I₁(β, δ)` | `∫₀^∞ u^((1-2δ)/2β + 1) / (1+u)² du` |
//! | `I₂(β)` | `∫₀^∞ u^(1/2β - 1) / (1+u)² du` |
//! | `κ(β, δ)` | `I₁^(1/2δ) I₂^(1-1/2δ) (2δ-1)^(1/2δ) δ / (β(2δ-1))` |
//!
//! Both integrals have the form `∫₀^∞ u^(a-1)/(1+u)² du`, which converges
//! iff `0 < a < 2` and then equals `Γ(a)Γ(2-a) = (1-a)π / sin(πa)`. The
//! production path integrates numerically; [`beta_identity`] is kept as an
//! independent check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::RiskBreakdown;
use crate::optimize::{minimize, Location, RiskCurve, SearchOptions};
use crate::quadrature::{integrate, QuadratureOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub n: usize,
    pub p: usize,
    pub sigma2: f64,
    pub beta: f64,
    pub delta: f64,
    pub c: f64,
}

impl RiskParams {
    pub fn new(n: usize, p: usize, sigma2: f64, beta: f64, delta: f64, c: f64) -> Result<Self> {
        let params = Self {
            n,
            p,
            sigma2,
            beta,
            delta,
            c,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n == 0 {
            bad.push("n must be >= 1".to_string());
        }
        if self.p == 0 {
            bad.push("p must be >= 1".to_string());
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            bad.push(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            bad.push(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            bad.push(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            bad.push(format!("c must be nonnegative, got {}", self.c));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Domain(bad.join("; ")))
        }
    }

    /// `1 < 2δ < 4β + 1`: the range where the single-task ridge estimator is minimax.
    pub fn satisfies_hm(&self) -> bool {
        hm_condition(self.beta, self.delta)
    }

    /// `1 < 2δ < 4β`: the hypothesis of the lower bound.
    pub fn satisfies_lb(&self) -> bool {
        lb_condition(self.beta, self.delta)
    }

    /// Effective sample size `np/σ²`.
    pub fn snr(&self) -> f64 {
        (self.n * self.p) as f64 / self.sigma2
    }
}

pub fn hm_condition(beta: f64, delta: f64) -> bool {
    1.0 < 2.0 * delta && 2.0 * delta < 4.0 * beta + 1.0
}

pub fn lb_condition(beta: f64, delta: f64) -> bool {
    1.0 < 2.0 * delta && 2.0 * delta < 4.0 * beta
}

// ---------------------------------------------------------------------------
// R and its sums

/// `(s, 1 - s)` for `s = 1/(1 + x)`, robust to `x = ∞`.
fn split(x: f64) -> (f64, f64) {
    if x.is_infinite() {
        (0.0, 1.0)
    } else if x > 1.0 {
        let s = 1.0 / (1.0 + x);
        (s, 1.0 / (1.0 + 1.0 / x))
    } else {
        let s = 1.0 / (1.0 + x);
        (s, x * s)
    }
}

/// `S₁(n, λ) = Σ i^(4β-2δ)/(1 + λi^(2β))²`.
pub fn s1(n: usize, lambda: f64, beta: f64, delta: f64) -> f64 {
    (1..=n)
        .map(|i| {
            let i = i as f64;
            let (s, _) = split(lambda * i.powf(2.0 * beta));
            i.powf(4.0 * beta - 2.0 * delta) * s * s
        })
        .sum()
}

/// `S₂(n, λ) = Σ 1/(1 + λi^(2β))²`.
pub fn s2(n: usize, lambda: f64, beta: f64) -> f64 {
    (1..=n)
        .map(|i| {
            let (s, _) = split(lambda * (i as f64).powf(2.0 * beta));
            s * s
        })
        .sum()
}

/// `R(n, p, σ², λ, β, δ, C)`; `λ = ∞` gives the zero-estimator risk `C Σ i^(-2δ)`.
pub fn risk_r(params: &RiskParams, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return params.at_zero();
    }
    params.value(lambda)
}

/// The two terms of `R`: `C Σ i^(-2δ) (1 - s_i)²` and `σ²/(np) Σ s_i²`.
pub fn risk_r_breakdown(params: &RiskParams, lambda: f64) -> RiskBreakdown {
    if lambda == 0.0 {
        return RiskBreakdown::new(0.0, params.at_zero());
    }
    let v = params.sigma2 / (params.n * params.p) as f64;
    let (mut bias, mut variance) = (0.0, 0.0);
    for i in 1..=params.n {
        let i = i as f64;
        let (s, b) = split(lambda * i.powf(2.0 * params.beta));
        bias += params.c * i.powf(-2.0 * params.delta) * b * b;
        variance += v * s * s;
    }
    RiskBreakdown::new(bias, variance)
}

impl RiskCurve for RiskParams {
    fn eval(&self, lambda: f64) -> (f64, f64, f64) {
        // Per index: w (x/(1+x))² + v/(1+x)² with x = λq, q = i^(2β), w = C i^(-2δ).
        let v = self.sigma2 / (self.n * self.p) as f64;
        let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for i in 1..=self.n {
            let i = i as f64;
            let q = i.powf(2.0 * self.beta);
            let w = self.c * i.powf(-2.0 * self.delta);
            let (s, b) = split(lambda * q);
            f += w * b * b + v * s * s;
            d1 += 2.0 * q * s * s * (w * b - v * s);
            d2 += 2.0 * q * q * s * s * (w * s * (s - 2.0 * b) + 3.0 * v * s * s);
        }
        (f, d1, d2)
    }

    fn value(&self, lambda: f64) -> f64 {
        if lambda.is_infinite() {
            return self.at_infinity();
        }
        let v = self.sigma2 / (self.n * self.p) as f64;
        (1..=self.n)
            .map(|i| {
                let i = i as f64;
                let (s, b) = split(lambda * i.powf(2.0 * self.beta));
                self.c * i.powf(-2.0 * self.delta) * b * b + v * s * s
            })
            .sum()
    }

    fn at_zero(&self) -> f64 {
        self.sigma2 / self.p as f64
    }

    fn at_infinity(&self) -> f64 {
        self.c * (1..=self.n).map(|i| (i as f64).powf(-2.0 * self.delta)).sum::<f64>()
    }

    fn natural_range(&self) -> (f64, f64) {
        let floor = (self.n as f64).powf(-2.0 * self.beta) * 1e-2;
        (1e-12_f64.min(floor), 10.0)
    }
}

// ---------------------------------------------------------------------------
// Integrals and constants

/// Closed form of `∫₀^∞ u^(a-1)/(1+u)² du = Γ(a)Γ(2-a) = (1-a)π/sin(πa)` for `0 < a < 2`.
pub fn beta_identity(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 2.0) {
        return Err(Error::DivergentIntegral { exponent: a });
    }
    let e = 1.0 - a;
    if e == 0.0 {
        return Ok(1.0);
    }
    // sin(π(1-a)) = sin(πa), which keeps full precision as a → 0.
    let pi = std::f64::consts::PI;
    Ok(pi * e / (pi * a).sin())
}

/// `∫₀^∞ u^(a-1)/(1+u)² du` (or `∫₀¹` when `full` is false) after mapping
/// `u = v/(1-v)`, which turns the integrand into `v^(a-1) (1-v)^(1-a)` on `(0, 1)`.
/// The half `v > 1/2` is reflected onto `(0, 1/2)`, giving the same form with
/// `a` replaced by `2 - a`.
fn power_integral(a: f64, full: bool, opts: QuadratureOptions) -> Result<f64> {
    if !(a > 0.0 && a < 2.0) {
        return Err(Error::DivergentIntegral { exponent: a });
    }
    let left = half_power_integral(a, opts)?;
    if !full {
        return Ok(left);
    }
    Ok(left + half_power_integral(2.0 - a, opts)?)
}

/// `∫₀^½ v^(b-1) (1-v)^(1-b) dv` for `0 < b < 2`. Substituting `v = w^(1/b)`
/// absorbs the endpoint singularity, which otherwise defeats the quadrature
/// as `b → 0`: the integral becomes `(1/b) ∫₀^(2^-b) (1 - w^(1/b))^(1-b) dw`.
fn half_power_integral(b: f64, opts: QuadratureOptions) -> Result<f64> {
    let upper = 0.5f64.powf(b);
    let f = |w: f64| (1.0 - w.powf(1.0 / b)).powf(1.0 - b);
    // For small b the integrand is flat up to a layer of width ~b below
    // `upper`; integrate that layer separately so the first pass cannot miss it.
    let split = (upper * (1.0 - 40.0 * b)).max(0.0);
    let mut total = integrate(f, split, upper, opts)?.value;
    if split > 0.0 {
        total += integrate(f, 0.0, split, opts)?.value;
    }
    Ok(total / b)
}

fn a1(beta: f64, delta: f64) -> f64 {
    (1.0 - 2.0 * delta) / (2.0 * beta) + 2.0
}

fn a2(beta: f64) -> f64 {
    1.0 / (2.0 * beta)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn integral_i1(beta: f64, delta: f64) -> Result<f64> {
    integral_i1_with(beta, delta, QuadratureOptions::default())
}

pub fn integral_i1_with(beta: f64, delta: f64, opts: QuadratureOptions) -> Result<f64> {
    check_positive("beta", beta)?;
    power_integral(a1(beta, delta), true, opts)
}

pub fn integral_i2(beta: f64) -> Result<f64> {
    integral_i2_with(beta, QuadratureOptions::default())
}

pub fn integral_i2_with(beta: f64, opts: QuadratureOptions) -> Result<f64> {
    check_positive("beta", beta)?;
    power_integral(a2(beta), true, opts)
}

fn kappa_from(i1: f64, i2: f64, beta: f64, delta: f64) -> f64 {
    let e = 1.0 / (2.0 * delta);
    i1.powf(e) * i2.powf(1.0 - e) * (2.0 * delta - 1.0).powf(e) * delta / (beta * (2.0 * delta - 1.0))
}

fn require_hm(beta: f64, delta: f64) -> Result<()> {
    check_positive("beta", beta)?;
    if hm_condition(beta, delta) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "need 1 < 2*delta < 4*beta + 1, got beta = {beta}, delta = {delta}"
        )))
    }
}

/// The rate constant `κ(β, δ)` from numerically integrated `I₁`, `I₂`.
pub fn kappa(beta: f64, delta: f64) -> Result<f64> {
    require_hm(beta, delta)?;
    Ok(kappa_from(integral_i1(beta, delta)?, integral_i2(beta)?, beta, delta))
}

/// `κ(β, δ)` through the Gamma-function closed forms.
pub fn kappa_closed_form(beta: f64, delta: f64) -> Result<f64> {
    require_hm(beta, delta)?;
    Ok(kappa_from(beta_identity(a1(beta, delta))?, beta_identity(a2(beta))?, beta, delta))
}

/// Maximizer of `t ↦ t^(4β-2δ)/(1 + λt^(2β))²`.
pub fn t_star(beta: f64, delta: f64, lambda: f64) -> Result<f64> {
    check_positive("beta", beta)?;
    check_positive("lambda", lambda)?;
    if 4.0 * beta <= 2.0 * delta {
        return Err(Error::Domain(format!("need 4*beta > 2*delta, got beta = {beta}, delta = {delta}")));
    }
    Ok(((4.0 * beta - 2.0 * delta) / (2.0 * delta * lambda)).powf(1.0 / (2.0 * beta)))
}

/// Largest `λ` that can minimize `R`: `f/(1-f)` with `f = √A (np/σ²)^(1/4δ - 1/2)`
/// and `A = C^(1/2δ - 1) 2^(1/2δ) κ(β, δ)`.
pub fn epsilon_cap(params: &RiskParams) -> Result<f64> {
    params.validate()?;
    let (beta, delta) = (params.beta, params.delta);
    let k = kappa(beta, delta)?;
    let e = 1.0 / (2.0 * delta);
    let a = params.c.powf(e - 1.0) * 2f64.powf(e) * k;
    let factor = a.sqrt() * params.snr().powf(0.5 * e - 0.5);
    if !(factor < 1.0) {
        return Err(Error::NoCap { factor });
    }
    Ok(factor / (1.0 - factor))
}

/// Upper bound on `R*`: `min{2^(1/2δ) (np/σ²)^(1/2δ-1) C^(1/2δ) κ, σ²/p}`.
pub fn upper_bound(params: &RiskParams) -> Result<f64> {
    let e = 1.0 / (2.0 * params.delta);
    let k = kappa(params.beta, params.delta)?;
    let rate = 2f64.powf(e) * params.snr().powf(e - 1.0) * params.c.powf(e) * k;
    Ok(rate.min(params.sigma2 / params.p as f64))
}

/// Lower bound on `R*`: `min{α (np/σ²)^(1/2δ-1) C^(1/2δ) κ, σ²/(4p)}`.
pub fn lower_bound(params: &RiskParams, alpha: f64) -> Result<f64> {
    let e = 1.0 / (2.0 * params.delta);
    let k = kappa(params.beta, params.delta)?;
    let rate = alpha * params.snr().powf(e - 1.0) * params.c.powf(e) * k;
    Ok(rate.min(params.sigma2 / (4.0 * params.p as f64)))
}

/// The constant of the lower bound: the smaller of `∫₀¹/∫₀^∞` for the two integrands.
pub fn alpha_constant(beta: f64, delta: f64) -> Result<f64> {
    alpha_constant_with(beta, delta, QuadratureOptions::default())
}

pub fn alpha_constant_with(beta: f64, delta: f64, opts: QuadratureOptions) -> Result<f64> {
    check_positive("beta", beta)?;
    if !lb_condition(beta, delta) {
        return Err(Error::Domain(format!(
            "need 1 < 2*delta < 4*beta, got beta = {beta}, delta = {delta}"
        )));
    }
    // u = 1 corresponds to v = 1/2.
    let ratio = |a: f64| -> Result<f64> { Ok(power_integral(a, false, opts)? / power_integral(a, true, opts)?) };
    Ok(ratio(a2(beta))?.min(ratio(a1(beta, delta))?))
}

/// `(λ^(-1/2β)/2β) I₂`, an upper bound on `S₂(n, λ)` for every `n`.
pub fn s2_integral_bound(lambda: f64, beta: f64) -> Result<f64> {
    Ok(lambda.powf(-1.0 / (2.0 * beta)) / (2.0 * beta) * integral_i2(beta)?)
}

/// `(λ^((2δ-1)/2β)/(βλ²)) I₁`, an upper bound on `S₁(n, λ)` for every `n`.
pub fn s1_integral_bound(lambda: f64, beta: f64, delta: f64) -> Result<f64> {
    Ok(lambda.powf((2.0 * delta - 1.0) / (2.0 * beta)) / (beta * lambda * lambda) * integral_i1(beta, delta)?)
}

// ---------------------------------------------------------------------------
// Optimization and regimes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Regularize,
    TrivialNoise,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub r_star: f64,
    /// `+∞` (serialized as `null`) when the zero estimator is optimal.
    pub lambda_star: f64,
    pub location: Location,
    pub derivative: f64,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon_cap: Option<f64>,
    pub satisfies_hm: bool,
    pub satisfies_lb: bool,
    pub regime: Regime,
}

/// Search range used for `R`: `[min(1e-12, n^(-2β)/100), max(10, 2ε)]`.
pub fn search_range(params: &RiskParams, eps: Option<f64>) -> (f64, f64) {
    let (lo, hi) = params.natural_range();
    (lo, hi.max(2.0 * eps.unwrap_or(0.0)))
}

/// Minimizes `R` over `λ ∈ [0, ∞]` and evaluates the theoretical bounds.
pub fn minimize_risk(params: &RiskParams) -> Result<BoundReport> {
    params.validate()?;
    let hm = params.satisfies_hm();
    let lb = params.satisfies_lb();
    let eps = if hm { epsilon_cap(params).ok() } else { None };
    let opts = SearchOptions {
        range: Some(search_range(params, eps)),
        ..SearchOptions::default()
    };
    let m = minimize(params, &opts)?;
    let upper = if hm { Some(upper_bound(params)?) } else { None };
    let alpha = if lb { Some(alpha_constant(params.beta, params.delta)?) } else { None };
    let lower = match alpha {
        Some(a) => Some(lower_bound(params, a)?),
        None => None,
    };
    let regime = regime_of(params, m.lambda, m.value)?;
    Ok(BoundReport {
        r_star: m.value,
        lambda_star: m.lambda,
        location: m.location,
        derivative: m.derivative,
        upper,
        lower,
        alpha,
        epsilon_cap: eps,
        satisfies_hm: hm,
        satisfies_lb: lb,
        regime,
    })
}

fn regime_of(params: &RiskParams, lambda_star: f64, r_star: f64) -> Result<Regime> {
    let threshold = (params.n as f64).powf(-2.0 * params.beta);
    if lambda_star >= threshold && params.satisfies_hm() {
        let e = 1.0 / (2.0 * params.delta);
        let rate = (1.0 / params.snr()).powf(1.0 - e) * params.c.powf(e) * kappa(params.beta, params.delta)?;
        let ratio = r_star / rate;
        if (0.25..=4.0).contains(&ratio) {
            return Ok(Regime::Regularize);
        }
    }
    let noise = params.sigma2 / params.p as f64;
    if lambda_star <= threshold && r_star >= noise / 4.0 && r_star <= noise * (1.0 + 1e-12) {
        return Ok(Regime::TrivialNoise);
    }
    Ok(Regime::Undetermined)
}

/// Which side of `λ* = n^(-2β)` the optimum falls on, and whether the risk matches the expected order.
pub fn classify_regime(params: &RiskParams) -> Result<Regime> {
    Ok(minimize_risk(params)?.regime)
}
