//! Multi-task and single-task oracle risks and their comparison.
//!
//! The multi-task risk separates into a mean part depending only on `λ` and
//! a variance part depending only on `μ`, so its oracle is two independent
//! one-dimensional minimizations. The single-task oracle tunes one `λʲ` per
//! task. Both are normalized over all `np` observations, which makes
//! `ρ = 𝔯*_MT / 𝔯*_ST` dimensionless.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{risk_spectral, RidgeComponent};
use crate::optimize::{minimize, Location, Minimum, SearchOptions};
use crate::risk::{alpha_constant, kappa};
use crate::spectral::{mean_variance_profile, KernelSpectrum, MeanVarianceProfile, TaskEnsemble};

/// Serializes `+∞` as `null` and reads `null` back as `+∞`.
pub mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| if x.is_infinite() { None } else { Some(*x) }))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let raw = Vec::<Option<f64>>::deserialize(d)?;
            Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiTaskOracle {
    #[serde(with = "inf_as_null")]
    pub lambda_star: f64,
    #[serde(with = "inf_as_null")]
    pub mu_star: f64,
    pub lambda_location: Location,
    pub mu_location: Location,
    /// Mean part plus variance part at the optimum.
    pub mt_risk: f64,
    pub mean_risk: f64,
    pub variance_risk: f64,
}

pub fn oracle_multitask(
    spectrum: &KernelSpectrum,
    profile: &MeanVarianceProfile,
    sigma2: f64,
) -> Result<MultiTaskOracle> {
    if profile.n() != spectrum.n() {
        return Err(Error::dims(spectrum.n(), profile.n()));
    }
    let opts = SearchOptions::default();
    let mean = minimize(&RidgeComponent::mean_part(spectrum, profile, sigma2)?, &opts)?;
    let var = minimize(&RidgeComponent::variance_part(spectrum, profile, sigma2)?, &opts)?;
    Ok(MultiTaskOracle {
        lambda_star: mean.lambda,
        mu_star: var.lambda,
        lambda_location: mean.location,
        mu_location: var.location,
        mt_risk: mean.value + var.value,
        mean_risk: mean.value,
        variance_risk: var.value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTaskOracle {
    #[serde(with = "inf_as_null::vec")]
    pub lambdas: Vec<f64>,
    /// Per-task oracle risks, each normalized by `n`.
    pub task_risks: Vec<f64>,
    /// Average of `task_risks`.
    pub st_risk: f64,
}

fn single_task_minimum(spectrum: &KernelSpectrum, h: &[f64], sigma2: f64) -> Result<Minimum> {
    minimize(&RidgeComponent::single_task(spectrum, h, sigma2)?, &SearchOptions::default())
}

pub fn oracle_singletask(spectrum: &KernelSpectrum, tasks: &TaskEnsemble, sigma2: f64) -> Result<SingleTaskOracle> {
    if tasks.n() != spectrum.n() {
        return Err(Error::dims(spectrum.n(), tasks.n()));
    }
    let mins = (0..tasks.p())
        .into_par_iter()
        .map(|j| single_task_minimum(spectrum, &tasks.task(j), sigma2))
        .collect::<Result<Vec<_>>>()?;
    let task_risks: Vec<f64> = mins.iter().map(|m| m.value).collect();
    let st_risk = task_risks.iter().sum::<f64>() / task_risks.len() as f64;
    Ok(SingleTaskOracle {
        lambdas: mins.iter().map(|m| m.lambda).collect(),
        task_risks,
        st_risk,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub mt_risk: f64,
    pub st_risk: f64,
    #[serde(with = "inf_as_null")]
    pub lambda_star: f64,
    #[serde(with = "inf_as_null")]
    pub mu_star: f64,
    #[serde(with = "inf_as_null::vec")]
    pub st_lambdas: Vec<f64>,
    pub rho: f64,
    pub multitask: MultiTaskOracle,
    pub singletask: SingleTaskOracle,
}

/// Both oracles for one ensemble.
pub fn compare_oracles(spectrum: &KernelSpectrum, tasks: &TaskEnsemble, sigma2: f64) -> Result<OracleResult> {
    let profile = mean_variance_profile(tasks);
    let mt = oracle_multitask(spectrum, &profile, sigma2)?;
    let st = oracle_singletask(spectrum, tasks, sigma2)?;
    if !(st.st_risk > 0.0) {
        return Err(Error::Domain("single-task oracle risk is zero; the ratio is undefined".into()));
    }
    Ok(OracleResult {
        mt_risk: mt.mt_risk,
        st_risk: st.st_risk,
        lambda_star: mt.lambda_star,
        mu_star: mt.mu_star,
        st_lambdas: st.lambdas.clone(),
        rho: mt.mt_risk / st.st_risk,
        multitask: mt,
        singletask: st,
    })
}

/// Recomputes the multi-task risk at the reported optimum.
pub fn recompute_mt_risk(
    spectrum: &KernelSpectrum,
    profile: &MeanVarianceProfile,
    oracle: &MultiTaskOracle,
    sigma2: f64,
) -> Result<f64> {
    Ok(risk_spectral(spectrum, profile, oracle.lambda_star, oracle.mu_star, sigma2)?.total)
}

// ---------------------------------------------------------------------------
// Closed-form ratio predictions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskLayout {
    TwoPoints,
    OneOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioTheory {
    pub r: f64,
    pub rho_formula: f64,
    pub setting: TaskLayout,
}

impl RatioTheory {
    pub fn new(setting: TaskLayout, p: usize, delta: f64, r: f64) -> Result<Self> {
        let rho_formula = match setting {
            TaskLayout::TwoPoints => rho_formula_2points(p, delta, r)?,
            TaskLayout::OneOut => rho_formula_1out(p, delta, r)?,
        };
        Ok(Self { r, rho_formula, setting })
    }
}

fn ratio_checks(p: usize, delta: f64, r: f64) -> Result<()> {
    if p < 2 {
        return Err(Error::Domain(format!("need p >= 2, got {p}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("r must be nonnegative, got {r}")));
    }
    Ok(())
}

fn rho_numerator(p: f64, delta: f64, r: f64) -> f64 {
    let e = 1.0 / (2.0 * delta);
    p.powf(e - 1.0) + ((p - 1.0) / p).powf(1.0 - e) * r.powf(e)
}

/// Predicted `ρ` for two equal clusters; `r = C₂/C₁`.
pub fn rho_formula_2points(p: usize, delta: f64, r: f64) -> Result<f64> {
    ratio_checks(p, delta, r)?;
    if !p.is_multiple_of(2) {
        return Err(Error::Domain(format!("the two-cluster layout needs an even p, got {p}")));
    }
    let s = r.sqrt();
    let d = 1.0 / delta;
    Ok(rho_numerator(p as f64, delta, r) / ((1.0 + s).powf(d) + (1.0 - s).abs().powf(d)))
}

/// Predicted `ρ` for `p - 1` identical tasks plus one outlier; `r = C₂/C₁`.
pub fn rho_formula_1out(p: usize, delta: f64, r: f64) -> Result<f64> {
    ratio_checks(p, delta, r)?;
    let pf = p as f64;
    let d = 1.0 / delta;
    let denom = (pf - 1.0) / pf * (1.0 + (r / (pf - 1.0)).sqrt()).powf(d)
        + (1.0 - (r * (pf - 1.0)).sqrt()).abs().powf(d) / pf;
    Ok(rho_numerator(pf, delta, r) / denom)
}

/// `(lower, upper)` for the multi-task oracle under polynomial decay:
/// `c (np/σ²)^(1/2δ-1) κ [C₁^(1/2δ) + (p-1)^(1-1/2δ) C₂^(1/2δ)]` with
/// `c = α` (lower) and `c = 2^(1/2δ)` (upper).
pub fn mt_theorem_bounds(
    n: usize,
    p: usize,
    sigma2: f64,
    beta: f64,
    delta: f64,
    c1: f64,
    c2: f64,
) -> Result<(f64, f64)> {
    let e = 1.0 / (2.0 * delta);
    let k = kappa(beta, delta)?;
    let x = (n * p) as f64 / sigma2;
    let core = x.powf(e - 1.0) * k * (c1.powf(e) + ((p - 1) as f64).powf(1.0 - e) * c2.powf(e));
    Ok((alpha_constant(beta, delta)? * core, 2f64.powf(e) * core))
}

// ---------------------------------------------------------------------------
// Data-driven estimator bounds

/// Effective degrees of freedom `tr(A_λ)` and bias `‖(A_λ - I) f‖²/n` of single-task ridge.
pub fn df_and_bias(spectrum: &KernelSpectrum, h: &[f64], lambda: f64) -> Result<(f64, f64)> {
    if h.len() != spectrum.n() {
        return Err(Error::dims(spectrum.n(), h.len()));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    let n = spectrum.n() as f64;
    let comp = RidgeComponent::single_task(spectrum, h, 1.0)?;
    let nl = n * lambda;
    let df = spectrum
        .gamma()
        .iter()
        .map(|&g| {
            if g == 0.0 || nl.is_infinite() {
                0.0
            } else {
                g / (g + nl)
            }
        })
        .sum();
    Ok((df, comp.breakdown(lambda).bias))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdfWitness {
    pub lambda: f64,
    pub df: f64,
    pub bias: f64,
    pub df_limit: f64,
    pub bias_limit: f64,
}

/// Searches for `λ` with `df(λ) ≤ √n` and `b(λ) ≤ σ² √(ln n / n)`.
///
/// `df` decreases and `b` increases in `λ`, so the smallest `λ` meeting the
/// first condition is the only candidate that needs checking.
pub fn hdf_witness(spectrum: &KernelSpectrum, h: &[f64], sigma2: f64) -> Result<Option<HdfWitness>> {
    let n = spectrum.n() as f64;
    if n < 2.0 {
        return Err(Error::Domain("need n >= 2".into()));
    }
    let df_limit = n.sqrt();
    let bias_limit = sigma2 * (n.ln() / n).sqrt();
    let df_at = |t: f64| df_and_bias(spectrum, h, t.exp()).map(|v| v.0);
    let (mut lo, mut hi) = (-60.0_f64, 60.0_f64);
    if df_at(hi)? > df_limit {
        return Ok(None);
    }
    let lambda = if df_at(lo)? <= df_limit {
        lo.exp()
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if df_at(mid)? <= df_limit {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi.exp()
    };
    let (df, bias) = df_and_bias(spectrum, h, lambda)?;
    Ok((bias <= bias_limit).then_some(HdfWitness {
        lambda,
        df,
        bias,
        df_limit,
        bias_limit,
    }))
}

fn check_hm_inputs(n: usize, theta: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::Domain(format!("need n >= 3 so that ln n > 1, got {n}")));
    }
    if !(theta >= 2.0) {
        return Err(Error::Domain(format!("need theta >= 2, got {theta}")));
    }
    Ok(())
}

/// Right-hand side of the oracle inequality for the data-driven multi-task estimator:
/// `(1 + 1/ln n)² 𝔯*_MT + L σ² (2+θ)² p ln(n)³/n + (p/n^(θ/2)) ‖f‖²/(np)`.
#[allow(clippy::too_many_arguments)]
pub fn hm_bound_rhs(
    n: usize,
    p: usize,
    sigma2: f64,
    theta: f64,
    l_const: f64,
    mt_oracle_risk: f64,
    f_sqnorm: f64,
) -> Result<f64> {
    check_hm_inputs(n, theta)?;
    let (nf, pf) = (n as f64, p as f64);
    let ln = nf.ln();
    Ok((1.0 + 1.0 / ln).powi(2) * mt_oracle_risk
        + l_const * sigma2 * (2.0 + theta).powi(2) * pf * ln.powi(3) / nf
        + pf / nf.powf(theta / 2.0) * f_sqnorm / (nf * pf))
}

/// `ζ(s)` for `s > 1` by direct summation plus an Euler-Maclaurin tail.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::Domain(format!("zeta needs s > 1, got {s}")));
    }
    let m = 64.0_f64;
    let head: f64 = (1..64).map(|k| (k as f64).powf(-s)).sum();
    let tail = m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s) + s * m.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * m.powf(-s - 3.0) / 720.0;
    Ok(head + tail)
}

/// Plug-in bound on `E[risk of the data-driven estimator] / 𝔯*_ST`:
///
/// ```text
/// (1 + 1/ln n)² ρ + [L σ²(2+θ)² p ln(n)³/n + p ζ(2δ) n^(-θ/2) mean(Cʲ)]
///                   / [(n/σ²)^(1/2δ-1) κ(β,δ) mean((Cʲ)^(1/2δ))]
/// ```
///
/// `amplitudes` holds the per-task signal constants `Cʲ`; the unspecified
/// multiplicative constant in front of the second term is taken as 1.
#[allow(clippy::too_many_arguments)]
pub fn hm_ratio_bound(
    n: usize,
    p: usize,
    sigma2: f64,
    beta: f64,
    delta: f64,
    theta: f64,
    l_const: f64,
    rho: f64,
    amplitudes: &[f64],
) -> Result<f64> {
    check_hm_inputs(n, theta)?;
    if amplitudes.len() != p {
        return Err(Error::dims(p, amplitudes.len()));
    }
    let (nf, pf) = (n as f64, p as f64);
    let ln = nf.ln();
    let e = 1.0 / (2.0 * delta);
    let mean_c = amplitudes.iter().sum::<f64>() / pf;
    let mean_ce = amplitudes.iter().map(|c| c.powf(e)).sum::<f64>() / pf;
    let num = l_const * sigma2 * (2.0 + theta).powi(2) * pf * ln.powi(3) / nf
        + pf * zeta(2.0 * delta)? / nf.powf(theta / 2.0) * mean_c;
    let den = (nf / sigma2).powf(e - 1.0) * kappa(beta, delta)? * mean_ce;
    Ok((1.0 + 1.0 / ln).powi(2) * rho + num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{minimize_risk, RiskParams};
    use nalgebra::DMatrix;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    fn synth(n: usize, beta: f64) -> KernelSpectrum {
        KernelSpectrum::diagonal((1..=n).map(|i| n as f64 * (i as f64).powf(-2.0 * beta)).collect()).unwrap()
    }

    fn decay(n: usize, delta: f64, amp: f64) -> Vec<f64> {
        (1..=n).map(|i| (n as f64).sqrt() * (i as f64).powf(-delta) * amp).collect()
    }

    fn two_points(n: usize, p: usize, c1: f64, c2: f64, delta: f64) -> TaskEnsemble {
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|j| {
                let sign = if j < p / 2 { 1.0 } else { -1.0 };
                decay(n, delta, c1.sqrt() + sign * c2.sqrt())
            })
            .collect();
        TaskEnsemble::from_columns(&cols).unwrap()
    }

    #[test]
    fn equal_tasks_need_no_variance_penalty() {
        let spec = synth(30, 2.0);
        let tasks = two_points(30, 4, 1.0, 0.0, 2.0);
        let prof = mean_variance_profile(&tasks);
        let mt = oracle_multitask(&spec, &prof, 1.0).unwrap();
        assert_eq!(mt.mu_location, Location::Infinity);
        assert_eq!(mt.variance_risk, 0.0);
        assert!((mt.mt_risk - mt.mean_risk).abs() < 1e-15);
        let again = recompute_mt_risk(&spec, &prof, &mt, 1.0).unwrap();
        assert!(rel(again, mt.mt_risk) < 1e-10);
    }

    #[test]
    fn mean_part_matches_template_risk() {
        // Under γ_i = n i^(-2β) the mean part is R(n, p, σ², λ, β, δ, C₁).
        let (n, p) = (50, 4);
        let spec = synth(n, 2.0);
        let tasks = two_points(n, p, 1.0, 0.25, 2.0);
        let prof = mean_variance_profile(&tasks);
        let mt = oracle_multitask(&spec, &prof, 1.0).unwrap();
        let r1 = minimize_risk(&RiskParams::new(n, p, 1.0, 2.0, 2.0, 1.0).unwrap()).unwrap();
        let r2 = minimize_risk(&RiskParams::new(n, p, 3.0, 2.0, 2.0, 0.25).unwrap()).unwrap();
        assert!(rel(mt.mean_risk, r1.r_star) < 1e-10);
        assert!(rel(mt.variance_risk, r2.r_star) < 1e-10);
    }

    #[test]
    fn mt_between_theorem_bounds() {
        let (n, p) = (400, 2);
        let spec = synth(n, 2.0);
        let tasks = two_points(n, p, 1.0, 1.0, 2.0);
        let prof = mean_variance_profile(&tasks);
        let mt = oracle_multitask(&spec, &prof, 1.0).unwrap();
        let (lo, hi) = mt_theorem_bounds(n, p, 1.0, 2.0, 2.0, 1.0, 1.0).unwrap();
        assert!(lo <= mt.mt_risk && mt.mt_risk <= hi, "{lo} {} {hi}", mt.mt_risk);
    }

    #[test]
    fn single_task_p1_matches_template() {
        let n = 40;
        let spec = synth(n, 2.0);
        let tasks = TaskEnsemble::from_columns(&[decay(n, 2.0, 1.0)]).unwrap();
        let st = oracle_singletask(&spec, &tasks, 1.0).unwrap();
        let r = minimize_risk(&RiskParams::new(n, 1, 1.0, 2.0, 2.0, 1.0).unwrap()).unwrap();
        assert!(rel(st.st_risk, r.r_star) < 1e-10);
        let prof = mean_variance_profile(&tasks);
        let mt = oracle_multitask(&spec, &prof, 1.0).unwrap();
        assert!(rel(mt.mt_risk, st.st_risk) < 1e-10);
    }

    #[test]
    fn equal_tasks_share_lambda() {
        let spec = synth(20, 1.5);
        let tasks = two_points(20, 4, 2.0, 0.0, 1.5);
        let st = oracle_singletask(&spec, &tasks, 1.0).unwrap();
        assert!(st.lambdas.windows(2).all(|w| w[0] == w[1]));
        assert!(st.task_risks.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn two_point_task_risks_match_template() {
        let (n, p, c1, c2) = (50, 4, 1.0, 0.25);
        let spec = synth(n, 2.0);
        let st = oracle_singletask(&spec, &two_points(n, p, c1, c2, 2.0), 1.0).unwrap();
        let plus = minimize_risk(&RiskParams::new(n, 1, 1.0, 2.0, 2.0, (c1.sqrt() + c2.sqrt()).powi(2)).unwrap()).unwrap();
        let minus = minimize_risk(&RiskParams::new(n, 1, 1.0, 2.0, 2.0, (c1.sqrt() - c2.sqrt()).powi(2)).unwrap()).unwrap();
        assert!(rel(st.task_risks[0], plus.r_star) < 1e-10);
        assert!(rel(st.task_risks[1], plus.r_star) < 1e-10);
        assert!(rel(st.task_risks[2], minus.r_star) < 1e-10);
        assert!(rel(st.task_risks[3], minus.r_star) < 1e-10);
    }

    #[test]
    fn oracle_beats_two_dimensional_grid() {
        let n = 30;
        let spec = synth(n, 2.0);
        let tasks = two_points(n, 4, 1.0, 0.5, 2.0);
        let prof = mean_variance_profile(&tasks);
        let mt = oracle_multitask(&spec, &prof, 1.0).unwrap();
        let grid: Vec<f64> = (0..200).map(|k| 10f64.powf(-12.0 + 14.0 * k as f64 / 199.0)).collect();
        let mut best = f64::INFINITY;
        for &l in &grid {
            for &m in &grid {
                best = best.min(risk_spectral(&spec, &prof, l, m, 1.0).unwrap().total);
            }
        }
        assert!(mt.mt_risk <= best * (1.0 + 1e-7));
    }

    #[test]
    fn rho_two_points_values() {
        let v = rho_formula_2points(4, 2.0, 0.0).unwrap();
        assert!((v - 4f64.powf(-0.75) / 2.0).abs() < 1e-15);
        assert!((v - 0.17678).abs() < 1e-5);
        assert!(rho_formula_2points(5, 2.0, 0.0).is_err());
        let at1 = rho_formula_2points(4, 2.0, 1.0).unwrap();
        let num = 4f64.powf(-0.75) + 0.75f64.powf(0.75);
        assert!((at1 - num / 2f64.sqrt()).abs() < 1e-14);
        let near = rho_formula_2points(4, 2.0, 1.0 + 1e-9).unwrap();
        assert!((near - at1).abs() < 1e-4);
        // The formula stays below 1/2 for small and large r but peaks above it
        // at r = 1, where it equals (p^(-3/4) + ((p-1)/p)^(3/4)) / √2.
        for (p, peak) in [(2usize, 0.840_896), (4, 0.819_877), (10, 0.779_125)] {
            assert!((rho_formula_2points(p, 2.0, 1.0).unwrap() - peak).abs() < 1e-6);
            assert!(rho_formula_2points(p, 2.0, 1e-6).unwrap() < 0.5);
            assert!(rho_formula_2points(p, 2.0, 1e6).unwrap() < 0.5);
            let limit = ((p as f64 - 1.0) / p as f64).powf(0.75) / 2.0;
            assert!((rho_formula_2points(p, 2.0, 1e12).unwrap() - limit).abs() < 1e-3);
        }
    }

    #[test]
    fn rho_one_out_values() {
        for p in [2, 5, 50] {
            let v = rho_formula_1out(p, 2.0, 0.0).unwrap();
            assert!((v - (p as f64).powf(-0.75)).abs() < 1e-15);
        }
        assert!(rho_formula_1out(50, 2.0, 1e6).unwrap() > 1.0);
        // r = 1/(p-1) removes the outlier term: denominator ((p-1)/p)(1 + 1/(p-1))^(1/δ).
        let (p, r) = (5.0_f64, 0.25_f64);
        let num = p.powf(-0.75) + 0.8f64.powf(0.75) * r.powf(0.25);
        let den = 0.8 * (1.0 + (r / 4.0).sqrt()).sqrt();
        assert!((rho_formula_1out(5, 2.0, r).unwrap() - num / den).abs() < 1e-14);
    }

    #[test]
    fn df_and_bias_limits() {
        let spec = synth(10, 2.0);
        let h = decay(10, 2.0, 1.0);
        let (df, b) = df_and_bias(&spec, &h, 0.0).unwrap();
        assert_eq!((df, b), (10.0, 0.0));
        let (df, b) = df_and_bias(&spec, &h, 1e14).unwrap();
        let norm: f64 = h.iter().map(|x| x * x).sum::<f64>() / 10.0;
        assert!(df < 1e-10);
        assert!(rel(b, norm) < 1e-10);
    }

    #[test]
    fn hdf_witness_exists() {
        for n in [100, 400] {
            let spec = synth(n, 2.0);
            let w = hdf_witness(&spec, &decay(n, 2.0, 1.0), 1.0).unwrap().expect("witness");
            assert!(w.df <= w.df_limit && w.bias <= w.bias_limit);
        }
    }

    #[test]
    fn hm_rhs_terms() {
        let pure = hm_bound_rhs(100, 2, 1.0, 2.0, 1.0, 0.0, 0.0).unwrap();
        let ln = 100f64.ln();
        assert!(rel(pure, 16.0 * 2.0 * ln.powi(3) / 100.0) < 1e-14);
        let lo = hm_bound_rhs(100, 2, 1.0, 2.0, 1.0, 0.1, 5.0).unwrap();
        let hi = hm_bound_rhs(100, 2, 1.0, 3.0, 1.0, 0.1, 5.0).unwrap();
        assert!(hi > lo);
        assert!(hm_bound_rhs(2, 2, 1.0, 2.0, 1.0, 0.1, 5.0).is_err());
    }

    #[test]
    fn hm_ratio_at_large_n_is_dominated_by_the_log_term() {
        // With L = 1 the ln(n)³/n term is still far above the oracle rate at n = 10⁴.
        let (n, p, c1, c2) = (10_000usize, 2usize, 1.0, 0.01);
        let amps = [(1.0f64 + 0.1).powi(2), (1.0f64 - 0.1).powi(2)];
        let rho = rho_formula_2points(p, 2.0, c2 / c1).unwrap();
        let v = hm_ratio_bound(n, p, 1.0, 2.0, 2.0, 2.0, 1.0, rho, &amps).unwrap();
        let ln = (n as f64).ln();
        let log_term = 16.0 * 2.0 * ln.powi(3) / n as f64;
        let rate = (n as f64).powf(-0.75) * kappa(2.0, 2.0).unwrap();
        assert!(v > log_term / (rate * 1.01));
        assert!(v > 1.0);
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0).unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        assert!((zeta(4.0).unwrap() - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-13);
        assert!(zeta(1.0).is_err());
    }

    #[test]
    fn oracle_result_json_uses_null_for_infinity() {
        let spec = synth(10, 2.0);
        let tasks = TaskEnsemble::new(DMatrix::from_fn(10, 2, |i, _| (i as f64 + 1.0).powi(-2))).unwrap();
        let res = compare_oracles(&spec, &tasks, 1.0).unwrap();
        let json = serde_json::to_string(&res).unwrap();
        assert!(json.contains("\"mu_star\":null"));
        let back: OracleResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.mu_star, f64::INFINITY);
        assert_eq!(back.mt_risk, res.mt_risk);
    }
}
