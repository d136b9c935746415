//! Task configurations: the deterministic two-cluster and one-outlier layouts
//! and the four randomized simulation settings.
//!
//! | kind | spectrum | task coefficients |
//! |---|---|---|
//! | `h2points` | `γ_i = n i^(-2β)` | `√n i^(-δ)(√C₁ ± √C₂)`, half the tasks each |
//! | `h1out` | `γ_i = n i^(-2β)` | `√n i^(-δ)(√C₁ + √(C₂/(p-1)))`, last task `√n i^(-δ)(√C₁ - √((p-1)C₂))` |
//! | `setting_a` | `γ_i = n i^(-2β)` | `√n i^(-δ)(√C₁ + ε_i^j √C₂)` |
//! | `setting_b` | periodic spline kernel on uniform `X_i ∈ [-π, π]` | `f^j(X_i) = (√C₁ + ε_i^j √C₂)\|X_i\|` |
//! | `setting_c` | `γ_i = n i^(-2β)` | `√n(√C₁ i^(-δ₁) + ε_i^j √C₂ i^(-δ₂))` |
//! | `setting_d` | `γ_i = n i^(-2β)` | `a √n ε_i^j i^(-2)` for `j < p`, `√(nC₂) ε_i^p i^(-δ₂)` |
//!
//! `ε_i^j` are Rademacher signs. Random draws come from ChaCha8 seeded with
//! `spec.seed`; for Setting B all `X_i` are drawn before the signs, and signs
//! are always drawn task by task (`j` outer, `i` inner).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{eigendecompose_kernel, project_tasks, KernelSpectrum, TaskEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    H2points,
    H1out,
    SettingA,
    SettingB,
    SettingC,
    SettingD,
}

impl ScenarioKind {
    pub fn is_random(self) -> bool {
        !matches!(self, ScenarioKind::H2points | ScenarioKind::H1out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n: usize,
    pub p: usize,
    #[serde(default = "one")]
    pub c1: f64,
    pub c2: f64,
    pub delta1: f64,
    #[serde(default)]
    pub delta2: Option<f64>,
    /// `β` for synthetic spectra, the spline order `m` for Setting B.
    pub beta_or_m: f64,
    #[serde(default)]
    pub seed: u64,
    /// Amplitude of the cluster tasks in Setting D (1 reproduces the reference display).
    #[serde(default)]
    pub cluster_amplitude: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ScenarioSpec {
    /// Lists every violated constraint.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n == 0 {
            bad.push("n must be >= 1".to_string());
        }
        if self.p == 0 {
            bad.push("p must be >= 1".to_string());
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2)] {
            if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if !(self.delta1 > 0.0 && self.delta1.is_finite()) {
            bad.push(format!("delta1 must be positive, got {}", self.delta1));
        }
        let needs_delta2 = matches!(self.kind, ScenarioKind::SettingC | ScenarioKind::SettingD);
        match (needs_delta2, self.delta2) {
            (true, None) => bad.push(format!("delta2 is required for {:?}", self.kind)),
            (false, Some(_)) => bad.push(format!("delta2 is only used by setting_c and setting_d, not {:?}", self.kind)),
            (true, Some(d)) if !(d > 0.0 && d.is_finite()) => bad.push(format!("delta2 must be positive, got {d}")),
            _ => {}
        }
        match self.kind {
            ScenarioKind::H2points if !self.p.is_multiple_of(2) => bad.push(format!("h2points needs an even p, got {}", self.p)),
            ScenarioKind::H1out | ScenarioKind::SettingD if self.p < 2 => {
                bad.push(format!("{:?} needs p >= 2, got {}", self.kind, self.p))
            }
            _ => {}
        }
        if self.kind == ScenarioKind::SettingB {
            if !(self.beta_or_m >= 1.0 && self.beta_or_m.fract() == 0.0 && self.beta_or_m <= 64.0) {
                bad.push(format!("setting_b needs an integer spline order m >= 1, got {}", self.beta_or_m));
            }
        } else if !(self.beta_or_m >= 0.0 && self.beta_or_m.is_finite()) {
            bad.push(format!("beta must be nonnegative, got {}", self.beta_or_m));
        }
        if let Some(a) = self.cluster_amplitude {
            if self.kind != ScenarioKind::SettingD {
                bad.push("cluster_amplitude is only used by setting_d".to_string());
            } else if !(a >= 0.0 && a.is_finite()) {
                bad.push(format!("cluster_amplitude must be nonnegative, got {a}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(bad.join("; ")))
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// A generated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spectrum: KernelSpectrum,
    pub tasks: TaskEnsemble,
}

/// `γ_i = n i^(-2β)` (1-indexed) on the identity basis.
pub fn synth_spectrum(n: usize, beta: f64) -> Result<KernelSpectrum> {
    let nf = n as f64;
    KernelSpectrum::diagonal((1..=n).map(|i| nf * (i as f64).powf(-2.0 * beta)).collect())
}

fn decay(i: usize, delta: f64) -> f64 {
    (i as f64).powf(-delta)
}

fn rademacher(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Signs `ε[j][i]`, drawn task by task.
fn draw_signs(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..p).map(|_| (0..n).map(|_| rademacher(rng)).collect()).collect()
}

fn ensemble(n: usize, p: usize, f: impl Fn(usize, usize) -> f64) -> Result<TaskEnsemble> {
    // f(i, j) with i 1-indexed.
    TaskEnsemble::new(DMatrix::from_fn(n, p, |i, j| f(i + 1, j)))
}

pub fn gen_h2points(spec: &ScenarioSpec) -> Result<TaskEnsemble> {
    check_kind(spec, ScenarioKind::H2points)?;
    let sn = (spec.n as f64).sqrt();
    let (a, b) = (spec.c1.sqrt(), spec.c2.sqrt());
    ensemble(spec.n, spec.p, |i, j| {
        let amp = if j < spec.p / 2 { a + b } else { a - b };
        sn * decay(i, spec.delta1) * amp
    })
}

pub fn gen_h1out(spec: &ScenarioSpec) -> Result<TaskEnsemble> {
    check_kind(spec, ScenarioKind::H1out)?;
    let sn = (spec.n as f64).sqrt();
    let q = (spec.p - 1) as f64;
    let a = spec.c1.sqrt();
    ensemble(spec.n, spec.p, |i, j| {
        let amp = if j + 1 < spec.p { a + (spec.c2 / q).sqrt() } else { a - (q * spec.c2).sqrt() };
        sn * decay(i, spec.delta1) * amp
    })
}

pub fn gen_setting_a(spec: &ScenarioSpec) -> Result<TaskEnsemble> {
    check_kind(spec, ScenarioKind::SettingA)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let eps = draw_signs(&mut rng, spec.n, spec.p);
    let sn = (spec.n as f64).sqrt();
    let (a, b) = (spec.c1.sqrt(), spec.c2.sqrt());
    ensemble(spec.n, spec.p, |i, j| sn * decay(i, spec.delta1) * (a + eps[j][i - 1] * b))
}

pub fn gen_setting_c(spec: &ScenarioSpec) -> Result<TaskEnsemble> {
    check_kind(spec, ScenarioKind::SettingC)?;
    let d2 = spec.delta2.expect("validated");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let eps = draw_signs(&mut rng, spec.n, spec.p);
    let sn = (spec.n as f64).sqrt();
    let (a, b) = (spec.c1.sqrt(), spec.c2.sqrt());
    ensemble(spec.n, spec.p, |i, j| {
        sn * (a * decay(i, spec.delta1) + eps[j][i - 1] * b * decay(i, d2))
    })
}

pub fn gen_setting_d(spec: &ScenarioSpec) -> Result<TaskEnsemble> {
    check_kind(spec, ScenarioKind::SettingD)?;
    let d2 = spec.delta2.expect("validated");
    let amp = spec.cluster_amplitude.unwrap_or(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let eps = draw_signs(&mut rng, spec.n, spec.p);
    let n = spec.n as f64;
    ensemble(spec.n, spec.p, |i, j| {
        if j + 1 < spec.p {
            amp * n.sqrt() * eps[j][i - 1] * decay(i, 2.0)
        } else {
            (n * spec.c2).sqrt() * eps[j][i - 1] * decay(i, d2)
        }
    })
}

/// Setting B: uniform design points, periodic spline kernel of order `m`, `f^j(x) = (√C₁ + ε√C₂)|x|`.
pub fn gen_setting_b(spec: &ScenarioSpec) -> Result<Scenario> {
    check_kind(spec, ScenarioKind::SettingB)?;
    let m = spec.beta_or_m as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x: Vec<f64> = (0..spec.n).map(|_| rng.random_range(-PI..=PI)).collect();
    let eps = draw_signs(&mut rng, spec.n, spec.p);
    let (a, b) = (spec.c1.sqrt(), spec.c2.sqrt());
    let f = DMatrix::from_fn(spec.n, spec.p, |i, j| (a + eps[j][i] * b) * x[i].abs());
    let spectrum = eigendecompose_kernel(&periodic_spline_kernel(&x, m)?)?;
    let tasks = project_tasks(&spectrum, &f)?;
    Ok(Scenario { spectrum, tasks })
}

fn check_kind(spec: &ScenarioSpec, kind: ScenarioKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::InvalidScenario(format!("expected {kind:?}, got {:?}", spec.kind)));
    }
    spec.validate()
}

/// Number of series terms used for spline orders without a closed form.
pub const SERIES_TERMS: usize = 10_000;

/// `2 Σ_{k≥1} cos(kθ)/k^(2m)`.
///
/// Orders 1 and 2 use the Bernoulli-polynomial closed forms on `θ ∈ [0, 2π]`;
/// higher orders sum [`SERIES_TERMS`] terms, leaving a tail below
/// `N^(1-2m)/(2m-1) ≤ 2e-21`.
pub fn periodic_spline_value(theta: f64, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("spline order m must be >= 1".into()));
    }
    let t = theta.rem_euclid(2.0 * PI);
    let half = match m {
        1 => PI * PI / 6.0 - PI * t / 2.0 + t * t / 4.0,
        2 => PI.powi(4) / 90.0 - PI * PI * t * t / 12.0 + PI * t.powi(3) / 12.0 - t.powi(4) / 48.0,
        _ => {
            // Chebyshev recurrence cos(kθ) = 2cos θ cos((k-1)θ) - cos((k-2)θ).
            let c1 = t.cos();
            let (mut prev, mut cur) = (1.0, c1);
            let mut sum = 0.0;
            for k in 1..=SERIES_TERMS {
                sum += cur / (k as f64).powi(2 * m as i32);
                let next = 2.0 * c1 * cur - prev;
                prev = cur;
                cur = next;
            }
            sum
        }
    };
    Ok(2.0 * half)
}

/// Kernel matrix `R(x_i, x_j)` of the periodic spline kernel of order `m`.
pub fn periodic_spline_kernel(x: &[f64], m: u32) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = periodic_spline_value(x[i] - x[j], m)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Builds the spectrum and task ensemble described by `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    if spec.kind == ScenarioKind::SettingB {
        return gen_setting_b(spec);
    }
    let spectrum = synth_spectrum(spec.n, spec.beta_or_m)?;
    let tasks = match spec.kind {
        ScenarioKind::H2points => gen_h2points(spec)?,
        ScenarioKind::H1out => gen_h1out(spec)?,
        ScenarioKind::SettingA => gen_setting_a(spec)?,
        ScenarioKind::SettingC => gen_setting_c(spec)?,
        ScenarioKind::SettingD => gen_setting_d(spec)?,
        ScenarioKind::SettingB => unreachable!(),
    };
    Ok(Scenario { spectrum, tasks })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under master seed `master`.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}
