//! Exact fixed-design risks and oracle comparisons for multi-task kernel ridge
//! regression.
//!
//! With the kernel matrix diagonalized as `K = Qᵀ diag(γ) Q` and the task
//! signals rotated into that basis (`h = Q F`), the risk of the multi-task
//! estimator penalizing the task mean with `λ` and the between-task variance
//! with `μ` splits into two independent one-dimensional ridge problems. Both
//! oracles (best `(λ, μ)` for multi-task, best `λʲ` per task for single-task)
//! therefore reduce to scalar minimizations.
//!
//! ```
//! use mtkrr::oracle::compare_oracles;
//! use mtkrr::scenarios::{generate, ScenarioKind, ScenarioSpec};
//!
//! let spec = ScenarioSpec {
//!     kind: ScenarioKind::SettingA,
//!     n: 50,
//!     p: 5,
//!     c1: 1.0,
//!     c2: 0.01,
//!     delta1: 2.0,
//!     delta2: None,
//!     beta_or_m: 2.0,
//!     seed: 1,
//!     cluster_amplitude: None,
//! };
//! let scenario = generate(&spec).unwrap();
//! let result = compare_oracles(&scenario.spectrum, &scenario.tasks, 1.0).unwrap();
//! assert!(result.rho < 1.0);
//! ```
//!
//! Modules, bottom up: [`spectral`] (eigendecomposition, task profiles),
//! [`estimators`] (regularizers, direct and spectral risks), [`risk`] (the
//! polynomial-decay template risk, its constants and bounds), [`oracle`]
//! (oracle risks and their ratio), [`scenarios`] (task generators),
//! [`experiments`] (seeded Monte Carlo runs and their artifacts).

// `!(x > 0.0)` is used throughout to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod optimize;
pub mod oracle;
pub mod quadrature;
pub mod risk;
pub mod scenarios;
pub mod spectral;

pub use error::{Error, Result};
pub use estimators::{RegularizerAv, RegularizerSd, RiskBreakdown};
pub use experiments::{run_experiment, ExperimentReport};
pub use oracle::{compare_oracles, OracleResult};
pub use risk::RiskParams;
pub use scenarios::{generate, Scenario, ScenarioKind, ScenarioSpec};
pub use spectral::{KernelSpectrum, MeanVarianceProfile, TaskEnsemble};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spectral-risk.md")]
    mod spectral_risk {}
    #[doc = include_str!("../../../book/src/template-risk.md")]
    mod template_risk {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/simulations.md")]
    mod simulations {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    mod command_line {}
}
