//! Proximal causal inference with designed text-based proxies.
//!
//! The crate covers the full analysis path for a binary treatment `A`, a real
//! outcome `Y`, observed covariates `C` and an unmeasured binary confounder `U`
//! that is only reachable through two inferred binary proxies `W` and `Z`:
//!
//! * [`dag`]: causal DAGs, d-separation and the structural proxy conditions.
//! * [`regress`]: least squares and unpenalized (optionally class-balanced)
//!   logistic regression.
//! * [`synth`]: seeded fully synthetic and semi-synthetic data generators.
//! * [`proxies`]: proxy classifiers, external prediction ingestion and
//!   oracle diagnostics.
//! * [`oddsratio`]: the conditional odds ratio `γ_WZ.C`, its bootstrap CI and
//!   the falsification gate.
//! * [`proximal`]: the two-stage proximal estimator and backdoor baselines.
//! * [`pipeline`] and [`experiments`]: end-to-end orchestration and the
//!   replication benchmarks.

pub mod bootstrap;
pub mod dag;
pub mod data;
pub mod error;
pub mod experiments;
pub mod io;
pub mod oddsratio;
pub mod pipeline;
pub mod proxies;
pub mod proximal;
pub mod regress;
pub mod rng;
pub mod synth;

pub use crate::dag::{builtin_graph, BuiltinGraph, CausalDag, ConditionReport, RoleAssignment};
pub use crate::data::{Column, Dataset, FeatureBlock};
pub use crate::error::{Error, Result};
pub use crate::oddsratio::{gate, gamma_ci, gamma_point, GateDecision, GateReason, OddsRatioResult, Verdict};
pub use crate::proximal::{ace_ci, estimate_ace_backdoor, estimate_ace_proximal, AceEstimate, AceMethod};
pub use crate::regress::{ClassWeighting, DesignMatrix, LinearModel, LogisticModel};

/// True average causal effect used by both data-generating processes.
pub const DEFAULT_TRUE_ACE: f64 = 1.3;

/// Upper bound on `γ_WZ.C` used throughout the replication experiments.
pub const DEFAULT_GAMMA_HIGH: f64 = 2.0;

/// Bootstrap replicate count for odds-ratio and ACE intervals.
pub const DEFAULT_N_BOOT: usize = 200;
