//! Simulation and numerical verification for fixed points of the smoothing
//! transform.
//!
//! A weight model describes a random sequence `T = (T_1, ..., T_N)` of
//! positive factors. The smoothing transform maps a survival function f to
//! `t -> E prod_i f(t T_i)`; its fixed points have the form
//! `f(t) = E exp(-W h(t) t^alpha)`, built from three ingredients this crate
//! estimates and cross-checks by simulation:
//!
//! * the characteristic exponent `alpha`, the smallest root of
//!   `m(theta) = E sum_i T_i^theta = 1` ([`exponent`]),
//! * the additive-martingale limit `W` of the weighted branching tree
//!   ([`tree`], [`martingale`]),
//! * a multiplicatively periodic scale function `h` ([`solutions`]).
//!
//! [`identities`] checks the tilted-walk identities the constructions rest
//! on, [`diagnostics`] probes regular variation near zero, and [`tasks`]
//! wires everything into configured experiments with deterministic,
//! replayable randomness ([`rng`]). The `smoothfix` binary dispatches tasks
//! by name from a JSON config.

#![forbid(unsafe_code)]

pub mod cache;
pub mod config;
pub mod diagnostics;
pub mod exponent;
pub mod identities;
pub mod martingale;
pub mod model;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod solutions;
pub mod tasks;
pub mod tree;

/// Crate-wide error type. Variants mirror the contract each module exposes:
/// callers match on the failure class, not on message text.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unknown moment formula `{0}`")]
    UnknownFormula(String),
    #[error("exponent not bracketed: {0}")]
    NotBracketed(String),
    #[error("inconclusive at budget: {0}")]
    Inconclusive(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("population cap exceeded: {0}")]
    PopulationCap(String),
    #[error("invalid scale function: {0}")]
    InvalidScale(String),
    #[error("empty sample set: {0}")]
    EmptySamples(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
