//! Mean-measure evaluations `m(theta) = E sum_i T_i^theta` and its
//! derivative in theta.
//!
//! Three evaluation paths, in order of preference: a registered closed-form
//! formula named by the model's `exact_m` field, the intrinsic finite sum of
//! a closed variant (Deterministic, FiniteMixture), and Monte Carlo with a
//! divergence cap. Exact paths report stderr 0 and set the `exact` flag.

use super::{ModelVariant, WeightModel};
use crate::numeric::{Estimate, RunningStat};
use crate::rng::RngStream;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock, RwLock};

/// MC means above this value are reported as divergent (+inf, heuristic).
pub const DIVERGENCE_CAP: f64 = 1e12;

/// Closed-form evaluator for one model family, registered by name and
/// referenced from model JSON via `exact_m`.
pub trait MomentFormula: Send + Sync {
    fn m(&self, theta: f64) -> f64;
    fn m_prime(&self, theta: f64) -> f64;
}

struct Closed {
    m: fn(f64) -> f64,
    dm: fn(f64) -> f64,
}

impl MomentFormula for Closed {
    fn m(&self, theta: f64) -> f64 {
        (self.m)(theta)
    }
    fn m_prime(&self, theta: f64) -> f64 {
        (self.dm)(theta)
    }
}

type Registry = RwLock<BTreeMap<String, Arc<dyn MomentFormula>>>;

fn registry() -> &'static Registry {
    static REG: OnceLock<Registry> = OnceLock::new();
    REG.get_or_init(|| {
        let mut map: BTreeMap<String, Arc<dyn MomentFormula>> = BTreeMap::new();
        map.insert(
            "binary_half".into(),
            Arc::new(Closed {
                m: |t| 2f64.powf(1.0 - t),
                dm: |t| -std::f64::consts::LN_2 * 2f64.powf(1.0 - t),
            }),
        );
        map.insert(
            "ternary_third".into(),
            Arc::new(Closed {
                m: |t| 3f64.powf(1.0 - t),
                dm: |t| -3f64.ln() * 3f64.powf(1.0 - t),
            }),
        );
        map.insert(
            "uniform_pair".into(),
            Arc::new(Closed {
                m: |t| 2.0 / (t + 1.0),
                dm: |t| -2.0 / ((t + 1.0) * (t + 1.0)),
            }),
        );
        map.insert(
            "poisson_uniform_15".into(),
            Arc::new(Closed {
                m: |t| 1.5 / (t + 1.0),
                dm: |t| -1.5 / ((t + 1.0) * (t + 1.0)),
            }),
        );
        RwLock::new(map)
    })
}

/// Register (or replace) a named formula.
pub fn register_moment_formula(name: &str, formula: Arc<dyn MomentFormula>) {
    registry().write().expect("registry lock").insert(name.into(), formula);
}

pub fn moment_formula(name: &str) -> Option<Arc<dyn MomentFormula>> {
    registry().read().expect("registry lock").get(name).cloned()
}

enum Term {
    Value,
    LogWeighted,
}

fn closed_sum(model: &WeightModel, theta: f64, term: &Term) -> Option<f64> {
    let one = |w: f64| match term {
        Term::Value => w.powf(theta),
        Term::LogWeighted => w.powf(theta) * w.ln(),
    };
    match &model.variant {
        ModelVariant::Deterministic { weights } => {
            Some(weights.iter().filter(|&&w| w > 0.0).map(|&w| one(w)).sum())
        }
        ModelVariant::FiniteMixture { atoms } => Some(
            atoms
                .iter()
                .map(|a| {
                    a.probability
                        * a.weights
                            .iter()
                            .filter(|&&w| w > 0.0)
                            .map(|&w| one(w))
                            .sum::<f64>()
                })
                .sum(),
        ),
        ModelVariant::IidCount { .. } => None,
    }
}

fn mc_mean(
    model: &WeightModel,
    theta: f64,
    budget: u64,
    stream: RngStream,
    term: Term,
) -> Result<Estimate> {
    if budget == 0 {
        return Err(Error::Contract("MC moment evaluation needs a budget".into()));
    }
    let mut stat = RunningStat::default();
    for i in 0..budget {
        let t = model.sample(&mut stream.replication(i).rng())?;
        let sample: f64 = t
            .iter()
            .map(|&w| match term {
                Term::Value => w.powf(theta),
                Term::LogWeighted => w.powf(theta) * w.ln(),
            })
            .sum();
        if !sample.is_finite() || stat.mean().abs() > DIVERGENCE_CAP {
            return Ok(Estimate {
                value: f64::INFINITY,
                stderr: f64::INFINITY,
                exact: false,
            });
        }
        stat.push(sample);
    }
    if stat.mean().abs() > DIVERGENCE_CAP {
        return Ok(Estimate {
            value: f64::INFINITY,
            stderr: f64::INFINITY,
            exact: false,
        });
    }
    Ok(stat.estimate())
}

/// Evaluate `m(theta)`. Exact when a named formula or closed variant
/// applies, Monte Carlo over `budget` realizations otherwise.
/// True when `m` evaluates through a closed form rather than Monte Carlo.
pub fn has_exact_m(model: &WeightModel) -> bool {
    model.exact_m.is_some() || closed_sum(model, 1.0, &Term::Value).is_some()
}

pub fn m_eval(model: &WeightModel, theta: f64, budget: u64, stream: RngStream) -> Result<Estimate> {
    if let Some(name) = &model.exact_m {
        let f = moment_formula(name).ok_or_else(|| Error::UnknownFormula(name.clone()))?;
        return Ok(Estimate::exact(f.m(theta)));
    }
    if let Some(v) = closed_sum(model, theta, &Term::Value) {
        return Ok(Estimate::exact(v));
    }
    mc_mean(model, theta, budget, stream, Term::Value)
}

/// Evaluate `m'(theta) = E sum_i T_i^theta ln T_i`; same paths as [`m_eval`].
pub fn m_prime_eval(
    model: &WeightModel,
    theta: f64,
    budget: u64,
    stream: RngStream,
) -> Result<Estimate> {
    if let Some(name) = &model.exact_m {
        let f = moment_formula(name).ok_or_else(|| Error::UnknownFormula(name.clone()))?;
        return Ok(Estimate::exact(f.m_prime(theta)));
    }
    if let Some(v) = closed_sum(model, theta, &Term::LogWeighted) {
        return Ok(Estimate::exact(v));
    }
    mc_mean(model, theta, budget, stream, Term::LogWeighted)
}
