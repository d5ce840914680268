//! Tilted-walk (spine) identities: tree-side front sums against weighted
//! random-walk expectations.
//!
//! The tilted step law picks child `i` of a realized sequence `T` with
//! probability `T_i^alpha / sum_j T_j^alpha` and books `sum_j T_j^alpha`
//! as an importance weight, so `E[weight_n g(S_n); alive]` estimates the
//! front sum `E sum_{|v|=n} exp(-alpha S(v)) g(S(v))` without knowing any
//! normalizing constant. The same walk stopped at its first strict ascent
//! matches the ladder front. Both sides run replication-parallel with
//! index-derived streams, so results are worker-count independent.

use crate::model::WeightModel;
use crate::numeric::{pooled_z, Estimate, RunningStat};
use crate::rng::RngStream;
use crate::tree::{generation_front, ladder_front, Caps, Prune};
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Bounded test functions for the identity checks, serializable so configs
/// name them directly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `g(s) = 1`: the front sum becomes the additive martingale, mean 1.
    One,
    /// `g(s) = exp(-s)`.
    ExpNeg,
    /// `g(s) = clamp(s, 0, cap)`.
    ClampLinear { cap: f64 },
}

impl TestFunction {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::ExpNeg => (-s).exp(),
            TestFunction::ClampLinear { cap } => s.clamp(0.0, *cap),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SpineWalk {
    /// Terminal position `S` of the walk.
    pub position: f64,
    /// Log of the cumulative importance weight; `-inf` when absorbed.
    pub log_weight: f64,
    /// The walk hit an empty reproduction (its tree line died out).
    pub absorbed: bool,
    /// Stopped by the step cap before meeting its stopping rule.
    pub capped: bool,
    pub steps_taken: u32,
}

impl SpineWalk {
    /// Estimator contribution: `weight * g(S)`, or 0 when the walk never
    /// reached its stopping rule.
    pub fn weighted(&self, g: TestFunction) -> f64 {
        if self.absorbed || self.capped {
            0.0
        } else {
            self.log_weight.exp() * g.eval(self.position)
        }
    }
}

fn tilted_step(
    model: &WeightModel,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(f64, f64)>> {
    let t = model.sample(rng)?;
    if t.is_empty() {
        return Ok(None);
    }
    let masses: Vec<f64> = t.iter().map(|&w| w.powf(alpha)).collect();
    let total: f64 = masses.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = t.len() - 1;
    for (i, &m) in masses.iter().enumerate() {
        acc += m;
        if u < acc {
            chosen = i;
            break;
        }
    }
    Ok(Some((-t[chosen].ln(), total.ln())))
}

/// `n` steps of the tilted walk.
pub fn spine_walk(
    model: &WeightModel,
    alpha: f64,
    n: u32,
    rng: &mut ChaCha8Rng,
) -> Result<SpineWalk> {
    let mut walk = SpineWalk {
        position: 0.0,
        log_weight: 0.0,
        absorbed: false,
        capped: false,
        steps_taken: 0,
    };
    for _ in 0..n {
        match tilted_step(model, alpha, rng)? {
            None => {
                walk.absorbed = true;
                walk.log_weight = f64::NEG_INFINITY;
                return Ok(walk);
            }
            Some((step, log_w)) => {
                walk.position += step;
                walk.log_weight += log_w;
                walk.steps_taken += 1;
            }
        }
    }
    Ok(walk)
}

/// The tilted walk stopped at its first strict ascent above 0, mirroring
/// the ladder front. `max_steps` mirrors the tree-side generation cap.
pub fn spine_walk_until_ascent(
    model: &WeightModel,
    alpha: f64,
    max_steps: u32,
    rng: &mut ChaCha8Rng,
) -> Result<SpineWalk> {
    let mut walk = SpineWalk {
        position: 0.0,
        log_weight: 0.0,
        absorbed: false,
        capped: false,
        steps_taken: 0,
    };
    while walk.position <= 0.0 {
        if walk.steps_taken == max_steps {
            walk.capped = true;
            return Ok(walk);
        }
        match tilted_step(model, alpha, rng)? {
            None => {
                walk.absorbed = true;
                walk.log_weight = f64::NEG_INFINITY;
                return Ok(walk);
            }
            Some((step, log_w)) => {
                walk.position += step;
                walk.log_weight += log_w;
                walk.steps_taken += 1;
            }
        }
    }
    Ok(walk)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub tree_reps: u64,
    pub spine_reps: u64,
}

#[derive(Clone, Debug)]
pub struct IdentityCheck {
    pub tree: Estimate,
    pub spine: Estimate,
    pub z: f64,
    /// Mean tree-side alpha-mass lost to caps (ladder check only).
    pub mean_leak: f64,
    /// Spine walks cut off by the step cap.
    pub spine_capped: u64,
}

fn summarize(values: &[f64]) -> Estimate {
    let mut stat = RunningStat::default();
    for &v in values {
        stat.push(v);
    }
    stat.estimate()
}

/// Fixed-generation identity: front sum versus `n`-step weighted walk.
pub fn check_many_to_one(
    model: &WeightModel,
    alpha: f64,
    n: u32,
    g: TestFunction,
    budgets: Budgets,
    stream: RngStream,
) -> Result<IdentityCheck> {
    let caps = Caps::default();
    let tree_values: Vec<f64> = (0..budgets.tree_reps)
        .into_par_iter()
        .map(|rep| {
            let front = generation_front(
                model,
                n,
                stream.named("tree").replication(rep),
                Prune::none(alpha),
                caps,
            )?;
            Ok(front
                .nodes
                .iter()
                .map(|v| v.mass(alpha) * g.eval(v.position))
                .sum())
        })
        .collect::<Result<_>>()?;
    let spine_values: Vec<f64> = (0..budgets.spine_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream.named("spine").replication(rep).rng();
            Ok(spine_walk(model, alpha, n, &mut rng)?.weighted(g))
        })
        .collect::<Result<_>>()?;
    let tree = summarize(&tree_values);
    let spine = summarize(&spine_values);
    Ok(IdentityCheck {
        z: pooled_z(&tree, &spine),
        tree,
        spine,
        mean_leak: 0.0,
        spine_capped: 0,
    })
}

/// Stopping-line identity: ladder-front sum versus the walk stopped at its
/// first strict ascent. Both sides use the same depth cap, and the tree
/// side reports the alpha-mass it truncated there.
pub fn check_ladder_identity(
    model: &WeightModel,
    alpha: f64,
    g: TestFunction,
    budgets: Budgets,
    caps: Caps,
    stream: RngStream,
) -> Result<IdentityCheck> {
    let prune = Prune::none(alpha);
    let tree_results: Vec<(f64, f64)> = (0..budgets.tree_reps)
        .into_par_iter()
        .map(|rep| {
            let front = ladder_front(model, stream.named("tree").replication(rep), prune, caps)?;
            let value: f64 = front
                .nodes
                .iter()
                .map(|v| v.mass(alpha) * g.eval(v.position))
                .sum();
            Ok((value, front.leaked_mass))
        })
        .collect::<Result<_>>()?;
    let spine_results: Vec<(f64, bool)> = (0..budgets.spine_reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream.named("spine").replication(rep).rng();
            let walk = spine_walk_until_ascent(model, alpha, caps.max_generation, &mut rng)?;
            Ok((walk.weighted(g), walk.capped))
        })
        .collect::<Result<_>>()?;
    let tree_values: Vec<f64> = tree_results.iter().map(|&(v, _)| v).collect();
    let mean_leak = tree_results.iter().map(|&(_, l)| l).sum::<f64>()
        / budgets.tree_reps.max(1) as f64;
    let spine_values: Vec<f64> = spine_results.iter().map(|&(v, _)| v).collect();
    let spine_capped = spine_results.iter().filter(|&&(_, c)| c).count() as u64;
    let tree = summarize(&tree_values);
    let spine = summarize(&spine_values);
    Ok(IdentityCheck {
        z: pooled_z(&tree, &spine),
        tree,
        spine,
        mean_leak,
        spine_capped,
    })
}
