//! Martingales along fronts, the limit variable `W`, and the on-tree
//! recombination identity.
//!
//! The additive martingale at generation `n` is `W_n = sum_v exp(-alpha
//! S(v))` over the generation front; its a.s. limit `W` is what the
//! solution machinery mixes over. Sampling truncates at a depth, so every
//! sampler here records exactly what was truncated or pruned.
//!
//! The recombination check re-derives `W_{n+k} = sum_{|v|=n} L(v)^alpha
//! [W_k]_v` on one tree: the subtree at `v` is regrown from `v`'s own
//! stream seeded at `v`'s absolute position, so every descendant weight,
//! position, and prune decision reproduces the root-side construction
//! bit for bit. The residual then measures only plumbing (indexing,
//! stream derivation, mass accounting), which is the point: the identity
//! itself holds by construction on the same tree.

use crate::model::WeightModel;
use crate::rng::RngStream;
use crate::tree::{generation_front, Caps, Front, FrontKind, Prune, WeightedNode};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Product of `f(t L(v))` over a front, in log space. `f` must map into
/// `[0, 1]`; an empty front gives 1 (a product over nothing).
pub fn multiplicative_value(front: &Front, t: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut log_product = 0.0f64;
    for node in &front.nodes {
        let x = t * (-node.position).exp();
        let v = f(x);
        if !v.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(Error::Contract(format!(
                "martingale test function must map into [0, 1]; f({x}) = {v}"
            )));
        }
        let v = v.clamp(0.0, 1.0);
        if v == 0.0 {
            return Ok(0.0);
        }
        log_product += v.ln();
    }
    Ok(log_product.exp())
}

/// Construction record for a `W` sample set; stored alongside cached
/// samples so a cache hit can prove it matches the requested build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WMeta {
    pub model_checksum: String,
    pub alpha: f64,
    pub depth: u32,
    pub prune_eps: f64,
    pub stream_state: u64,
    pub reps: u64,
    /// Mean over replications of the alpha-mass dropped by pruning.
    pub mean_leak: f64,
}

#[derive(Clone, Debug)]
pub struct EmpiricalW {
    pub samples: Vec<f64>,
    pub meta: WMeta,
}

impl EmpiricalW {
    pub fn mean(&self) -> f64 {
        let mut stat = crate::numeric::RunningStat::default();
        for &s in &self.samples {
            stat.push(s);
        }
        stat.mean()
    }

    pub fn stderr(&self) -> f64 {
        let mut stat = crate::numeric::RunningStat::default();
        for &s in &self.samples {
            stat.push(s);
        }
        stat.estimate().stderr
    }

    /// Fraction of replications whose tree died out (W_n = 0).
    pub fn zero_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|&&s| s == 0.0).count() as f64 / self.samples.len() as f64
    }
}

/// Sample `W_depth` over independent replications. Parallel across
/// replications only; each replication derives its stream from its index,
/// so the result is identical at any worker count.
pub fn sample_limit_w(
    model: &WeightModel,
    alpha: f64,
    depth: u32,
    reps: u64,
    prune_eps: f64,
    stream: RngStream,
) -> Result<EmpiricalW> {
    if reps == 0 {
        return Err(Error::Contract("need at least one replication".into()));
    }
    let caps = Caps::default();
    if depth > caps.max_generation {
        return Err(Error::PopulationCap(format!(
            "depth {depth} exceeds the generation cap {}",
            caps.max_generation
        )));
    }
    let prune = Prune::threshold(alpha, prune_eps);
    let meta = |mean_leak: f64| WMeta {
        model_checksum: model.checksum(),
        alpha,
        depth,
        prune_eps,
        stream_state: stream.state(),
        reps,
        mean_leak,
    };
    // A realization-fixed model grows the same front in every replication
    // (its sampler ignores the stream), so one expansion stands for all of
    // them, bit-identical to the full loop.
    if model.is_realization_fixed() {
        let front = generation_front(model, depth, stream.replication(0), prune, caps)?;
        return Ok(EmpiricalW {
            samples: vec![front.alpha_mass(alpha); reps as usize],
            meta: meta(front.leaked_mass),
        });
    }
    let per_rep: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let front = generation_front(model, depth, stream.replication(rep), prune, caps)?;
            Ok((front.alpha_mass(alpha), front.leaked_mass))
        })
        .collect::<Result<_>>()?;
    let samples: Vec<f64> = per_rep.iter().map(|&(w, _)| w).collect();
    let mean_leak = per_rep.iter().map(|&(_, l)| l).sum::<f64>() / reps as f64;
    Ok(EmpiricalW {
        samples,
        meta: meta(mean_leak),
    })
}

/// One replication of the recombination check.
#[derive(Clone, Copy, Debug)]
pub struct EndogenyRep {
    /// `|W_root - sum_v L(v)^alpha [W]_v|` on the same tree.
    pub residual: f64,
    /// Alpha-mass pruned past the split generation (booked identically on
    /// both sides); bounds everything the two constructions dropped.
    pub leaked_mass: f64,
}

/// Grow one tree per replication to `split_depth + extra_depth`, then
/// compare the root-side martingale value against the recombination over
/// the generation-`split_depth` front. See the module docs for why the
/// regrown subtrees reproduce the root side exactly.
pub fn endogeny_residual(
    model: &WeightModel,
    alpha: f64,
    split_depth: u32,
    extra_depth: u32,
    reps: u64,
    prune_eps: f64,
    stream: RngStream,
) -> Result<Vec<EndogenyRep>> {
    let caps = Caps::default();
    if split_depth + extra_depth > caps.max_generation {
        return Err(Error::PopulationCap(format!(
            "total depth {} exceeds the generation cap {}",
            split_depth + extra_depth,
            caps.max_generation
        )));
    }
    let prune = Prune::threshold(alpha, prune_eps);
    let run_rep = |rep: u64| -> Result<EndogenyRep> {
        {
            let split = generation_front(
                model,
                split_depth,
                stream.replication(rep),
                prune,
                caps,
            )?;
            let ancestors: Vec<WeightedNode> = split.nodes.clone();
            let leak_before_split = split.leaked_mass;

            let mut root_side = split;
            for _ in 0..extra_depth {
                root_side = root_side.expand(model, prune, caps)?;
            }
            let w_root = root_side.alpha_mass(alpha);

            let mut recombined = 0.0f64;
            let mut subtree_leak = 0.0f64;
            for v in &ancestors {
                // Seed at v's absolute position: descendants then repeat the
                // root side's arithmetic and prune decisions exactly, and
                // the L(v)^alpha factor rides inside the exponent.
                let mut sub = Front {
                    kind: FrontKind::Generation(0),
                    nodes: vec![WeightedNode {
                        vertex: Vec::new(),
                        position: v.position,
                        stream: v.stream,
                    }],
                    leaked_mass: 0.0,
                    truncated_paths: 0,
                    capped: false,
                };
                for _ in 0..extra_depth {
                    sub = sub.expand(model, prune, caps)?;
                }
                recombined += sub.alpha_mass(alpha);
                subtree_leak += sub.leaked_mass;
            }
            debug_assert!(
                (subtree_leak - (root_side.leaked_mass - leak_before_split)).abs()
                    <= 1e-12 + 1e-9 * subtree_leak.abs(),
                "both sides must book the same drops"
            );
            Ok(EndogenyRep {
                residual: (w_root - recombined).abs(),
                leaked_mass: root_side.leaked_mass - leak_before_split,
            })
        }
    };
    // Same shortcut as in `sample_limit_w`: a realization-fixed model makes
    // every replication identical, so one stands for all of them.
    if model.is_realization_fixed() {
        let one = run_rep(0)?;
        return Ok(vec![one; reps as usize]);
    }
    (0..reps).into_par_iter().map(run_rep).collect()
}
