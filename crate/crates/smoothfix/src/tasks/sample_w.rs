//! Sample the martingale limit and persist it as a reusable cache.
//!
//! A rerun with identical inputs finds its own cache file and skips the
//! sampling entirely; `--overwrite` forces a fresh sample.

use super::{parse_params, target_row, Task, TaskContext, TaskOutput};
use crate::cache;
use crate::exponent::{find_alpha, AlphaSearch};
use crate::martingale::{sample_limit_w, WMeta};
use crate::numeric::RunningStat;
use crate::report::ReportRow;
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Params {
    /// Tilt exponent; located by search when omitted.
    alpha: Option<f64>,
    depth: u32,
    reps: u64,
    prune_eps: f64,
    /// Search settings used only when alpha is omitted.
    tolerance: f64,
    budget: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: None,
            depth: 14,
            reps: 10_000,
            prune_eps: 0.0,
            tolerance: 1e-12,
            budget: 200_000,
        }
    }
}

pub struct SampleW;

impl Task for SampleW {
    fn name(&self) -> &'static str {
        "sample-w"
    }

    fn run(&self, ctx: &TaskContext) -> Result<TaskOutput> {
        let (params, echo) = parse_params::<Params>(ctx.params)?;
        let mut out = TaskOutput::with_params(echo);
        let alpha = match params.alpha {
            Some(a) => a,
            None => {
                let search = AlphaSearch {
                    tolerance: params.tolerance,
                    ..AlphaSearch::default()
                };
                find_alpha(ctx.model, &search, params.budget, ctx.stream.named("alpha"))?.alpha
            }
        };
        let stream = ctx.stream.named("w");
        let identity = WMeta {
            model_checksum: ctx.model.checksum(),
            alpha,
            depth: params.depth,
            prune_eps: params.prune_eps,
            stream_state: stream.state(),
            reps: params.reps,
            mean_leak: 0.0,
        };
        let mut reused = false;
        let w = match cache::find_w(ctx.out_dir, &identity) {
            Some(path) if !ctx.overwrite => {
                reused = true;
                cache::load_w(&path)?
            }
            _ => {
                let w = sample_limit_w(
                    ctx.model,
                    alpha,
                    params.depth,
                    params.reps,
                    params.prune_eps,
                    stream,
                )?;
                cache::store_w(ctx.out_dir, &w, ctx.overwrite)?;
                w
            }
        };
        let mut stat = RunningStat::default();
        for &s in &w.samples {
            stat.push(s);
        }
        out.rows.push(ReportRow::info("alpha", alpha));
        out.rows.push(target_row("w_mean", &stat.estimate(), 1.0, 4.0));
        out.rows
            .push(ReportRow::info("w_zero_fraction", w.zero_fraction()));
        out.rows.push(ReportRow::info("w_mean_leak", w.meta.mean_leak));
        out.rows
            .push(ReportRow::info("cache_reused", if reused { 1.0 } else { 0.0 }));
        if w.meta.mean_leak > 1e-3 {
            out.warnings.push(format!(
                "pruning leaked {} alpha-mass per replication on average",
                w.meta.mean_leak
            ));
        }
        Ok(out)
    }
}
