//! Grow fronts and export them; purely observational, so every row is
//! informational and failures can only come from caps or bad parameters.

use super::{parse_params, Task, TaskContext, TaskOutput};
use crate::numeric::RunningStat;
use crate::report::ReportRow;
use crate::tree::{first_exit_front, generation_front, ladder_front, Caps, Prune};
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Generation,
    FirstExit,
    Ladder,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    /// Tilt exponent for masses, pruning, and the export column.
    alpha: f64,
    #[serde(default = "default_kind")]
    kind: Kind,
    #[serde(default = "default_n")]
    n: u32,
    #[serde(default = "default_level")]
    level: f64,
    #[serde(default = "default_reps")]
    reps: u64,
    #[serde(default)]
    prune_eps: f64,
    #[serde(default = "default_max_generation")]
    max_generation: u32,
    #[serde(default = "default_max_nodes")]
    max_nodes: u64,
    #[serde(default = "default_write_fronts")]
    write_fronts: bool,
}

fn default_kind() -> Kind {
    Kind::Generation
}
fn default_n() -> u32 {
    8
}
fn default_level() -> f64 {
    1.0
}
fn default_reps() -> u64 {
    1
}
fn default_max_generation() -> u32 {
    64
}
fn default_max_nodes() -> u64 {
    10_000_000
}
fn default_write_fronts() -> bool {
    true
}

pub struct Simulate;

impl Task for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn run(&self, ctx: &TaskContext) -> Result<TaskOutput> {
        let (params, echo) = parse_params::<Params>(ctx.params)?;
        let mut out = TaskOutput::with_params(echo);
        let caps = Caps {
            max_generation: params.max_generation,
            max_nodes: params.max_nodes as usize,
        };
        let prune = Prune::threshold(params.alpha, params.prune_eps);
        let stream = ctx.stream.named("fronts");
        let fronts: Vec<_> = (0..params.reps)
            .into_par_iter()
            .map(|rep| {
                let root = stream.replication(rep);
                match params.kind {
                    Kind::Generation => generation_front(ctx.model, params.n, root, prune, caps),
                    Kind::FirstExit => {
                        first_exit_front(ctx.model, params.level, root, prune, caps)
                    }
                    Kind::Ladder => ladder_front(ctx.model, root, prune, caps),
                }
            })
            .collect::<Result<_>>()?;
        let mut mass = RunningStat::default();
        let mut nodes = RunningStat::default();
        let mut leak = RunningStat::default();
        let mut capped = 0u64;
        for (rep, front) in fronts.iter().enumerate() {
            mass.push(front.alpha_mass(params.alpha));
            nodes.push(front.nodes.len() as f64);
            leak.push(front.leaked_mass);
            if front.capped {
                capped += 1;
            }
            if params.write_fronts {
                front.write_csv(
                    &ctx.out_dir.join(format!("front_{rep:04}.csv")),
                    params.alpha,
                )?;
            }
        }
        let mass_est = mass.estimate();
        out.rows.push(ReportRow {
            name: "alpha_mass_mean".into(),
            estimate: mass_est.value,
            target: 1.0,
            stderr: mass_est.stderr,
            z: mass_est.z(1.0),
            pass: true,
        });
        out.rows.push(ReportRow::info("nodes_mean", nodes.mean()));
        out.rows.push(ReportRow::info("leaked_mass_mean", leak.mean()));
        out.rows.push(ReportRow::info("capped_replications", capped as f64));
        if capped > 0 {
            out.warnings.push(format!(
                "{capped} of {} replications hit the generation cap",
                params.reps
            ));
        }
        Ok(out)
    }
}
