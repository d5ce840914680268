//! Compare exhaustive tree expectations with spine estimates, for
//! generation fronts and the ladder front.

use super::{parse_params, Task, TaskContext, TaskOutput};
use crate::exponent::{find_alpha, AlphaSearch};
use crate::identities::{check_ladder_identity, check_many_to_one, Budgets, TestFunction};
use crate::report::ReportRow;
use crate::tree::Caps;
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default = "default_n_list")]
    n_list: Vec<u32>,
    #[serde(default = "default_g_list")]
    g_list: Vec<TestFunction>,
    #[serde(default = "default_reps")]
    tree_reps: u64,
    #[serde(default = "default_reps")]
    spine_reps: u64,
    #[serde(default = "default_ladder")]
    ladder: bool,
    #[serde(default = "default_max_generation")]
    max_generation: u32,
    #[serde(default = "default_z_limit")]
    z_limit: f64,
}

fn default_n_list() -> Vec<u32> {
    vec![1, 5, 8]
}
fn default_g_list() -> Vec<TestFunction> {
    vec![
        TestFunction::One,
        TestFunction::ExpNeg,
        TestFunction::ClampLinear { cap: 3.0 },
    ]
}
fn default_reps() -> u64 {
    10_000
}
fn default_ladder() -> bool {
    true
}
fn default_max_generation() -> u32 {
    64
}
fn default_z_limit() -> f64 {
    4.0
}

fn g_label(g: &TestFunction) -> String {
    match g {
        TestFunction::One => "one".into(),
        TestFunction::ExpNeg => "exp_neg".into(),
        TestFunction::ClampLinear { cap } => format!("clamp_linear_{cap}"),
    }
}

pub struct VerifyIdentities;

impl Task for VerifyIdentities {
    fn name(&self) -> &'static str {
        "verify-identities"
    }

    fn run(&self, ctx: &TaskContext) -> Result<TaskOutput> {
        let (params, echo) = parse_params::<Params>(ctx.params)?;
        let mut out = TaskOutput::with_params(echo);
        let alpha = match params.alpha {
            Some(a) => a,
            None => {
                find_alpha(
                    ctx.model,
                    &AlphaSearch::default(),
                    200_000,
                    ctx.stream.named("alpha"),
                )?
                .alpha
            }
        };
        let budgets = Budgets {
            tree_reps: params.tree_reps,
            spine_reps: params.spine_reps,
        };
        for &n in &params.n_list {
            for (gi, g) in params.g_list.iter().enumerate() {
                let stream = ctx
                    .stream
                    .named("mto")
                    .substream(u64::from(n))
                    .substream(gi as u64);
                let check = check_many_to_one(ctx.model, alpha, n, *g, budgets, stream)?;
                let se = (check.tree.stderr * check.tree.stderr
                    + check.spine.stderr * check.spine.stderr)
                    .sqrt();
                out.rows.push(ReportRow {
                    name: format!("many_to_one[n={n},g={}]", g_label(g)),
                    estimate: check.tree.value,
                    target: check.spine.value,
                    stderr: se,
                    z: check.z,
                    pass: check.z.abs() <= params.z_limit,
                });
            }
        }
        if params.ladder {
            let caps = Caps {
                max_generation: params.max_generation,
                ..Caps::default()
            };
            let mut one_check = None;
            for (gi, g) in params.g_list.iter().enumerate() {
                let stream = ctx.stream.named("ladder").substream(gi as u64);
                let check = check_ladder_identity(ctx.model, alpha, *g, budgets, caps, stream)?;
                let se = (check.tree.stderr * check.tree.stderr
                    + check.spine.stderr * check.spine.stderr)
                    .sqrt();
                out.rows.push(ReportRow {
                    name: format!("ladder[g={}]", g_label(g)),
                    estimate: check.tree.value,
                    target: check.spine.value,
                    stderr: se,
                    z: check.z,
                    pass: check.z.abs() <= params.z_limit,
                });
                if matches!(g, TestFunction::One) {
                    one_check = Some(check);
                }
            }
            let one_check = match one_check {
                Some(c) => c,
                None => check_ladder_identity(
                    ctx.model,
                    alpha,
                    TestFunction::One,
                    budgets,
                    caps,
                    ctx.stream.named("ladder").substream(params.g_list.len() as u64),
                )?,
            };
            let mass_z = one_check.tree.z(1.0);
            out.rows.push(ReportRow {
                name: "ladder_alpha_mass".into(),
                estimate: one_check.tree.value,
                target: 1.0,
                stderr: one_check.tree.stderr,
                z: mass_z,
                pass: mass_z.abs() <= params.z_limit,
            });
            out.rows.push(ReportRow {
                name: "ladder_mean_leak".into(),
                estimate: one_check.mean_leak,
                target: 0.0,
                stderr: 0.0,
                z: 0.0,
                pass: one_check.mean_leak < 1e-3,
            });
            if one_check.mean_leak >= 1e-3 {
                out.warnings.push(format!(
                    "ladder fronts leaked mean alpha-mass {:.3e}; raise max_generation",
                    one_check.mean_leak
                ));
            }
        }
        Ok(out)
    }
}
