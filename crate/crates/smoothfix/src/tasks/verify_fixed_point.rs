//! Check a constructed solution against one application of the smoothing
//! map on a log-spaced grid.

use super::{parse_params, Task, TaskContext, TaskOutput};
use crate::numeric::log_grid;
use crate::report::ReportRow;
use crate::solutions::{residual, SolutionDoc};
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    solution: SolutionDoc,
    #[serde(default = "default_grid_lo")]
    grid_lo: f64,
    #[serde(default = "default_grid_hi")]
    grid_hi: f64,
    #[serde(default = "default_grid_points")]
    grid_points: usize,
    #[serde(default = "default_reps")]
    reps: u64,
    #[serde(default = "default_sup_tolerance")]
    sup_tolerance: f64,
    #[serde(default = "default_z_limit")]
    z_limit: f64,
    #[serde(default = "default_write_grid")]
    write_grid: bool,
}

fn default_grid_lo() -> f64 {
    1e-3
}
fn default_grid_hi() -> f64 {
    10.0
}
fn default_grid_points() -> usize {
    30
}
fn default_reps() -> u64 {
    10_000
}
fn default_sup_tolerance() -> f64 {
    0.01
}
fn default_z_limit() -> f64 {
    4.0
}
fn default_write_grid() -> bool {
    true
}

pub struct VerifyFixedPoint;

impl Task for VerifyFixedPoint {
    fn name(&self) -> &'static str {
        "verify-fixed-point"
    }

    fn run(&self, ctx: &TaskContext) -> Result<TaskOutput> {
        let (params, echo) = parse_params::<Params>(ctx.params)?;
        let mut out = TaskOutput::with_params(echo);
        let sol = params
            .solution
            .resolve(ctx.model, ctx.out_dir, ctx.stream.named("resolve"))?;
        let tgrid = log_grid(params.grid_lo, params.grid_hi, params.grid_points);
        let report = residual(
            &sol,
            ctx.model,
            &tgrid,
            params.reps,
            ctx.stream.named("residual"),
        )?;
        out.rows.push(ReportRow {
            name: "residual_sup".into(),
            estimate: report.sup,
            target: 0.0,
            stderr: 0.0,
            z: 0.0,
            pass: report.sup <= params.sup_tolerance,
        });
        out.rows.push(ReportRow {
            name: "residual_worst_z".into(),
            estimate: report.worst_z,
            target: 0.0,
            stderr: 0.0,
            z: 0.0,
            pass: report.worst_z <= params.z_limit,
        });
        for p in &report.points {
            let diff = p.lhs.value - p.rhs.value;
            let se = (p.lhs.stderr * p.lhs.stderr + p.rhs.stderr * p.rhs.stderr).sqrt();
            out.rows.push(ReportRow {
                name: format!("residual[t={}]", p.t),
                estimate: diff,
                target: 0.0,
                stderr: se,
                z: p.z,
                pass: p.z.abs() <= params.z_limit,
            });
        }
        if params.write_grid {
            sol.on_grid(&tgrid)?
                .write_csv(&ctx.out_dir.join("solution_grid.csv"))?;
        }
        Ok(out)
    }
}
