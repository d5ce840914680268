//! Small-t diagnostics for a solution: scaling ratios of 1 - f and the
//! slow variation of (1 - f(t)) / t^alpha.

use super::{parse_params, Task, TaskContext, TaskOutput};
use crate::diagnostics::{d_alpha_curve, regvar_curve};
use crate::numeric::log_grid;
use crate::report::ReportRow;
use crate::solutions::{PeriodicH, SolutionDoc};
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Params {
    solution: SolutionDoc,
    #[serde(default = "default_u_list")]
    u_list: Vec<f64>,
    #[serde(default = "default_t_ref")]
    t_ref: f64,
    #[serde(default = "default_tolerance")]
    ratio_tolerance: f64,
    #[serde(default = "default_tolerance")]
    d_score_tolerance: f64,
    #[serde(default = "default_write_curves")]
    write_curves: bool,
}

fn default_u_list() -> Vec<f64> {
    vec![0.5, 0.8]
}
fn default_t_ref() -> f64 {
    1e-3
}
fn default_tolerance() -> f64 {
    0.05
}
fn default_write_curves() -> bool {
    true
}

pub struct Diagnostics;

impl Task for Diagnostics {
    fn name(&self) -> &'static str {
        "diagnostics"
    }

    fn run(&self, ctx: &TaskContext) -> Result<TaskOutput> {
        let (params, echo) = parse_params::<Params>(ctx.params)?;
        let mut out = TaskOutput::with_params(echo);
        let sol = params
            .solution
            .resolve(ctx.model, ctx.out_dir, ctx.stream.named("resolve"))?;
        let f = |t: f64| sol.eval_f(t);
        let span = (ctx.model.lattice_span > 1.0).then_some(ctx.model.lattice_span);

        for &u in &params.u_list {
            let curve = regvar_curve(&f, sol.alpha, u, &[params.t_ref], span)?;
            match curve.ratios[0] {
                Some(r) => out.rows.push(ReportRow {
                    name: format!("regvar[u={u}]"),
                    estimate: r,
                    target: curve.target,
                    stderr: 0.0,
                    z: 0.0,
                    pass: (r - curve.target).abs() <= params.ratio_tolerance,
                }),
                None => {
                    out.rows.push(ReportRow {
                        name: format!("regvar[u={u}]"),
                        estimate: f64::NAN,
                        target: curve.target,
                        stderr: 0.0,
                        z: 0.0,
                        pass: false,
                    });
                    out.warnings.push(format!(
                        "1 - f depleted at t = {}; regvar ratio for u = {u} dropped",
                        params.t_ref
                    ));
                }
            }
        }

        let dgrid = log_grid(params.t_ref, params.t_ref * 100.0, 12);
        let h_ref = match &sol.h {
            PeriodicH::Lattice { .. } => Some(&sol.h),
            PeriodicH::Constant(_) => None,
        };
        let dcurve = d_alpha_curve(&f, sol.alpha, &dgrid, h_ref)?;
        out.rows.push(ReportRow {
            name: "d_score".into(),
            estimate: dcurve.score,
            target: 0.0,
            stderr: 0.0,
            z: 0.0,
            pass: dcurve.score <= params.d_score_tolerance,
        });
        if dcurve.dropped > 0 {
            out.warnings.push(format!(
                "{} of {} D(t) points depleted below the evaluation floor",
                dcurve.dropped,
                dgrid.len()
            ));
        }

        if params.write_curves {
            // On a lattice the written ratio grid must stay in one residue
            // class, so step by whole spans around t_ref.
            let wide: Vec<f64> = match span {
                Some(r) => (-2..=2).map(|k| params.t_ref * r.powi(k)).collect(),
                None => log_grid(params.t_ref / 10.0, params.t_ref * 10.0, 12),
            };
            for &u in &params.u_list {
                let curve = regvar_curve(&f, sol.alpha, u, &wide, span)?;
                curve.write_csv(&ctx.out_dir.join(format!("regvar_u{u}.csv")))?;
            }
            dcurve.write_csv(&ctx.out_dir.join("d_alpha.csv"))?;
        }
        Ok(out)
    }
}
