//! Admissibility audit: which structural assumptions the model satisfies.

use super::{parse_params, Task, TaskContext, TaskOutput};
use crate::model::{check_assumptions, Verdict};
use crate::report::ReportRow;
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Params {
    budget: u64,
    /// Finite-moment probe location; defaults to alpha/2 inside the check.
    theta_probe: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            budget: 200_000,
            theta_probe: None,
        }
    }
}

fn verdict_row(name: &str, v: &Verdict, asserted: bool) -> ReportRow {
    let stderr = v.evidence.as_ref().map_or(0.0, |e| e.stderr);
    ReportRow {
        name: name.into(),
        estimate: if v.holds { 1.0 } else { 0.0 },
        target: 1.0,
        stderr,
        z: 0.0,
        pass: !asserted || v.holds,
    }
}

pub struct CheckModel;

impl Task for CheckModel {
    fn name(&self) -> &'static str {
        "check-model"
    }

    fn run(&self, ctx: &TaskContext) -> Result<TaskOutput> {
        let (params, echo) = parse_params::<Params>(ctx.params)?;
        let mut out = TaskOutput::with_params(echo);
        let report = check_assumptions(
            ctx.model,
            params.budget,
            params.theta_probe,
            ctx.stream.named("assumptions"),
        )?;
        out.rows.push(verdict_row("a1_not_degenerate", &report.a1, true));
        out.rows.push(verdict_row("a2_supercritical", &report.a2, true));
        match report.a3_alpha {
            Some(alpha) => out.rows.push(ReportRow::info("a3_alpha", alpha)),
            None => {
                out.rows.push(ReportRow {
                    name: "a3_alpha".into(),
                    estimate: f64::NAN,
                    target: f64::NAN,
                    stderr: 0.0,
                    z: 0.0,
                    pass: false,
                });
                if let Some(note) = &report.a3_note {
                    out.warnings.push(format!("no characteristic exponent: {note}"));
                }
            }
        }
        out.rows.push(verdict_row("a4a_negative_drift", &report.a4a, false));
        out.rows
            .push(verdict_row("a4b_finite_moment_below", &report.a4b, false));
        out.rows
            .push(verdict_row("a5_factors_below_one", &report.a5, false));
        out.rows
            .push(ReportRow::info("lattice_span", report.lattice_span));
        let admissible = report.admissible();
        out.rows.push(ReportRow {
            name: "admissible".into(),
            estimate: if admissible { 1.0 } else { 0.0 },
            target: 1.0,
            stderr: 0.0,
            z: 0.0,
            pass: admissible,
        });
        for (name, v) in [
            ("a4a", &report.a4a),
            ("a4b", &report.a4b),
        ] {
            if !v.conclusive {
                out.warnings
                    .push(format!("{name} is inconclusive at budget {}", params.budget));
            }
        }
        Ok(out)
    }
}
