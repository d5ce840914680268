//! Locate the characteristic exponent and classify the regime at it.

use super::{parse_params, Task, TaskContext, TaskOutput};
use crate::exponent::{find_alpha, AlphaSearch, Regime};
use crate::report::ReportRow;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Params {
    tolerance: f64,
    search_max: f64,
    grid_points: usize,
    budget: u64,
}

impl Default for Params {
    fn default() -> Self {
        let search = AlphaSearch::default();
        Params {
            tolerance: search.tolerance,
            search_max: search.search_max,
            grid_points: search.grid_points,
            budget: 200_000,
        }
    }
}

pub struct FindAlpha;

impl Task for FindAlpha {
    fn name(&self) -> &'static str {
        "find-alpha"
    }

    fn run(&self, ctx: &TaskContext) -> Result<TaskOutput> {
        let (params, echo) = parse_params::<Params>(ctx.params)?;
        let mut out = TaskOutput::with_params(echo);
        let search = AlphaSearch {
            tolerance: params.tolerance,
            search_max: params.search_max,
            grid_points: params.grid_points,
        };
        match find_alpha(ctx.model, &search, params.budget, ctx.stream.named("alpha")) {
            Ok(exponent) => {
                out.rows.push(ReportRow {
                    name: "alpha".into(),
                    estimate: exponent.alpha,
                    target: exponent.alpha,
                    stderr: exponent.tolerance,
                    z: 0.0,
                    pass: true,
                });
                let mp = &exponent.m_prime_at_alpha;
                out.rows.push(ReportRow {
                    name: "m_prime_at_alpha".into(),
                    estimate: mp.value,
                    target: mp.value,
                    stderr: mp.stderr,
                    z: 0.0,
                    pass: true,
                });
                let (a4a, a4b) = match exponent.regime {
                    Regime::A4a => (1.0, 0.0),
                    Regime::A4b => (0.0, 1.0),
                    Regime::Both => (1.0, 1.0),
                    Regime::Undetermined => (0.0, 0.0),
                };
                out.rows.push(ReportRow::info("regime_negative_drift", a4a));
                out.rows.push(ReportRow::info("regime_finite_moment_below", a4b));
                if exponent.regime == Regime::Undetermined {
                    out.warnings
                        .push("regime undetermined at this budget".into());
                }
            }
            Err(e @ (Error::NotBracketed(_) | Error::Inconclusive(_))) => {
                out.rows.push(ReportRow {
                    name: "alpha".into(),
                    estimate: f64::NAN,
                    target: f64::NAN,
                    stderr: 0.0,
                    z: 0.0,
                    pass: false,
                });
                out.warnings.push(e.to_string());
            }
            Err(e) => return Err(e),
        }
        Ok(out)
    }
}
