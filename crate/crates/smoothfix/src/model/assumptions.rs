//! Assumption screening: each of A1 to A5 gets a verdict with evidence,
//! and the report records the located exponent when A3 holds.
//!
//! Structural facts (degenerate weights, mean counts, support bounds) are
//! decided exactly from the model document. Only the exponent search and
//! the `E Y log+ Y` probe ever touch Monte Carlo, and their verdicts say so
//! through the `conclusive` flag.

use super::moments::{has_exact_m, m_eval};
use super::{CountLaw, FactorLaw, ModelVariant, WeightModel};
use crate::exponent::{find_alpha, xlogx_probe, AlphaSearch, Regime};
use crate::numeric::Estimate;
use crate::rng::RngStream;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// One assumption's outcome. `conclusive` separates exact structural checks
/// from sampling evidence that heavy tails could fool.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub holds: bool,
    pub conclusive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Estimate>,
}

impl Verdict {
    fn exact(holds: bool) -> Self {
        Verdict {
            holds,
            conclusive: true,
            evidence: None,
        }
    }

    fn exact_with(holds: bool, evidence: Estimate) -> Self {
        Verdict {
            holds,
            conclusive: true,
            evidence: Some(evidence),
        }
    }

    /// Could not be evaluated, typically because no exponent exists.
    fn open() -> Self {
        Verdict {
            holds: false,
            conclusive: false,
            evidence: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1: Verdict,
    pub a2: Verdict,
    pub a3_alpha: Option<f64>,
    /// Why no exponent was located, when `a3_alpha` is absent.
    pub a3_note: Option<String>,
    pub a4a: Verdict,
    pub a4b: Verdict,
    pub a5: Verdict,
    pub lattice_span: f64,
    pub regime: Regime,
}

impl AssumptionReport {
    /// True when a nontrivial fixed point can exist at all: non-degenerate
    /// weights, supercritical branching, and a located exponent.
    pub fn admissible(&self) -> bool {
        self.a1.holds && self.a2.holds && self.a3_alpha.is_some()
    }
}

/// Screen a model against A1 to A5.
///
/// `budget` is the per-evaluation Monte Carlo sample count for models with
/// no closed-form `m`; exact models ignore it. `theta_probe` overrides the
/// A4b probe point (default `alpha / 2`).
pub fn check_assumptions(
    model: &WeightModel,
    budget: u64,
    theta_probe: Option<f64>,
    stream: RngStream,
) -> Result<AssumptionReport> {
    model.validate()?;
    let a1 = Verdict::exact(!weights_degenerate(&model.variant));
    let mean_n = model.mean_count();
    let a2 = Verdict::exact_with(mean_n > 1.0, Estimate::exact(mean_n));
    let a5 = a5_verdict(model);

    // Noisy m evaluations cannot hit a 1e-12 bracket; settle for locating
    // the root to within a percent there.
    let search = AlphaSearch {
        tolerance: if has_exact_m(model) { 1e-12 } else { 1e-2 },
        ..AlphaSearch::default()
    };
    let located = match find_alpha(model, &search, budget, stream.named("a3")) {
        Ok(ce) => Ok(ce),
        Err(Error::NotBracketed(msg)) | Err(Error::Inconclusive(msg)) => Err(msg),
        Err(e) => return Err(e),
    };

    let (a3_alpha, a3_note, a4a, a4b, regime) = match located {
        Ok(ce) => {
            let mp = ce.m_prime_at_alpha;
            let negative = if mp.exact {
                mp.value < 0.0
            } else {
                mp.value + 4.0 * mp.stderr < 0.0
            };
            let (xlogx_ok, xlogx) =
                xlogx_probe(model, ce.alpha, budget.max(1000), stream.named("a4a-xlogx"))?;
            let a4a = Verdict {
                holds: negative && xlogx_ok,
                conclusive: mp.exact && xlogx.stderr <= 0.1 * xlogx.value.abs().max(1.0),
                evidence: Some(mp),
            };
            let probe = theta_probe.unwrap_or(ce.alpha / 2.0);
            if !(probe > 0.0 && probe < ce.alpha) {
                return Err(Error::Contract(format!(
                    "A4b probe {probe} must lie in (0, alpha)"
                )));
            }
            let pm = m_eval(model, probe, budget, stream.named("a4b-probe"))?;
            let a4b = Verdict {
                holds: pm.value.is_finite(),
                conclusive: pm.exact,
                evidence: Some(pm),
            };
            (Some(ce.alpha), None, a4a, a4b, ce.regime)
        }
        Err(note) => (
            None,
            Some(note),
            Verdict::open(),
            Verdict::open(),
            Regime::Undetermined,
        ),
    };

    Ok(AssumptionReport {
        a1,
        a2,
        a3_alpha,
        a3_note,
        a4a,
        a4b,
        a5,
        lattice_span: model.lattice_span,
        regime,
    })
}

/// True when every factor is 0 or 1 in every realization, which collapses
/// the transform to a trivial map (A1 fails).
fn weights_degenerate(variant: &ModelVariant) -> bool {
    let all_unit = |ws: &[f64]| ws.iter().all(|&w| w == 0.0 || w == 1.0);
    match variant {
        ModelVariant::Deterministic { weights } => all_unit(weights),
        ModelVariant::FiniteMixture { atoms } => atoms.iter().all(|a| all_unit(&a.weights)),
        ModelVariant::IidCount { count, factor } => {
            matches!(count, CountLaw::Fixed { value: 0 })
                || factor_fixed_value(factor) == Some(1.0)
        }
    }
}

fn factor_fixed_value(f: &FactorLaw) -> Option<f64> {
    match f {
        FactorLaw::Fixed { value } => Some(*value),
        FactorLaw::Power { base, exponent } => {
            factor_fixed_value(base).map(|v| v.powf(*exponent))
        }
        _ => None,
    }
}

fn a5_verdict(model: &WeightModel) -> Verdict {
    let bound = model.max_factor_bound();
    let holds = match &model.variant {
        ModelVariant::Deterministic { .. } | ModelVariant::FiniteMixture { .. } => bound < 1.0,
        ModelVariant::IidCount { factor, .. } => strictly_below_one(factor),
    };
    Verdict::exact_with(holds, Estimate::exact(bound))
}

/// Support contained in (0, 1). Uniform sampling is half-open at `hi`, so
/// `hi = 1` still qualifies; positive powers preserve the property.
fn strictly_below_one(f: &FactorLaw) -> bool {
    match f {
        FactorLaw::Fixed { value } => *value < 1.0,
        FactorLaw::Uniform { hi, .. } => *hi <= 1.0,
        FactorLaw::Exponential { .. } => false,
        FactorLaw::Power { base, .. } => strictly_below_one(base),
    }
}
