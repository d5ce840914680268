//! The characteristic exponent: the smallest root of `m(alpha) = 1`.
//!
//! Search strategy: a log-spaced coarse grid over `(0, search_max]` locates
//! the first sign change of `m - 1`, then bisection refines it. With Monte
//! Carlo moment evaluations a sign is only trusted when the estimate sits at
//! least 4 standard errors away from 1; an undecidable midpoint escalates the
//! sampling budget, and when even that cannot separate it from 1 the midpoint
//! is accepted only if the noise maps to a location error within tolerance.

use crate::model::{m_eval, m_prime_eval, WeightModel};
use crate::numeric::Estimate;
use crate::rng::RngStream;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which normalization assumptions the model satisfies at its exponent.
/// A4a is the mean-martingale regime (`m'(alpha) < 0` plus finite
/// `E Y log+ Y`); A4b is finiteness of `m` strictly below alpha.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    A4a,
    A4b,
    Both,
    Undetermined,
}

#[derive(Clone, Copy, Debug)]
pub struct AlphaSearch {
    pub tolerance: f64,
    pub search_max: f64,
    pub grid_points: usize,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            search_max: 16.0,
            grid_points: 64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CharacteristicExponent {
    pub alpha: f64,
    pub m_prime_at_alpha: Estimate,
    pub regime: Regime,
    pub tolerance: f64,
}

/// Sign of `m(theta) - 1`, trusted only when confidently separated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Above,
    Below,
    Unresolved,
}

fn side(est: &Estimate) -> Side {
    let d = est.value - 1.0;
    if est.exact {
        if d > 0.0 {
            Side::Above
        } else {
            Side::Below
        }
    } else if d.abs() > 4.0 * est.stderr {
        if d > 0.0 {
            Side::Above
        } else {
            Side::Below
        }
    } else {
        Side::Unresolved
    }
}

/// Highest multiplier applied to the base budget when a midpoint refuses
/// to separate from 1.
const MAX_BOOST: u64 = 64;

/// Find the smallest positive root of `m(alpha) = 1`.
///
/// Requires `m(0) = E N > 1` (A2). Fails with [`Error::NotBracketed`] when
/// no sign change exists below `search_max`, and [`Error::Inconclusive`]
/// when MC noise cannot locate the root to the requested tolerance. The
/// smallest-crossing property is re-checked on a 32-point interior grid.
pub fn find_alpha(
    model: &WeightModel,
    search: &AlphaSearch,
    budget: u64,
    stream: RngStream,
) -> Result<CharacteristicExponent> {
    model.validate()?;
    if !(search.search_max > 0.0) || search.grid_points < 2 {
        return Err(Error::Contract("search grid is degenerate".into()));
    }
    let mut eval_count = 0u64;
    let mut eval = |theta: f64, budget: u64| -> Result<Estimate> {
        eval_count += 1;
        m_eval(model, theta, budget, stream.substream(eval_count))
    };

    let at_zero = eval(0.0, budget)?;
    match side(&at_zero) {
        Side::Above => {}
        Side::Below => {
            return Err(Error::NotBracketed(format!(
                "E N = {} does not exceed 1 (A2 fails)",
                at_zero.value
            )))
        }
        Side::Unresolved => {
            return Err(Error::Inconclusive(
                "cannot separate E N from 1 at this budget".into(),
            ))
        }
    }

    // Log-spaced grid over [search_max * 1e-6, search_max]; theta = 0 anchors
    // the positive side below the grid. Unresolved grid points are skipped,
    // which can only widen the initial bracket, never misplace it.
    let hi = search.search_max;
    let lo = hi * 1e-6;
    let n = search.grid_points;
    let ratio = (hi / lo).powf(1.0 / (n as f64 - 1.0));
    let mut bracket: Option<(f64, f64, f64, f64)> = None;
    let mut last_above = (0.0f64, at_zero.value);
    let mut theta = lo;
    for _ in 0..n {
        let e = eval(theta, budget)?;
        match side(&e) {
            Side::Above => last_above = (theta, e.value),
            Side::Below => {
                bracket = Some((last_above.0, theta, last_above.1, e.value));
                break;
            }
            Side::Unresolved => {}
        }
        theta *= ratio;
    }
    let (mut a, mut b, mut m_a, mut m_b) = bracket.ok_or_else(|| {
        Error::NotBracketed(format!(
            "m stays above 1 on (0, {hi}]; no characteristic exponent in range"
        ))
    })?;

    let mut boost = 1u64;
    let mut noise_located: Option<f64> = None;
    for _ in 0..200 {
        if b - a <= search.tolerance {
            break;
        }
        let mid = 0.5 * (a + b);
        let mut est = eval(mid, budget.saturating_mul(boost))?;
        let mut s = side(&est);
        while s == Side::Unresolved && boost < MAX_BOOST {
            boost = (boost * 4).min(MAX_BOOST);
            est = eval(mid, budget.saturating_mul(boost))?;
            s = side(&est);
        }
        match s {
            Side::Above => {
                a = mid;
                m_a = est.value;
            }
            Side::Below => {
                b = mid;
                m_b = est.value;
            }
            Side::Unresolved => {
                // The midpoint is statistically indistinguishable from the
                // root. Translate the residual noise into a location error
                // through the bracket's secant slope; accept only when that
                // error is inside the requested tolerance.
                let slope = (m_b - m_a) / (b - a);
                let spread = if slope.abs() > 0.0 {
                    4.0 * est.stderr / slope.abs()
                } else {
                    f64::INFINITY
                };
                if spread <= search.tolerance {
                    noise_located = Some(mid);
                    break;
                }
                return Err(Error::Inconclusive(format!(
                    "root located only to within {spread:.3e} at this budget \
                     (tolerance {})",
                    search.tolerance
                )));
            }
        }
    }
    let alpha = noise_located.unwrap_or(0.5 * (a + b));

    let at_alpha = eval(alpha, budget)?;
    if at_alpha.exact && (at_alpha.value - 1.0).abs() > search.tolerance.max(1e-9) {
        return Err(Error::Inconclusive(format!(
            "m({alpha}) = {} misses 1 beyond tolerance; m may be too steep",
            at_alpha.value
        )));
    }

    // Smallest-crossing re-check: m must stay above 1 on the interior grid.
    for k in 1..=32 {
        let beta = alpha * f64::from(k) / 33.0;
        if side(&eval(beta, budget)?) == Side::Below {
            return Err(Error::NotBracketed(format!(
                "m({beta}) < 1 below the located root; smaller crossing missed"
            )));
        }
    }

    let m_prime = m_prime_eval(model, alpha, budget, stream.named("m-prime"))?;
    let regime = classify_with(model, alpha, &m_prime, alpha / 2.0, budget, stream)?;
    Ok(CharacteristicExponent {
        alpha,
        m_prime_at_alpha: m_prime,
        regime,
        tolerance: search.tolerance,
    })
}

/// Classify which normalization route applies at a known exponent.
///
/// `theta_probe` must lie strictly below alpha; it witnesses A4b.
pub fn classify_regime(
    model: &WeightModel,
    ce: &CharacteristicExponent,
    theta_probe: f64,
    budget: u64,
    stream: RngStream,
) -> Result<Regime> {
    classify_with(model, ce.alpha, &ce.m_prime_at_alpha, theta_probe, budget, stream)
}

pub(crate) fn classify_with(
    model: &WeightModel,
    alpha: f64,
    m_prime: &Estimate,
    theta_probe: f64,
    budget: u64,
    stream: RngStream,
) -> Result<Regime> {
    if !(theta_probe < alpha) {
        return Err(Error::Contract(
            "A4b probe must lie strictly below alpha".into(),
        ));
    }
    let a4a = {
        let negative = if m_prime.exact {
            m_prime.value < 0.0
        } else {
            m_prime.value + 4.0 * m_prime.stderr < 0.0
        };
        negative && xlogx_probe(model, alpha, budget.max(1000), stream.named("xlogx"))?.0
    };
    let probe = m_eval(model, theta_probe, budget, stream.named("a4b-probe"))?;
    let a4b = probe.value.is_finite();
    Ok(match (a4a, a4b) {
        (true, true) => Regime::Both,
        (true, false) => Regime::A4a,
        (false, true) => Regime::A4b,
        (false, false) => Regime::Undetermined,
    })
}

/// MC probe of `E Y log+ Y`, `Y = sum_i T_i^alpha`. Returns (finite-looking,
/// estimate); the verdict is heuristic for genuinely heavy tails.
pub(crate) fn xlogx_probe(
    model: &WeightModel,
    alpha: f64,
    budget: u64,
    stream: RngStream,
) -> Result<(bool, Estimate)> {
    let mut stat = crate::numeric::RunningStat::default();
    for i in 0..budget {
        let t = model.sample(&mut stream.replication(i).rng())?;
        let y: f64 = t.iter().map(|&w| w.powf(alpha)).sum();
        let sample = if y > 1.0 { y * y.ln() } else { 0.0 };
        if !sample.is_finite() {
            return Ok((
                false,
                Estimate {
                    value: f64::INFINITY,
                    stderr: f64::INFINITY,
                    exact: false,
                },
            ));
        }
        stat.push(sample);
    }
    let est = stat.estimate();
    let finite = est.value.is_finite() && est.stderr <= 0.5 * est.value.abs().max(1.0);
    Ok((finite, est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::register_moment_formula;
    use crate::model::MomentFormula;
    use std::sync::Arc;

    fn stream() -> RngStream {
        RngStream::new(5150).named("exponent")
    }

    #[test]
    fn binary_half_alpha_is_one() {
        let ce = find_alpha(&WeightModel::binary_half(), &AlphaSearch::default(), 0, stream())
            .unwrap();
        assert!((ce.alpha - 1.0).abs() <= 1e-10, "alpha {}", ce.alpha);
        assert!((ce.m_prime_at_alpha.value - 0.5f64.ln()).abs() <= 1e-9);
        assert_eq!(ce.regime, Regime::Both);
    }

    #[test]
    fn uniform_pair_alpha_is_one() {
        let ce = find_alpha(&WeightModel::uniform_pair(), &AlphaSearch::default(), 0, stream())
            .unwrap();
        assert!((ce.alpha - 1.0).abs() <= 1e-10);
        assert!((ce.m_prime_at_alpha.value + 0.5).abs() <= 1e-9);
    }

    #[test]
    fn poisson_uniform_alpha_is_half() {
        let ce =
            find_alpha(&WeightModel::poisson_uniform(), &AlphaSearch::default(), 0, stream())
                .unwrap();
        assert!((ce.alpha - 0.5).abs() <= 1e-10);
    }

    #[test]
    fn halving_tolerance_is_stable() {
        // Nested bisection: tightening the tolerance moves the root by at
        // most the previous tolerance.
        let mut tol = 1e-4;
        let mut prev: Option<f64> = None;
        while tol >= 1e-12 {
            let s = AlphaSearch {
                tolerance: tol,
                ..AlphaSearch::default()
            };
            let ce = find_alpha(&WeightModel::two_scale_mix(), &s, 0, stream()).unwrap();
            if let Some(p) = prev {
                assert!((ce.alpha - p).abs() <= 2.0 * tol, "jump at tol {tol}");
            }
            prev = Some(ce.alpha);
            tol /= 2.0;
        }
    }

    #[test]
    fn subcritical_mean_count_is_rejected() {
        let m = WeightModel {
            variant: crate::model::ModelVariant::Deterministic {
                weights: vec![0.5],
            },
            lattice_span: 2.0,
            exact_m: None,
        };
        assert!(matches!(
            find_alpha(&m, &AlphaSearch::default(), 0, stream()),
            Err(Error::NotBracketed(_))
        ));
    }

    #[test]
    fn mc_only_model_finds_coarse_alpha() {
        let mut m = WeightModel::uniform_pair();
        m.exact_m = None;
        let s = AlphaSearch {
            tolerance: 0.05,
            ..AlphaSearch::default()
        };
        let ce = find_alpha(&m, &s, 40_000, stream().named("mc")).unwrap();
        assert!((ce.alpha - 1.0).abs() <= 0.1, "alpha {}", ce.alpha);
    }

    #[test]
    fn tangential_regime_is_a4b_only() {
        struct Tangent;
        impl MomentFormula for Tangent {
            fn m(&self, t: f64) -> f64 {
                1.0 + (1.0 - t).powi(3)
            }
            fn m_prime(&self, t: f64) -> f64 {
                -3.0 * (1.0 - t).powi(2)
            }
        }
        register_moment_formula("tangent_for_regime", Arc::new(Tangent));
        let mut model = WeightModel::binary_half();
        model.exact_m = Some("tangent_for_regime".into());
        let ce = CharacteristicExponent {
            alpha: 1.0,
            m_prime_at_alpha: Estimate::exact(0.0),
            regime: Regime::Undetermined,
            tolerance: 1e-12,
        };
        let r = classify_regime(&model, &ce, 0.5, 1000, stream()).unwrap();
        assert_eq!(r, Regime::A4b);
    }
}
