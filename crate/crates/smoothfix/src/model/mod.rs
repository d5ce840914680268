//! Weight models: the law of the factor sequence `T = (T_1, ..., T_N)`.
//!
//! A model fixes everything downstream: the mean measure
//! `m(theta) = E sum_i T_i^theta`, the characteristic exponent, and the
//! branching tree the martingales live on. Three closed families are
//! provided, each serializing to a strict JSON document so experiment
//! configs pin the law exactly. Lattice structure is declared by the
//! modeler, never detected from samples.
//!
//! Assumptions referenced as A1 to A5 throughout the crate:
//!
//! * A1: `P(every T_i is 0 or 1) < 1`.
//! * A2: `E N > 1` (supercritical branching).
//! * A3: some `alpha > 0` has `m(alpha) = 1` with `m > 1` on `[0, alpha)`.
//! * A4a: `m'(alpha) < 0` and `E Y log+ Y < inf` for `Y = sum_i T_i^alpha`
//!   (mean-martingale normalization).
//! * A4b: `m(theta) < inf` for some `theta < alpha`.
//! * A5: `T_i < 1` almost surely.

mod assumptions;
mod moments;

pub use assumptions::{check_assumptions, AssumptionReport, Verdict};
pub use moments::{
    has_exact_m, m_eval, m_prime_eval, moment_formula, register_moment_formula, MomentFormula,
    DIVERGENCE_CAP,
};

use crate::numeric::fnv64;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

/// One realization of the factor sequence; finite, strictly positive values.
pub type WeightSequence = Vec<f64>;

static DROPPED_ZEROS: AtomicU64 = AtomicU64::new(0);

/// Number of zero factors dropped by samplers since process start. Zeros in
/// a declared weight vector are legal input but carry no branching mass, so
/// samplers remove them and count the removals here.
pub fn dropped_zero_count() -> u64 {
    DROPPED_ZEROS.load(Ordering::Relaxed)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureAtom {
    pub probability: f64,
    pub weights: WeightSequence,
}

/// Law of the child count `N` for [`ModelVariant::IidCount`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountLaw {
    Fixed { value: u32 },
    Poisson { mean: f64 },
    Binomial { trials: u32, success: f64 },
}

impl CountLaw {
    pub fn mean(&self) -> f64 {
        match self {
            CountLaw::Fixed { value } => f64::from(*value),
            CountLaw::Poisson { mean } => *mean,
            CountLaw::Binomial { trials, success } => f64::from(*trials) * success,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            CountLaw::Fixed { .. } => Ok(()),
            CountLaw::Poisson { mean } if mean.is_finite() && *mean > 0.0 => Ok(()),
            CountLaw::Binomial { success, .. } if (0.0..=1.0).contains(success) => Ok(()),
            _ => Err(Error::InvalidModel("count law parameter out of range".into())),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        match self {
            CountLaw::Fixed { value } => *value,
            CountLaw::Poisson { mean } => {
                let d = rand_distr::Poisson::new(*mean).expect("validated mean");
                d.sample(rng) as u32
            }
            CountLaw::Binomial { trials, success } => {
                let d = rand_distr::Binomial::new(u64::from(*trials), *success)
                    .expect("validated probability");
                d.sample(rng) as u32
            }
        }
    }
}

/// Law of a single factor for [`ModelVariant::IidCount`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorLaw {
    Fixed {
        value: f64,
    },
    /// Uniform on `[lo, hi)`; requires `0 <= lo < hi`.
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
    /// `base` raised to a fixed positive power. Closes the family under the
    /// substitution `T -> T^alpha`.
    Power {
        base: Box<FactorLaw>,
        exponent: f64,
    },
}

impl FactorLaw {
    fn validate(&self) -> Result<()> {
        match self {
            FactorLaw::Fixed { value } if value.is_finite() && *value > 0.0 => Ok(()),
            FactorLaw::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo < hi => Ok(()),
            FactorLaw::Exponential { rate } if rate.is_finite() && *rate > 0.0 => Ok(()),
            FactorLaw::Power { base, exponent } if exponent.is_finite() && *exponent > 0.0 => {
                base.validate()
            }
            _ => Err(Error::InvalidModel("factor law parameter out of range".into())),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<f64> {
        let v = match self {
            FactorLaw::Fixed { value } => *value,
            FactorLaw::Uniform { lo, hi } => rng.random::<f64>() * (hi - lo) + lo,
            FactorLaw::Exponential { rate } => {
                let e: f64 = rand_distr::Exp1.sample(rng);
                e / rate
            }
            FactorLaw::Power { base, exponent } => base.sample(rng)?.powf(*exponent),
        };
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidModel(
                "factor law produced a non-positive value".into(),
            ))
        }
    }

    /// Supremum of the support; `inf` when unbounded.
    fn upper_bound(&self) -> f64 {
        match self {
            FactorLaw::Fixed { value } => *value,
            FactorLaw::Uniform { hi, .. } => *hi,
            FactorLaw::Exponential { .. } => f64::INFINITY,
            FactorLaw::Power { base, exponent } => base.upper_bound().powf(*exponent),
        }
    }

    fn powered(&self, alpha: f64) -> FactorLaw {
        match self {
            FactorLaw::Fixed { value } => FactorLaw::Fixed {
                value: value.powf(alpha),
            },
            FactorLaw::Power { base, exponent } => FactorLaw::Power {
                base: base.clone(),
                exponent: exponent * alpha,
            },
            other => FactorLaw::Power {
                base: Box::new(other.clone()),
                exponent: alpha,
            },
        }
    }

    fn lattice_compatible(&self, log_span: f64) -> Result<()> {
        match self {
            FactorLaw::Fixed { value } => check_on_lattice(*value, log_span),
            FactorLaw::Power { .. } | FactorLaw::Uniform { .. } | FactorLaw::Exponential { .. } => {
                Err(Error::InvalidModel(
                    "continuous factor law cannot declare lattice span > 1".into(),
                ))
            }
        }
    }
}

fn check_on_lattice(w: f64, log_span: f64) -> Result<()> {
    let k = w.ln() / log_span;
    if (k - k.round()).abs() <= 1e-9 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "weight {w} is off the declared lattice"
        )))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelVariant {
    /// The same weight vector in every realization.
    Deterministic { weights: WeightSequence },
    /// Finitely many weight vectors with fixed probabilities.
    FiniteMixture { atoms: Vec<MixtureAtom> },
    /// Random count `N`, then `N` iid factors.
    IidCount { count: CountLaw, factor: FactorLaw },
}

fn default_span() -> f64 {
    1.0
}

/// A weight model plus its declared structure. See the module docs for the
/// JSON schema; unknown fields are rejected everywhere.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightModel {
    pub variant: ModelVariant,
    /// Declared multiplicative lattice span `r >= 1`; 1 means non-geometric.
    #[serde(default = "default_span")]
    pub lattice_span: f64,
    /// Name of a registered closed-form evaluator for `m(theta)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_m: Option<String>,
}

impl WeightModel {
    pub fn validate(&self) -> Result<()> {
        if !self.lattice_span.is_finite() || self.lattice_span < 1.0 {
            return Err(Error::InvalidModel("lattice span must be >= 1".into()));
        }
        match &self.variant {
            ModelVariant::Deterministic { weights } => validate_weights(weights)?,
            ModelVariant::FiniteMixture { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidModel("mixture needs at least one atom".into()));
                }
                let mut total = 0.0;
                for atom in atoms {
                    if !(atom.probability > 0.0 && atom.probability <= 1.0) {
                        return Err(Error::InvalidModel(
                            "mixture probabilities must lie in (0, 1]".into(),
                        ));
                    }
                    total += atom.probability;
                    validate_weights(&atom.weights)?;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "mixture probabilities sum to {total}, not 1"
                    )));
                }
            }
            ModelVariant::IidCount { count, factor } => {
                count.validate()?;
                factor.validate()?;
            }
        }
        if self.lattice_span > 1.0 {
            let log_span = self.lattice_span.ln();
            match &self.variant {
                ModelVariant::Deterministic { weights } => {
                    for &w in weights.iter().filter(|&&w| w > 0.0) {
                        check_on_lattice(w, log_span)?;
                    }
                }
                ModelVariant::FiniteMixture { atoms } => {
                    for atom in atoms {
                        for &w in atom.weights.iter().filter(|&&w| w > 0.0) {
                            check_on_lattice(w, log_span)?;
                        }
                    }
                }
                ModelVariant::IidCount { factor, .. } => factor.lattice_compatible(log_span)?,
            }
        }
        if let Some(name) = &self.exact_m {
            if moments::moment_formula(name).is_none() {
                return Err(Error::UnknownFormula(name.clone()));
            }
        }
        Ok(())
    }

    /// Draw one realization. Zero weights are dropped here (counted by
    /// [`dropped_zero_count`]); the returned sequence is strictly positive.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<WeightSequence> {
        match &self.variant {
            ModelVariant::Deterministic { weights } => Ok(filter_zeros(weights)),
            ModelVariant::FiniteMixture { atoms } => {
                if atoms.len() == 1 {
                    return Ok(filter_zeros(&atoms[0].weights));
                }
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for atom in atoms {
                    acc += atom.probability;
                    if u < acc {
                        return Ok(filter_zeros(&atom.weights));
                    }
                }
                Ok(filter_zeros(&atoms.last().expect("non-empty").weights))
            }
            ModelVariant::IidCount { count, factor } => {
                let n = count.sample(rng);
                let mut out = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    out.push(factor.sample(rng)?);
                }
                Ok(out)
            }
        }
    }

    /// True when every realization is the same sequence, so all tree
    /// functionals are deterministic and comparisons can demand exactness.
    pub fn is_realization_fixed(&self) -> bool {
        match &self.variant {
            ModelVariant::Deterministic { .. } => true,
            ModelVariant::FiniteMixture { atoms } => atoms.len() == 1,
            ModelVariant::IidCount { count, factor } => {
                matches!(count, CountLaw::Fixed { .. }) && factor_is_fixed(factor)
            }
        }
    }

    pub fn mean_count(&self) -> f64 {
        match &self.variant {
            ModelVariant::Deterministic { weights } => {
                weights.iter().filter(|&&w| w > 0.0).count() as f64
            }
            ModelVariant::FiniteMixture { atoms } => atoms
                .iter()
                .map(|a| a.probability * a.weights.iter().filter(|&&w| w > 0.0).count() as f64)
                .sum(),
            ModelVariant::IidCount { count, .. } => count.mean(),
        }
    }

    /// Supremum of the factor support over all realizations.
    pub fn max_factor_bound(&self) -> f64 {
        match &self.variant {
            ModelVariant::Deterministic { weights } => {
                weights.iter().cloned().fold(0.0, f64::max)
            }
            ModelVariant::FiniteMixture { atoms } => atoms
                .iter()
                .flat_map(|a| a.weights.iter().cloned())
                .fold(0.0, f64::max),
            ModelVariant::IidCount { factor, .. } => factor.upper_bound(),
        }
    }

    /// The model for `T^(alpha) = (T_1^alpha, ...)`. Tilted-walk statements
    /// with exponent `alpha` become exponent-1 statements for this model.
    pub fn alpha_substituted(&self, alpha: f64) -> Result<WeightModel> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Contract("substitution exponent must be positive".into()));
        }
        let variant = match &self.variant {
            ModelVariant::Deterministic { weights } => ModelVariant::Deterministic {
                weights: weights.iter().map(|w| w.powf(alpha)).collect(),
            },
            ModelVariant::FiniteMixture { atoms } => ModelVariant::FiniteMixture {
                atoms: atoms
                    .iter()
                    .map(|a| MixtureAtom {
                        probability: a.probability,
                        weights: a.weights.iter().map(|w| w.powf(alpha)).collect(),
                    })
                    .collect(),
            },
            ModelVariant::IidCount { count, factor } => ModelVariant::IidCount {
                count: count.clone(),
                factor: factor.powered(alpha),
            },
        };
        Ok(WeightModel {
            variant,
            lattice_span: if self.lattice_span > 1.0 {
                self.lattice_span.powf(alpha)
            } else {
                1.0
            },
            exact_m: None,
        })
    }

    /// Stable fingerprint of the model document; names caches.
    pub fn checksum(&self) -> String {
        let json = serde_json::to_string(self).expect("model serializes");
        format!("{:016x}", fnv64(json.as_bytes()))
    }

    // Reference models used across tests, docs, and example configs.

    /// Two children of weight 1/2; `m(theta) = 2^(1-theta)`, alpha = 1.
    pub fn binary_half() -> Self {
        WeightModel {
            variant: ModelVariant::Deterministic {
                weights: vec![0.5, 0.5],
            },
            lattice_span: 2.0,
            exact_m: Some("binary_half".into()),
        }
    }

    /// Three children of weight 1/3; `m(theta) = 3^(1-theta)`, alpha = 1.
    pub fn ternary_third() -> Self {
        WeightModel {
            variant: ModelVariant::Deterministic {
                weights: vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            },
            lattice_span: 3.0,
            exact_m: Some("ternary_third".into()),
        }
    }

    /// Two iid Uniform(0,1) factors; `m(theta) = 2/(theta+1)`, alpha = 1.
    pub fn uniform_pair() -> Self {
        WeightModel {
            variant: ModelVariant::IidCount {
                count: CountLaw::Fixed { value: 2 },
                factor: FactorLaw::Uniform { lo: 0.0, hi: 1.0 },
            },
            lattice_span: 1.0,
            exact_m: Some("uniform_pair".into()),
        }
    }

    /// Mixture of [0.2, 1.2] (probability 0.6) and [0.2] (probability 0.4);
    /// `m(theta) = 0.2^theta + 0.6 * 1.2^theta`, alpha = 0.71485...
    /// The factor above 1 makes ladder stopping lines genuinely mixed-depth.
    pub fn two_scale_mix() -> Self {
        WeightModel {
            variant: ModelVariant::FiniteMixture {
                atoms: vec![
                    MixtureAtom {
                        probability: 0.6,
                        weights: vec![0.2, 1.2],
                    },
                    MixtureAtom {
                        probability: 0.4,
                        weights: vec![0.2],
                    },
                ],
            },
            lattice_span: 1.0,
            exact_m: None,
        }
    }

    /// Poisson(3/2) count of iid Uniform(0,1) factors;
    /// `m(theta) = 1.5/(theta+1)`, alpha = 1/2. Extinction has positive
    /// probability, exercising empty realizations downstream.
    pub fn poisson_uniform() -> Self {
        WeightModel {
            variant: ModelVariant::IidCount {
                count: CountLaw::Poisson { mean: 1.5 },
                factor: FactorLaw::Uniform { lo: 0.0, hi: 1.0 },
            },
            lattice_span: 1.0,
            exact_m: Some("poisson_uniform_15".into()),
        }
    }
}

fn factor_is_fixed(f: &FactorLaw) -> bool {
    match f {
        FactorLaw::Fixed { .. } => true,
        FactorLaw::Power { base, .. } => factor_is_fixed(base),
        _ => false,
    }
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidModel(format!(
                "weight {w} must be finite and non-negative"
            )));
        }
    }
    Ok(())
}

fn filter_zeros(weights: &[f64]) -> WeightSequence {
    let mut out = Vec::with_capacity(weights.len());
    for &w in weights {
        if w > 0.0 {
            out.push(w);
        } else {
            DROPPED_ZEROS.fetch_add(1, Ordering::Relaxed);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn json_round_trip_is_strict() {
        let m = WeightModel::uniform_pair();
        let json = serde_json::to_string(&m).unwrap();
        let back: WeightModel = serde_json::from_str(&json).unwrap();
        back.validate().unwrap();
        assert_eq!(back.checksum(), m.checksum());

        let with_junk = json.replace('}', r#","surprise":1}"#.to_string().as_str());
        assert!(serde_json::from_str::<WeightModel>(&with_junk).is_err());
    }

    #[test]
    fn unknown_formula_is_rejected() {
        let mut m = WeightModel::binary_half();
        m.exact_m = Some("no_such_formula".into());
        assert!(matches!(m.validate(), Err(Error::UnknownFormula(_))));
    }

    #[test]
    fn declared_lattice_is_cross_checked() {
        let m = WeightModel {
            variant: ModelVariant::Deterministic {
                weights: vec![0.5, 0.3],
            },
            lattice_span: 2.0,
            exact_m: None,
        };
        assert!(m.validate().is_err());

        let ok = WeightModel {
            variant: ModelVariant::Deterministic {
                weights: vec![0.5, 0.25, 2.0],
            },
            lattice_span: 2.0,
            exact_m: None,
        };
        ok.validate().unwrap();
    }

    #[test]
    fn continuous_law_cannot_declare_lattice() {
        let mut m = WeightModel::uniform_pair();
        m.lattice_span = 2.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn zeros_are_dropped_and_counted() {
        let m = WeightModel {
            variant: ModelVariant::Deterministic {
                weights: vec![0.5, 0.0, 0.5],
            },
            lattice_span: 1.0,
            exact_m: None,
        };
        m.validate().unwrap();
        let before = dropped_zero_count();
        let t = m.sample(&mut RngStream::new(1).rng()).unwrap();
        assert_eq!(t, vec![0.5, 0.5]);
        assert_eq!(dropped_zero_count() - before, 1);
        assert_eq!(m.mean_count(), 2.0);
    }

    #[test]
    fn mixture_sampling_hits_declared_frequencies() {
        let m = WeightModel::two_scale_mix();
        m.validate().unwrap();
        let stream = RngStream::new(42).named("mixture-freq");
        let mut long = 0u32;
        let n: u32 = 20_000;
        for i in 0..n {
            let t = m.sample(&mut stream.replication(u64::from(i)).rng()).unwrap();
            if t.len() == 2 {
                long += 1;
            }
        }
        let frac = f64::from(long) / f64::from(n);
        assert!((frac - 0.6).abs() < 0.02, "long-atom fraction {frac}");
    }

    #[test]
    fn substitution_powers_the_law() {
        let m = WeightModel::binary_half().alpha_substituted(2.0).unwrap();
        match &m.variant {
            ModelVariant::Deterministic { weights } => assert_eq!(weights, &vec![0.25, 0.25]),
            _ => panic!("variant changed"),
        }
        assert_eq!(m.lattice_span, 4.0);

        let u = WeightModel::uniform_pair().alpha_substituted(2.0).unwrap();
        let mut rng = RngStream::new(3).rng();
        let t = u.sample(&mut rng).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn realization_fixed_classification() {
        assert!(WeightModel::binary_half().is_realization_fixed());
        assert!(WeightModel::ternary_third().is_realization_fixed());
        assert!(!WeightModel::uniform_pair().is_realization_fixed());
        assert!(!WeightModel::two_scale_mix().is_realization_fixed());
        assert!(!WeightModel::poisson_uniform().is_realization_fixed());
    }

    proptest! {
        #[test]
        fn deterministic_models_sample_their_weights(
            ws in proptest::collection::vec(0.01f64..10.0, 1..6),
            seed in any::<u64>(),
        ) {
            let m = WeightModel {
                variant: ModelVariant::Deterministic { weights: ws.clone() },
                lattice_span: 1.0,
                exact_m: None,
            };
            m.validate().unwrap();
            let t = m.sample(&mut RngStream::new(seed).rng()).unwrap();
            prop_assert_eq!(t, ws);
        }
    }
}
