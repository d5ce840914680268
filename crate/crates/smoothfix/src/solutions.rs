//! The solution family f(t) = E exp(-W h(t) t^alpha), its evaluation on
//! grids, the Monte Carlo smoothing map, fixed-point residuals, and the
//! sample-level sum/min recursions.
//!
//! h ranges over multiplicatively periodic profiles with h(t) t^alpha
//! non-decreasing; W is either an exact atom (deterministic models) or an
//! empirical sample of the additive-martingale limit. Everything evaluates
//! by plain sample averages so variances stay reportable.

use crate::cache;
use crate::martingale::EmpiricalW;
use crate::model::WeightModel;
use crate::numeric::{Estimate, RunningStat};
use crate::rng::RngStream;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Multiplicatively periodic profile h with h(t) t^alpha non-decreasing.
///
/// The lattice variant stores log-values on a log-uniform grid over one
/// period [1, span) and interpolates geometrically, so periodicity is
/// structural: only the fractional part of log_span(t) enters evaluation.
#[derive(Clone, Debug)]
pub enum PeriodicH {
    Constant(f64),
    Lattice { span: f64, log_values: Vec<f64> },
}

impl PeriodicH {
    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidScale(format!(
                "constant profile must be positive and finite, got {c}"
            )));
        }
        Ok(PeriodicH::Constant(c))
    }

    /// Build a lattice profile from `values` on the grid span^(k/K),
    /// k = 0..K, and certify that h(t) t^alpha is non-decreasing.
    ///
    /// The interpolant is piecewise log-linear in log t, so checking
    /// adjacent points of a 16x refined grid (which contains every knot)
    /// certifies monotonicity of the whole function; the period endpoint
    /// wraps to h(1).
    pub fn lattice(span: f64, values: &[f64], alpha: f64) -> Result<Self> {
        if !(span.is_finite() && span > 1.0) {
            return Err(Error::InvalidScale(format!(
                "lattice span must exceed 1, got {span}"
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidScale(
                "lattice profile needs at least one value".into(),
            ));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Contract(format!("alpha must be positive, got {alpha}")));
        }
        for &v in values {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScale(format!(
                    "lattice profile values must be positive and finite, got {v}"
                )));
            }
        }
        let h = PeriodicH::Lattice {
            span,
            log_values: values.iter().map(|v| v.ln()).collect(),
        };
        let fine = 16 * values.len();
        let mut prev = f64::NEG_INFINITY;
        for j in 0..=fine {
            let u = span.powf(j as f64 / fine as f64);
            let g = h.eval(u).ln() + alpha * u.ln();
            if g < prev - 1e-12 {
                return Err(Error::InvalidScale(format!(
                    "h(t) t^alpha decreases near t = {u}"
                )));
            }
            prev = g;
        }
        Ok(h)
    }

    /// Evaluate at t > 0.
    pub fn eval(&self, t: f64) -> f64 {
        assert!(t.is_finite() && t > 0.0, "profile evaluated off (0, inf): {t}");
        match self {
            PeriodicH::Constant(c) => *c,
            PeriodicH::Lattice { span, log_values } => {
                let k = log_values.len();
                let x = t.ln() / span.ln();
                let frac = x - x.floor();
                let pos = frac * k as f64;
                let i = (pos as usize).min(k - 1);
                let w = pos - i as f64;
                let a = log_values[i];
                let b = log_values[(i + 1) % k];
                (a + w * (b - a)).exp()
            }
        }
    }

    /// The profile multiplied by c > 0; slopes are unchanged, so the
    /// monotonicity certificate carries over.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidScale(format!(
                "scale factor must be positive and finite, got {c}"
            )));
        }
        Ok(match self {
            PeriodicH::Constant(v) => PeriodicH::Constant(v * c),
            PeriodicH::Lattice { span, log_values } => PeriodicH::Lattice {
                span: *span,
                log_values: log_values.iter().map(|v| v + c.ln()).collect(),
            },
        })
    }

    pub fn span(&self) -> Option<f64> {
        match self {
            PeriodicH::Constant(_) => None,
            PeriodicH::Lattice { span, .. } => Some(*span),
        }
    }

    /// Per-knot flags marking segments where log(h(t) t^alpha) is flat,
    /// i.e. where the scale function is not strictly increasing.
    fn flat_segments(&self, alpha: f64) -> Option<Vec<bool>> {
        match self {
            PeriodicH::Constant(_) => None,
            PeriodicH::Lattice { span, log_values } => {
                let k = log_values.len();
                let step = alpha * span.ln() / k as f64;
                let mut flags = Vec::with_capacity(k);
                for i in 0..k {
                    let a = log_values[i] + step * i as f64;
                    let b = if i + 1 == k {
                        log_values[0] + step * k as f64
                    } else {
                        log_values[i + 1] + step * (i + 1) as f64
                    };
                    flags.push((b - a).abs() <= 1e-12 * a.abs().max(1.0));
                }
                Some(flags)
            }
        }
    }
}

/// The mixing distribution of the family: an exact atom or an empirical
/// sample of the martingale limit.
#[derive(Clone, Debug)]
pub enum MixingLaw {
    Atom(f64),
    Empirical(Arc<EmpiricalW>),
}

impl MixingLaw {
    pub fn atom(c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Contract(format!(
                "mixing atom must be finite and nonnegative, got {c}"
            )));
        }
        Ok(MixingLaw::Atom(c))
    }

    pub fn from_samples(w: EmpiricalW) -> Result<Self> {
        if w.samples.is_empty() {
            return Err(Error::EmptySamples("mixing distribution".into()));
        }
        Ok(MixingLaw::Empirical(Arc::new(w)))
    }

    pub fn len(&self) -> usize {
        match self {
            MixingLaw::Atom(_) => 1,
            MixingLaw::Empirical(w) => w.samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mean(&self) -> f64 {
        match self {
            MixingLaw::Atom(c) => *c,
            MixingLaw::Empirical(w) => w.mean(),
        }
    }

    /// E exp(-W g) by sample average; exact for atoms.
    pub fn mean_exp_neg(&self, g: f64) -> Estimate {
        match self {
            MixingLaw::Atom(c) => Estimate::exact((-c * g).exp()),
            MixingLaw::Empirical(w) => {
                let mut stat = RunningStat::default();
                for &s in &w.samples {
                    stat.push((-s * g).exp());
                }
                stat.estimate()
            }
        }
    }

    /// One draw: the atom itself, or a uniformly chosen sample.
    pub fn draw(&self, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
        match self {
            MixingLaw::Atom(c) => *c,
            MixingLaw::Empirical(w) => w.samples[rng.random_range(0..w.samples.len())],
        }
    }

    /// The law of c*W, as an atom or as rescaled samples.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidScale(format!(
                "scale factor must be positive and finite, got {c}"
            )));
        }
        Ok(match self {
            MixingLaw::Atom(v) => MixingLaw::Atom(v * c),
            MixingLaw::Empirical(w) => {
                let mut scaled = (**w).clone();
                for s in &mut scaled.samples {
                    *s *= c;
                }
                MixingLaw::Empirical(Arc::new(scaled))
            }
        })
    }
}

/// A member of the solution family: f(t) = E exp(-W h(t) t^alpha).
#[derive(Clone, Debug)]
pub struct SolutionSpec {
    pub alpha: f64,
    pub h: PeriodicH,
    pub w: MixingLaw,
}

impl SolutionSpec {
    pub fn new(alpha: f64, h: PeriodicH, w: MixingLaw) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Contract(format!("alpha must be positive, got {alpha}")));
        }
        Ok(SolutionSpec { alpha, h, w })
    }

    /// The scale function G(t) = h(t) t^alpha, t > 0.
    pub fn scale_arg(&self, t: f64) -> f64 {
        self.h.eval(t) * t.powf(self.alpha)
    }

    pub fn eval_f(&self, t: f64) -> Result<f64> {
        Ok(self.eval_with_stderr(t)?.value)
    }

    pub fn eval_with_stderr(&self, t: f64) -> Result<Estimate> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Contract(format!(
                "f is evaluated on [0, inf), got {t}"
            )));
        }
        if self.w.is_empty() {
            return Err(Error::EmptySamples("mixing distribution".into()));
        }
        if t == 0.0 {
            return Ok(Estimate::exact(1.0));
        }
        Ok(self.w.mean_exp_neg(self.scale_arg(t)))
    }

    /// Evaluate on a grid, carrying per-point mixing-sample stderr.
    pub fn on_grid(&self, tgrid: &[f64]) -> Result<GridFunction> {
        let mut values = Vec::with_capacity(tgrid.len());
        let mut stderrs = Vec::with_capacity(tgrid.len());
        for &t in tgrid {
            let e = self.eval_with_stderr(t)?;
            values.push(e.value);
            stderrs.push(e.stderr);
        }
        GridFunction::new(self.alpha, tgrid.to_vec(), values, stderrs)
    }
}

/// A function known on a log-spaced grid with per-point stderr.
///
/// Below the grid it extends by the Weibull head exp(-tail_coef t^alpha)
/// fitted on the smallest grid points; above it freezes at the last value;
/// in between it interpolates -log f linearly in log t.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub alpha: f64,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub tail_coef: f64,
}

impl GridFunction {
    pub fn new(alpha: f64, ts: Vec<f64>, values: Vec<f64>, stderrs: Vec<f64>) -> Result<Self> {
        if ts.is_empty() || ts.len() != values.len() || ts.len() != stderrs.len() {
            return Err(Error::Contract(
                "grid, values, and stderrs must be non-empty and equal length".into(),
            ));
        }
        if !ts.windows(2).all(|p| p[0] < p[1]) || !ts.iter().all(|&t| t.is_finite() && t > 0.0) {
            return Err(Error::Contract(
                "grid must be strictly increasing and positive".into(),
            ));
        }
        let mut clamped = values;
        for v in &mut clamped {
            if !(*v >= -1e-12 && *v <= 1.0 + 1e-12) {
                return Err(Error::Contract(format!(
                    "grid values must lie in [0, 1], got {v}"
                )));
            }
            *v = v.clamp(0.0, 1.0);
        }
        if stderrs.iter().any(|&s| !(s.is_finite() && s >= 0.0)) {
            return Err(Error::Contract("stderrs must be nonnegative".into()));
        }
        // Head coefficient: least squares of -log f against t^alpha through
        // the origin on the smallest points; zero values cannot be fitted.
        let k = ts.len().min(3);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..k {
            if clamped[i] > 0.0 {
                let x = ts[i].powf(alpha);
                num += -clamped[i].ln() * x;
                den += x * x;
            }
        }
        let tail_coef = if den > 0.0 { num / den } else { f64::INFINITY };
        Ok(GridFunction {
            alpha,
            ts,
            values: clamped,
            stderrs,
            tail_coef,
        })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Contract(format!(
                "grid function evaluated off [0, inf): {t}"
            )));
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        let first = self.ts[0];
        let last = *self.ts.last().expect("grid non-empty");
        if t < first {
            return Ok((-self.tail_coef * t.powf(self.alpha)).exp());
        }
        if t >= last {
            return Ok(*self.values.last().expect("grid non-empty"));
        }
        let j = self.ts.partition_point(|&x| x <= t);
        let (i0, i1) = (j - 1, j);
        if t == self.ts[i0] {
            return Ok(self.values[i0]);
        }
        let x = (t.ln() - self.ts[i0].ln()) / (self.ts[i1].ln() - self.ts[i0].ln());
        let (a, b) = (self.values[i0], self.values[i1]);
        if a == 0.0 || b == 0.0 {
            // -log f is infinite at one end; any interior point collapses.
            return Ok(if x >= 1.0 { b } else if x <= 0.0 { a } else { 0.0 });
        }
        Ok((-((1.0 - x) * -a.ln() + x * -b.ln())).exp())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut s = String::from("t,f,stderr\n");
        for i in 0..self.ts.len() {
            let _ = writeln!(s, "{},{},{}", self.ts[i], self.values[i], self.stderrs[i]);
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

fn checked_value(raw: f64, t: f64) -> Result<f64> {
    if !(-1.0e-12..=1.0 + 1.0e-12).contains(&raw) {
        return Err(Error::Contract(format!(
            "evaluator returned {raw} at t = {t}, outside [0, 1]"
        )));
    }
    Ok(raw.clamp(0.0, 1.0))
}

/// One application of the smoothing map: for each grid t, the Monte Carlo
/// mean over weight draws T of prod_i f(t T_i).
///
/// Each replication draws one T and reuses it across the whole grid, so
/// grid points share randomness (correlated errors, unbiased per point).
pub fn smoothing_map<F>(
    f: &F,
    model: &WeightModel,
    alpha: f64,
    tgrid: &[f64],
    reps: u64,
    stream: RngStream,
) -> Result<GridFunction>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if reps == 0 {
        return Err(Error::Contract("smoothing map needs at least one draw".into()));
    }
    if tgrid.is_empty() {
        return Err(Error::Contract("smoothing map needs a non-empty grid".into()));
    }
    model.validate()?;
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream.replication(rep).rng();
            let t_seq = model.sample(&mut rng)?;
            let mut row = Vec::with_capacity(tgrid.len());
            for &t in tgrid {
                let mut prod = 1.0;
                for &w in &t_seq {
                    prod *= checked_value(f(t * w)?, t * w)?;
                }
                row.push(prod);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(tgrid.len());
    let mut stderrs = Vec::with_capacity(tgrid.len());
    for j in 0..tgrid.len() {
        let mut stat = RunningStat::default();
        for row in &rows {
            stat.push(row[j]);
        }
        let e = stat.estimate();
        values.push(e.value);
        stderrs.push(e.stderr);
    }
    GridFunction::new(alpha, tgrid.to_vec(), values, stderrs)
}

#[derive(Clone, Debug)]
pub struct ResidualPoint {
    pub t: f64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub z: f64,
}

#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub sup: f64,
    pub worst_z: f64,
    pub points: Vec<ResidualPoint>,
}

/// z-score that treats a pair of exact values as equal up to float noise
/// instead of reporting an infinite score.
fn residual_z(lhs: &Estimate, rhs: &Estimate) -> f64 {
    let se = (lhs.stderr * lhs.stderr + rhs.stderr * rhs.stderr).sqrt();
    let d = lhs.value - rhs.value;
    if se > 0.0 {
        d / se
    } else if d.abs() <= 1e-12 {
        0.0
    } else if d > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Fixed-point residual: compare f against its smoothing-map image on a
/// grid, reporting the sup gap and the worst noise-scaled score.
pub fn residual(
    sol: &SolutionSpec,
    model: &WeightModel,
    tgrid: &[f64],
    reps: u64,
    stream: RngStream,
) -> Result<ResidualReport> {
    let mapped = smoothing_map(
        &|t| sol.eval_f(t),
        model,
        sol.alpha,
        tgrid,
        reps,
        stream,
    )?;
    let mut points = Vec::with_capacity(tgrid.len());
    let mut sup = 0.0f64;
    let mut worst = 0.0f64;
    for (j, &t) in tgrid.iter().enumerate() {
        let lhs = sol.eval_with_stderr(t)?;
        let rhs = Estimate {
            value: mapped.values[j],
            stderr: mapped.stderrs[j],
            exact: mapped.stderrs[j] == 0.0,
        };
        let z = residual_z(&lhs, &rhs);
        sup = sup.max((lhs.value - rhs.value).abs());
        if z.abs() > worst {
            worst = z.abs();
        }
        points.push(ResidualPoint { t, lhs, rhs, z });
    }
    Ok(ResidualReport {
        sup,
        worst_z: worst,
        points,
    })
}

/// Samples of the min-type fixed point, with +inf entries where the
/// mixing draw vanished.
#[derive(Clone, Debug)]
pub struct MinSamples {
    pub values: Vec<f64>,
    /// Draws whose target fell on a flat stretch of h(t) t^alpha; the
    /// solver returned the leftmost solution there.
    pub flat_flagged: u64,
}

/// Invert G(t) = h(t) t^alpha at `target`, returning the leftmost t with
/// G(t) >= target. G is globally non-decreasing (certified at profile
/// construction) and scales exactly by span^alpha across periods.
fn invert_scale(h: &PeriodicH, alpha: f64, target: f64) -> f64 {
    match h {
        PeriodicH::Constant(c) => (target / c).powf(1.0 / alpha),
        PeriodicH::Lattice { span, log_values } => {
            let log_g = |t: f64| h.eval(t).ln() + alpha * t.ln();
            let lt = target.ln();
            // One period brackets the root after shifting by whole periods:
            // log G(span^k) = log h(1) + k alpha log span.
            let k = ((lt - log_values[0]) / (alpha * span.ln())).floor();
            let mut lo = span.powf(k - 1.0);
            let mut hi = span.powf(k + 2.0);
            for _ in 0..200 {
                if log_g(lo) <= lt {
                    break;
                }
                lo /= span;
            }
            for _ in 0..200 {
                if log_g(hi) >= lt {
                    break;
                }
                hi *= span;
            }
            let (mut llo, mut lhi) = (lo.ln(), hi.ln());
            for _ in 0..100 {
                let mid = 0.5 * (llo + lhi);
                if log_g(mid.exp()) >= lt {
                    lhi = mid;
                } else {
                    llo = mid;
                }
            }
            lhi.exp()
        }
    }
}

/// Which knot segment of the lattice profile contains t.
fn segment_index(span: f64, k: usize, t: f64) -> usize {
    let x = t.ln() / span.ln();
    let frac = x - x.floor();
    ((frac * k as f64) as usize).min(k - 1)
}

/// Draw `n` samples of X with survival function f: W from the mixing law,
/// E standard exponential, then X solves h(X) X^alpha = E / W (+inf when
/// W = 0).
pub fn sample_min_solution(sol: &SolutionSpec, n: u64, stream: RngStream) -> Result<MinSamples> {
    if n == 0 {
        return Err(Error::Contract("need at least one sample".into()));
    }
    if sol.w.is_empty() {
        return Err(Error::EmptySamples("mixing distribution".into()));
    }
    let flats = sol.h.flat_segments(sol.alpha);
    let drawn: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream.replication(rep).rng();
            let w = sol.w.draw(&mut rng);
            let e: f64 = rng.sample(Exp1);
            if w == 0.0 {
                return (f64::INFINITY, false);
            }
            let x = invert_scale(&sol.h, sol.alpha, e / w);
            let flagged = match (&flats, &sol.h) {
                (Some(mask), PeriodicH::Lattice { span, log_values }) => {
                    mask[segment_index(*span, log_values.len(), x)]
                }
                _ => false,
            };
            (x, flagged)
        })
        .collect();
    Ok(MinSamples {
        values: drawn.iter().map(|&(v, _)| v).collect(),
        flat_flagged: drawn.iter().filter(|&&(_, f)| f).count() as u64,
    })
}

/// One min-recursion step: each output draws T and |T| fresh inputs, and
/// returns min X_i / T_i (+inf over an empty T).
pub fn min_step(
    xs: &[f64],
    model: &WeightModel,
    n_out: u64,
    stream: RngStream,
) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySamples("recursion input".into()));
    }
    model.validate()?;
    (0..n_out)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream.replication(rep).rng();
            let t_seq = model.sample(&mut rng)?;
            let mut best = f64::INFINITY;
            for &t in &t_seq {
                let x = xs[rng.random_range(0..xs.len())];
                best = best.min(x / t);
            }
            Ok(best)
        })
        .collect()
}

/// One sum-recursion step: each output draws T and |T| fresh inputs, and
/// returns sum T_i X_i (0 over an empty T).
pub fn sum_step(
    xs: &[f64],
    model: &WeightModel,
    n_out: u64,
    stream: RngStream,
) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySamples("recursion input".into()));
    }
    model.validate()?;
    (0..n_out)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream.replication(rep).rng();
            let t_seq = model.sample(&mut rng)?;
            let mut acc = 0.0;
            for &t in &t_seq {
                acc += t * xs[rng.random_range(0..xs.len())];
            }
            Ok(acc)
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov statistic; +inf entries act as a shared
/// top atom, and tied values advance both sides together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySamples("KS input".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Contract("KS input contains NaN".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < n || j < m {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < n && xs[i] == v {
            i += 1;
        }
        while j < m && ys[j] == v {
            j += 1;
        }
        sup = sup.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    Ok(sup)
}

/// Asymptotic two-sided KS acceptance threshold at the given level.
pub fn ks_critical(level: f64, n: usize, m: usize) -> f64 {
    assert!(level > 0.0 && level < 1.0 && n > 0 && m > 0);
    ((2.0 / level).ln() / 2.0).sqrt() * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

/// Serializable description of a solution; the mixing law is an atom, a
/// reference to a stored sample cache, or instructions to sample afresh.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDoc {
    pub alpha: f64,
    pub h: HDoc,
    pub w: WDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HDoc {
    Constant { value: f64 },
    Lattice { span: f64, values: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WDoc {
    Atom {
        value: f64,
    },
    Cache {
        path: String,
        checksum: String,
    },
    Sample {
        depth: u32,
        reps: u64,
        #[serde(default)]
        prune_eps: f64,
    },
}

impl SolutionDoc {
    /// Materialize the solution: cached mixing laws are loaded and checked
    /// against the recorded checksum, sampling instructions are executed.
    pub fn resolve(
        &self,
        model: &WeightModel,
        base: &Path,
        stream: RngStream,
    ) -> Result<SolutionSpec> {
        let h = match &self.h {
            HDoc::Constant { value } => PeriodicH::constant(*value)?,
            HDoc::Lattice { span, values } => PeriodicH::lattice(*span, values, self.alpha)?,
        };
        let w = match &self.w {
            WDoc::Atom { value } => MixingLaw::atom(*value)?,
            WDoc::Cache { path, checksum } => {
                let full = if Path::new(path).is_absolute() {
                    Path::new(path).to_path_buf()
                } else {
                    base.join(path)
                };
                let recorded = cache::recorded_checksum(&full)?;
                if &recorded != checksum {
                    return Err(Error::Cache(format!(
                        "{} holds checksum {recorded}, document expects {checksum}",
                        full.display()
                    )));
                }
                MixingLaw::from_samples(cache::load_w(&full)?)?
            }
            WDoc::Sample {
                depth,
                reps,
                prune_eps,
            } => MixingLaw::from_samples(crate::martingale::sample_limit_w(
                model, self.alpha, *depth, *reps, *prune_eps, stream,
            )?)?,
        };
        SolutionSpec::new(self.alpha, h, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::log_grid;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn stream(label: &str) -> RngStream {
        RngStream::new(90210).named("solutions").named(label)
    }

    fn unit_solution(alpha: f64) -> SolutionSpec {
        SolutionSpec::new(
            alpha,
            PeriodicH::constant(1.0).unwrap(),
            MixingLaw::atom(1.0).unwrap(),
        )
        .unwrap()
    }

    fn wavy_ternary_h() -> PeriodicH {
        let span = 3.0f64;
        let k = 32;
        let values: Vec<f64> = (0..k)
            .map(|i| 1.0 + 0.1 * (2.0 * std::f64::consts::PI * i as f64 / k as f64).sin())
            .collect();
        PeriodicH::lattice(span, &values, 1.0).unwrap()
    }

    #[test]
    fn exponential_survival_comes_out_exactly() {
        let sol = unit_solution(1.0);
        assert_eq!(sol.eval_f(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            sol.eval_f(0.7).unwrap(),
            0.4965853037914095,
            epsilon = 1e-12
        );
        let grid = log_grid(1e-3, 20.0, 40);
        let mut prev = 1.0;
        for &t in &grid {
            let v = sol.eval_f(t).unwrap();
            assert!(v <= prev + 1e-15, "f must be non-increasing");
            prev = v;
        }
    }

    #[test]
    fn lattice_profile_is_periodic_and_hits_its_knots() {
        let h = wavy_ternary_h();
        for &t in &[0.07, 0.4, 1.0, 2.3, 5.0, 81.3] {
            assert_relative_eq!(h.eval(3.0 * t), h.eval(t), max_relative = 1e-9);
        }
        for i in 0..32 {
            let knot = 3.0f64.powf(i as f64 / 32.0);
            let want = 1.0 + 0.1 * (2.0 * std::f64::consts::PI * i as f64 / 32.0).sin();
            assert_relative_eq!(h.eval(knot), want, max_relative = 1e-9);
        }
    }

    #[test]
    fn decreasing_scale_function_is_rejected() {
        let err = PeriodicH::lattice(2.0, &[1.0, 0.4, 1.0, 1.0], 0.3).unwrap_err();
        assert!(matches!(err, Error::InvalidScale(_)), "{err}");
        // The same shape passes once alpha is large enough to dominate.
        assert!(PeriodicH::lattice(2.0, &[1.0, 0.4, 1.0, 1.0], 8.0).is_ok());
    }

    #[test]
    fn scaling_h_matches_scaling_w() {
        let w = crate::martingale::sample_limit_w(
            &WeightModel::uniform_pair(),
            1.0,
            8,
            256,
            0.0,
            stream("closure-w"),
        )
        .unwrap();
        for &c in &[0.5, 3.0] {
            let a = SolutionSpec::new(
                1.0,
                wavy_ternary_h().scaled(c).unwrap(),
                MixingLaw::from_samples(w.clone()).unwrap(),
            )
            .unwrap();
            let b = SolutionSpec::new(
                1.0,
                wavy_ternary_h(),
                MixingLaw::from_samples(w.clone()).unwrap().scaled(c).unwrap(),
            )
            .unwrap();
            for &t in &log_grid(1e-3, 10.0, 25) {
                assert_abs_diff_eq!(
                    a.eval_f(t).unwrap(),
                    b.eval_f(t).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn grid_function_extends_both_ways() {
        let grid = log_grid(0.1, 10.0, 20);
        let values: Vec<f64> = grid.iter().map(|&t| (-t).exp()).collect();
        let g = GridFunction::new(1.0, grid.clone(), values, vec![0.0; 20]).unwrap();
        assert_relative_eq!(g.tail_coef, 1.0, max_relative = 0.05);
        assert_eq!(g.eval(0.0).unwrap(), 1.0);
        assert_relative_eq!(g.eval(0.01).unwrap(), (-0.01f64).exp(), max_relative = 1e-3);
        assert_eq!(g.eval(50.0).unwrap(), *g.values.last().unwrap());
        // Interior error is second order in the log spacing (~0.24 here).
        assert_relative_eq!(g.eval(1.37).unwrap(), (-1.37f64).exp(), max_relative = 1e-2);
        assert_eq!(g.eval(grid[7]).unwrap(), g.values[7]);
    }

    #[test]
    fn smoothing_map_reproduces_a_closed_form_mean() {
        // E exp(-t(U1+U2)) = ((1 - e^-t)/t)^2 at t = 1.
        let f = |t: f64| Ok((-t).exp());
        let mapped = smoothing_map(
            &f,
            &WeightModel::uniform_pair(),
            1.0,
            &[1.0],
            4000,
            stream("map"),
        )
        .unwrap();
        let est = Estimate {
            value: mapped.values[0],
            stderr: mapped.stderrs[0],
            exact: false,
        };
        assert!(
            est.z(0.3995764008937280).abs() <= 4.0,
            "map estimate {est:?}"
        );
    }

    #[test]
    fn residual_vanishes_for_the_exponential_on_halving() {
        let sol = unit_solution(1.0);
        let report = residual(
            &sol,
            &WeightModel::binary_half(),
            &log_grid(1e-3, 10.0, 12),
            3,
            stream("residual-binary"),
        )
        .unwrap();
        assert!(report.sup <= 1e-12, "sup {}", report.sup);
        assert_eq!(report.worst_z, 0.0);
    }

    #[test]
    fn residual_stays_at_interpolation_level_for_lattice_profile() {
        let sol = SolutionSpec::new(1.0, wavy_ternary_h(), MixingLaw::atom(1.0).unwrap()).unwrap();
        let report = residual(
            &sol,
            &WeightModel::ternary_third(),
            &log_grid(1e-2, 5.0, 16),
            3,
            stream("residual-ternary"),
        )
        .unwrap();
        assert!(report.sup <= 1e-6, "sup {}", report.sup);
    }

    #[test]
    fn min_samples_are_exponential_for_the_unit_solution() {
        let out = sample_min_solution(&unit_solution(1.0), 20_000, stream("min-exp")).unwrap();
        assert_eq!(out.flat_flagged, 0);
        let mut stat = RunningStat::default();
        for &v in &out.values {
            stat.push(v);
        }
        assert!(stat.estimate().z(1.0).abs() <= 4.0, "{:?}", stat.estimate());
    }

    #[test]
    fn min_samples_follow_the_square_root_scale() {
        // alpha = 2: P(X > 1) = exp(-1).
        let out = sample_min_solution(&unit_solution(2.0), 20_000, stream("min-weibull")).unwrap();
        let p = out.values.iter().filter(|&&v| v > 1.0).count() as f64 / 20_000.0;
        let target = (-1.0f64).exp();
        let se = (target * (1.0 - target) / 20_000.0).sqrt();
        assert!((p - target).abs() <= 4.0 * se, "p = {p}");
    }

    #[test]
    fn vanished_mixing_draws_become_infinite() {
        let mut w = crate::martingale::sample_limit_w(
            &WeightModel::uniform_pair(),
            1.0,
            4,
            200,
            0.0,
            stream("zero-w"),
        )
        .unwrap();
        for s in w.samples.iter_mut().take(80) {
            *s = 0.0;
        }
        let sol = SolutionSpec::new(
            1.0,
            PeriodicH::constant(1.0).unwrap(),
            MixingLaw::from_samples(w).unwrap(),
        )
        .unwrap();
        let out = sample_min_solution(&sol, 4000, stream("inf-frac")).unwrap();
        let frac = out.values.iter().filter(|v| v.is_infinite()).count() as f64 / 4000.0;
        let se = (0.4 * 0.6 / 4000.0f64).sqrt();
        assert!((frac - 0.4).abs() <= 4.0 * se, "frac = {frac}");
    }

    #[test]
    fn lattice_inversion_agrees_with_the_scale_function() {
        let h = wavy_ternary_h();
        for &target in &[1e-6, 0.03, 1.0, 7.3, 4.2e5] {
            let x = invert_scale(&h, 0.9, target);
            let back = h.eval(x) * x.powf(0.9);
            assert_relative_eq!(back, target, max_relative = 1e-9);
        }
    }

    #[test]
    fn min_step_keeps_the_halving_fixed_point() {
        let before = sample_min_solution(&unit_solution(1.0), 10_000, stream("ks-before"))
            .unwrap()
            .values;
        let after = min_step(
            &before,
            &WeightModel::binary_half(),
            10_000,
            stream("ks-after"),
        )
        .unwrap();
        let stat = ks_two_sample(&before, &after).unwrap();
        let crit = ks_critical(0.001, before.len(), after.len());
        assert!(stat <= crit, "KS {stat} vs {crit}");
    }

    #[test]
    fn sum_step_is_exact_on_the_unit_atom() {
        let xs = vec![1.0; 64];
        let out = sum_step(
            &xs,
            &WeightModel::binary_half().alpha_substituted(1.0).unwrap(),
            64,
            stream("sum-unit"),
        )
        .unwrap();
        for v in out {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
        let zeros = vec![0.0; 8];
        let out = sum_step(
            &zeros,
            &WeightModel::uniform_pair(),
            32,
            stream("sum-zero"),
        )
        .unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn infinite_inputs_stay_infinite_through_min_step() {
        let xs = vec![f64::INFINITY; 16];
        let out = min_step(&xs, &WeightModel::uniform_pair(), 32, stream("min-inf")).unwrap();
        assert!(out.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn ks_statistic_edge_cases() {
        let a = vec![0.3, 1.0, 2.5];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0], &[1.0]).unwrap(), 1.0);
        let with_inf_a = vec![1.0, f64::INFINITY, f64::INFINITY];
        let with_inf_b = vec![1.0, 2.0, f64::INFINITY];
        let stat = ks_two_sample(&with_inf_a, &with_inf_b).unwrap();
        assert_abs_diff_eq!(stat, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn independent_exponential_samples_pass_ks() {
        let a = sample_min_solution(&unit_solution(1.0), 4000, stream("ks-a"))
            .unwrap()
            .values;
        let b = sample_min_solution(&unit_solution(1.0), 4000, stream("ks-b"))
            .unwrap()
            .values;
        let stat = ks_two_sample(&a, &b).unwrap();
        assert!(stat <= ks_critical(0.001, 4000, 4000), "KS {stat}");
    }

    #[test]
    fn documents_resolve_through_atoms_caches_and_sampling() {
        let dir = tempfile::tempdir().unwrap();
        let model = WeightModel::uniform_pair();
        let w = crate::martingale::sample_limit_w(&model, 1.0, 6, 128, 0.0, stream("doc-w"))
            .unwrap();
        let path = cache::store_w(dir.path(), &w, false).unwrap();
        let checksum = cache::recorded_checksum(&path).unwrap();
        let doc: SolutionDoc = serde_json::from_value(serde_json::json!({
            "alpha": 1.0,
            "h": {"type": "constant", "value": 1.0},
            "w": {"type": "cache",
                  "path": path.file_name().unwrap().to_str().unwrap(),
                  "checksum": checksum},
        }))
        .unwrap();
        let sol = doc.resolve(&model, dir.path(), stream("doc")).unwrap();
        assert_eq!(sol.w.len(), 128);

        let bad = SolutionDoc {
            w: WDoc::Cache {
                path: path.file_name().unwrap().to_str().unwrap().into(),
                checksum: "0000000000000000".into(),
            },
            ..doc.clone()
        };
        let err = bad.resolve(&model, dir.path(), stream("doc")).unwrap_err();
        assert!(matches!(err, Error::Cache(_)), "{err}");

        let sampled = SolutionDoc {
            w: WDoc::Sample {
                depth: 5,
                reps: 64,
                prune_eps: 0.0,
            },
            ..doc
        };
        let sol = sampled.resolve(&model, dir.path(), stream("doc")).unwrap();
        assert_eq!(sol.w.len(), 64);
    }
}
