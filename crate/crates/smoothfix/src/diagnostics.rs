//! Finite-sample probes of the asymptotic statements: regular variation
//! of 1 - f near zero, the slowly varying D curve, overshoot ratios on
//! first-exit lines, and the line-statistic approximation of the
//! martingale limit.
//!
//! Limits are not testable; each probe turns one into a trend or a value
//! at an extreme grid point with a pre-budgeted tolerance. All probes are
//! read-only consumers of evaluators and fronts.

use crate::model::WeightModel;
use crate::numeric::{Estimate, RunningStat};
use crate::rng::RngStream;
use crate::solutions::{PeriodicH, SolutionSpec};
use crate::tree::{first_exit_front, generation_front, Caps, Front, FrontKind, Prune};
use crate::{Error, Result};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Threshold below which 1 - f(t) is noise and a ratio point is dropped.
const DEPLETION_FLOOR: f64 = 1e-15;

/// Tolerance for membership of log-scale quantities in the lattice.
const LATTICE_LOG_TOL: f64 = 1e-9;

/// Ratios (1 - f(ut)) / (1 - f(t)) against the reference u^alpha.
#[derive(Clone, Debug)]
pub struct RatioCurve {
    pub u: f64,
    pub target: f64,
    pub ts: Vec<f64>,
    /// One entry per grid point; None where the denominator was depleted.
    pub ratios: Vec<Option<f64>>,
    pub dropped: usize,
}

impl RatioCurve {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut s = String::from("t,value,target,stderr\n");
        for (t, r) in self.ts.iter().zip(&self.ratios) {
            if let Some(r) = r {
                let _ = writeln!(s, "{t},{r},{},0", self.target);
            }
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

fn check_lattice_discipline(u: f64, tgrid: &[f64], span: f64) -> Result<()> {
    let x = u.ln() / span.ln();
    if (x - x.round()).abs() > LATTICE_LOG_TOL {
        return Err(Error::Contract(format!(
            "u = {u} is not an integer power of the lattice span {span}"
        )));
    }
    let residue = |t: f64| {
        let x = t.ln() / span.ln();
        x - x.floor()
    };
    let first = residue(tgrid[0]);
    for &t in &tgrid[1..] {
        let r = residue(t);
        let d = (r - first).abs();
        if d.min(1.0 - d) > LATTICE_LOG_TOL {
            return Err(Error::Contract(format!(
                "grid point {t} leaves the residue class of {} (span {span})",
                tgrid[0]
            )));
        }
    }
    Ok(())
}

/// The ratio curve of 1 - f under scaling by u, with its u^alpha target.
///
/// For a model on a lattice of span r, u must be an integer power of r
/// and the grid must stay in one residue class t_0 r^Z; the scaling law
/// only holds along such classes there.
pub fn regvar_curve<F>(
    f: &F,
    alpha: f64,
    u: f64,
    tgrid: &[f64],
    lattice_span: Option<f64>,
) -> Result<RatioCurve>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::Contract(format!("scale u must be positive, got {u}")));
    }
    if tgrid.is_empty() || !tgrid.iter().all(|&t| t.is_finite() && t > 0.0) {
        return Err(Error::Contract("need a positive, non-empty t grid".into()));
    }
    if let Some(span) = lattice_span {
        if span > 1.0 {
            check_lattice_discipline(u, tgrid, span)?;
        }
    }
    let mut ratios = Vec::with_capacity(tgrid.len());
    let mut dropped = 0usize;
    for &t in tgrid {
        let denom = 1.0 - f(t)?;
        if denom < DEPLETION_FLOOR {
            ratios.push(None);
            dropped += 1;
            continue;
        }
        ratios.push(Some((1.0 - f(u * t)?) / denom));
    }
    Ok(RatioCurve {
        u,
        target: u.powf(alpha),
        ts: tgrid.to_vec(),
        ratios,
        dropped,
    })
}

/// The curve D(t) = (1 - f(t)) / t^alpha with a slow-variation score.
///
/// When a lattice profile is supplied the stored values are D/h, which is
/// the object that varies slowly without any residue-class restriction.
#[derive(Clone, Debug)]
pub struct DAlphaCurve {
    pub alpha: f64,
    pub ts: Vec<f64>,
    pub values: Vec<Option<f64>>,
    /// max over u in {1/2, 2} of |D(u t_min)/D(t_min) - 1|.
    pub score: f64,
    pub dropped: usize,
}

impl DAlphaCurve {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let reference = self.values.iter().flatten().next().copied().unwrap_or(f64::NAN);
        let mut s = String::from("t,value,target,stderr\n");
        for (t, v) in self.ts.iter().zip(&self.values) {
            if let Some(v) = v {
                let _ = writeln!(s, "{t},{v},{reference},0");
            }
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

pub fn d_alpha_curve<F>(
    f: &F,
    alpha: f64,
    tgrid: &[f64],
    h: Option<&PeriodicH>,
) -> Result<DAlphaCurve>
where
    F: Fn(f64) -> Result<f64>,
{
    if tgrid.is_empty() || !tgrid.iter().all(|&t| t.is_finite() && t > 0.0) {
        return Err(Error::Contract("need a positive, non-empty t grid".into()));
    }
    let d_of = |t: f64| -> Result<Option<f64>> {
        let depleted = 1.0 - f(t)?;
        if depleted < DEPLETION_FLOOR {
            return Ok(None);
        }
        let mut d = depleted / t.powf(alpha);
        if let Some(profile) = h {
            d /= profile.eval(t);
        }
        Ok(Some(d))
    };
    let mut values = Vec::with_capacity(tgrid.len());
    let mut dropped = 0usize;
    for &t in tgrid {
        let v = d_of(t)?;
        if v.is_none() {
            dropped += 1;
        }
        values.push(v);
    }
    let t_min = tgrid[0];
    let mut score = 0.0f64;
    match d_of(t_min)? {
        None => score = f64::INFINITY,
        Some(base) => {
            for &u in &[0.5, 2.0] {
                match d_of(u * t_min)? {
                    None => score = f64::INFINITY,
                    Some(d) => score = score.max((d / base - 1.0).abs()),
                }
            }
        }
    }
    Ok(DAlphaCurve {
        alpha,
        ts: tgrid.to_vec(),
        values,
        score,
        dropped,
    })
}

/// Overshoot ratio over a first-exit front at level t:
/// sum e^{-beta (S - t)} 1{S - t > c}  /  sum e^{-alpha (S - t)}.
pub fn nerman_ratio(front: &Front, alpha: f64, beta: f64, c: f64) -> Result<f64> {
    let t = match front.kind {
        FrontKind::FirstExit(t) => t,
        _ => {
            return Err(Error::Contract(
                "overshoot ratios are defined on first-exit fronts".into(),
            ))
        }
    };
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::Contract(format!(
            "overshoot exponent must be nonnegative, got {beta}"
        )));
    }
    if front.nodes.is_empty() {
        return Err(Error::EmptySamples("first-exit front".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for v in &front.nodes {
        let over = v.position - t;
        if over > c {
            num += (-beta * over).exp();
        }
        den += (-alpha * over).exp();
    }
    Ok(num / den)
}

/// One grid point of the line-statistic trace.
#[derive(Clone, Debug)]
pub struct TracePoint {
    pub t: f64,
    /// Mean of e^{alpha t} (1 - f(e^{-t})) * (front alpha-mass at level t).
    pub statistic: Estimate,
    /// Deep fixed-generation mass on the same trees.
    pub proxy: Estimate,
    /// statistic - proxy, paired per replication.
    pub gap: Estimate,
    pub capped_reps: u64,
}

pub fn write_trace_csv(points: &[TracePoint], path: &std::path::Path) -> Result<()> {
    let mut s = String::from("t,value,target,stderr\n");
    for p in points {
        let _ = writeln!(s, "{},{},0,{}", p.t, p.gap.value, p.gap.stderr);
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Compare the exit-line statistic e^{alpha t}(1 - f(e^{-t})) W_(line t)
/// against a deep-generation estimate of the same limit on the same tree.
///
/// The solution must have a constant profile and its mixing mean sets the
/// small-argument slope; built from the model's own martingale samples
/// (mean 1) the statistic and the proxy share the limit, and their gap
/// must shrink along an increasing t list.
pub fn appr_w_trace(
    model: &WeightModel,
    sol: &SolutionSpec,
    tlist: &[f64],
    proxy_depth: u32,
    reps: u64,
    caps: Caps,
    stream: RngStream,
) -> Result<Vec<TracePoint>> {
    if !matches!(sol.h, PeriodicH::Constant(_)) {
        return Err(Error::Contract(
            "the line statistic needs a constant profile".into(),
        ));
    }
    if tlist.is_empty() || !tlist.windows(2).all(|p| p[0] < p[1]) || tlist[0] < 0.0 {
        return Err(Error::Contract(
            "need a strictly increasing, nonnegative t list".into(),
        ));
    }
    if reps == 0 {
        return Err(Error::Contract("need at least one replication".into()));
    }
    let alpha = sol.alpha;
    let prefactors: Vec<f64> = tlist
        .iter()
        .map(|&t| Ok((alpha * t).exp() * (1.0 - sol.eval_f((-t).exp())?)))
        .collect::<Result<_>>()?;
    let prune = Prune::none(alpha);
    // Rows: per replication, the proxy then one statistic per t, all grown
    // from the same root stream so they describe the same tree.
    let rows: Vec<(f64, Vec<f64>, bool)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let root = stream.replication(rep);
            let deep = generation_front(model, proxy_depth, root, prune, caps)?;
            let proxy = deep.alpha_mass(alpha);
            let mut stats = Vec::with_capacity(tlist.len());
            let mut capped = false;
            for (j, &t) in tlist.iter().enumerate() {
                let front = first_exit_front(model, t, root, prune, caps)?;
                capped = capped || front.capped;
                stats.push(prefactors[j] * front.alpha_mass(alpha));
            }
            Ok((proxy, stats, capped))
        })
        .collect::<Result<_>>()?;
    let capped_reps = rows.iter().filter(|r| r.2).count() as u64;
    let mut out = Vec::with_capacity(tlist.len());
    for (j, &t) in tlist.iter().enumerate() {
        let mut stat = RunningStat::default();
        let mut proxy = RunningStat::default();
        let mut gap = RunningStat::default();
        for (p, stats, _) in &rows {
            stat.push(stats[j]);
            proxy.push(*p);
            gap.push(stats[j] - p);
        }
        out.push(TracePoint {
            t,
            statistic: stat.estimate(),
            proxy: proxy.estimate(),
            gap: gap.estimate(),
            capped_reps,
        });
    }
    Ok(out)
}
