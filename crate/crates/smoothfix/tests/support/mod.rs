pub mod oracle;

use smoothfix::martingale::{sample_limit_w, EmpiricalW};
use smoothfix::model::WeightModel;
use smoothfix::rng::RngStream;
use std::sync::{Mutex, MutexGuard, OnceLock, PoisonError};
use std::time::Instant;

/// Every model the suite exercises, with its characteristic exponent:
/// closed form where one exists, the frozen bisection value otherwise.
pub fn fleet() -> Vec<(&'static str, WeightModel, f64)> {
    vec![
        ("binary_half", WeightModel::binary_half(), 1.0),
        ("ternary_third", WeightModel::ternary_third(), 1.0),
        ("uniform_pair", WeightModel::uniform_pair(), 1.0),
        (
            "two_scale_mix",
            WeightModel::two_scale_mix(),
            oracle::ALPHA_TWO_SCALE,
        ),
    ]
}

pub fn stream(label: &str) -> RngStream {
    RngStream::new(271_828).named("acceptance").named(label)
}

/// One criterion at a time. The budgets below are wall-clock
/// measurements, so the checks must not share the machine.
pub fn exclusive() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(PoisonError::into_inner)
}

/// Depth-14 mixing samples for the uniform pair, built once per process.
/// Criteria that consume the cache as a prebuilt input call this before
/// starting their clock.
pub fn shared_w() -> &'static EmpiricalW {
    static W: OnceLock<EmpiricalW> = OnceLock::new();
    W.get_or_init(|| {
        sample_limit_w(
            &WeightModel::uniform_pair(),
            1.0,
            14,
            10_000,
            0.0,
            stream("shared-w"),
        )
        .expect("uniform pair samples cleanly at depth 14")
    })
}

/// A second cache from an unrelated seed, for the agreement check.
pub fn shared_w_alt() -> &'static EmpiricalW {
    static W: OnceLock<EmpiricalW> = OnceLock::new();
    W.get_or_init(|| {
        sample_limit_w(
            &WeightModel::uniform_pair(),
            1.0,
            14,
            10_000,
            0.0,
            stream("shared-w-alt"),
        )
        .expect("uniform pair samples cleanly at depth 14")
    })
}

/// Collects failures for one criterion, enforces its wall-clock budget,
/// and prints a single verdict line.
pub struct Criterion {
    name: &'static str,
    budget_secs: f64,
    started: Instant,
    failures: Vec<String>,
}

impl Criterion {
    pub fn start(name: &'static str, budget_secs: f64) -> Self {
        Criterion {
            name,
            budget_secs,
            started: Instant::now(),
            failures: Vec::new(),
        }
    }

    pub fn check(&mut self, ok: bool, detail: impl Into<String>) {
        if !ok {
            self.failures.push(detail.into());
        }
    }

    pub fn finish(mut self) {
        let elapsed = self.started.elapsed().as_secs_f64();
        if elapsed > self.budget_secs {
            self.failures.push(format!(
                "ran {elapsed:.1}s, over the {:.0}s budget",
                self.budget_secs
            ));
        }
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("acceptance [{}] {verdict} ({elapsed:.1}s)", self.name);
        assert!(
            self.failures.is_empty(),
            "{} failed:\n  {}",
            self.name,
            self.failures.join("\n  ")
        );
    }
}
