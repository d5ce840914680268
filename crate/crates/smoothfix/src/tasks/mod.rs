//! Experiment tasks behind a name-indexed registry of trait objects.
//!
//! Each task owns a strict parameter schema (unknown fields rejected,
//! defaults echoed back into the run metadata) and reports its findings
//! as assertion rows; the binary resolves a task by name, runs it inside
//! a worker pool, and turns the rows into files and an exit status.

mod check_model;
mod diagnose;
mod find_alpha;
mod sample_w;
mod simulate;
mod verify_fixed_point;
mod verify_identities;

use crate::model::WeightModel;
use crate::report::ReportRow;
use crate::rng::RngStream;
use crate::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

pub struct TaskContext<'a> {
    pub model: &'a WeightModel,
    pub params: &'a serde_json::Value,
    /// Seeded from the master seed and the task name; tasks derive
    /// sub-streams per purpose, never reuse this directly twice.
    pub stream: RngStream,
    pub out_dir: &'a Path,
    pub overwrite: bool,
}

#[derive(Debug, Default)]
pub struct TaskOutput {
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
    /// Parameters after defaulting, echoed into meta.json.
    pub resolved_params: serde_json::Value,
}

impl TaskOutput {
    fn with_params(resolved_params: serde_json::Value) -> Self {
        TaskOutput {
            resolved_params,
            ..TaskOutput::default()
        }
    }
}

pub trait Task: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: &TaskContext) -> Result<TaskOutput>;
}

/// Name-indexed task strategies; iteration order is alphabetical so help
/// text and error messages stay stable.
pub struct TaskRegistry {
    tasks: BTreeMap<&'static str, Box<dyn Task>>,
}

impl TaskRegistry {
    pub fn empty() -> Self {
        TaskRegistry {
            tasks: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(check_model::CheckModel));
        reg.register(Box::new(find_alpha::FindAlpha));
        reg.register(Box::new(simulate::Simulate));
        reg.register(Box::new(sample_w::SampleW));
        reg.register(Box::new(verify_fixed_point::VerifyFixedPoint));
        reg.register(Box::new(verify_identities::VerifyIdentities));
        reg.register(Box::new(recursion_test::RecursionTest));
        reg.register(Box::new(diagnose::Diagnostics));
        reg
    }

    /// Insert a task, replacing any existing one with the same name.
    pub fn register(&mut self, task: Box<dyn Task>) {
        self.tasks.insert(task.name(), task);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Task> {
        self.tasks.get(name).map(AsRef::as_ref)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.tasks.keys().copied().collect()
    }
}

/// Parse task parameters against a strict schema, treating an absent
/// params block as `{}`; returns the parsed value and its echo with all
/// defaults filled in.
fn parse_params<T>(raw: &serde_json::Value) -> Result<(T, serde_json::Value)>
where
    T: DeserializeOwned + Serialize,
{
    let effective = if raw.is_null() {
        serde_json::Value::Object(serde_json::Map::new())
    } else {
        raw.clone()
    };
    let parsed: T = serde_json::from_value(effective)
        .map_err(|e| Error::Config(format!("task parameters: {e}")))?;
    let echo = serde_json::to_value(&parsed)?;
    Ok((parsed, echo))
}

/// Assertion row for an estimate against a target: noisy estimates pass
/// on |z|, exact ones on a float tolerance.
fn target_row(
    name: impl Into<String>,
    estimate: &crate::numeric::Estimate,
    target: f64,
    z_limit: f64,
) -> ReportRow {
    let z = estimate.z(target);
    let pass = if estimate.stderr > 0.0 {
        z.abs() <= z_limit
    } else {
        (estimate.value - target).abs() <= 1e-12
    };
    ReportRow {
        name: name.into(),
        estimate: estimate.value,
        target,
        stderr: estimate.stderr,
        z,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_registry_has_the_documented_tasks() {
        let reg = TaskRegistry::builtin();
        assert_eq!(
            reg.names(),
            vec![
                "check-model",
                "diagnostics",
                "find-alpha",
                "recursion-test",
                "sample-w",
                "simulate",
                "verify-fixed-point",
                "verify-identities",
            ]
        );
        assert!(reg.get("find-alpha").is_some());
        assert!(reg.get("nonsense").is_none());
    }

    #[test]
    fn registration_replaces_by_name() {
        struct Probe;
        impl Task for Probe {
            fn name(&self) -> &'static str {
                "find-alpha"
            }
            fn run(&self, _ctx: &TaskContext) -> Result<TaskOutput> {
                Ok(TaskOutput::default())
            }
        }
        let mut reg = TaskRegistry::builtin();
        let before = reg.names().len();
        reg.register(Box::new(Probe));
        assert_eq!(reg.names().len(), before);
    }

    #[test]
    fn absent_params_mean_defaults_and_unknown_fields_refuse() {
        #[derive(Debug, serde::Serialize, serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        struct P {
            #[serde(default = "two")]
            budget: u64,
        }
        fn two() -> u64 {
            2
        }
        let (p, echo) = parse_params::<P>(&serde_json::Value::Null).unwrap();
        assert_eq!(p.budget, 2);
        assert_eq!(echo, serde_json::json!({"budget": 2}));
        let err = parse_params::<P>(&serde_json::json!({"bogus": 1})).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }
}
