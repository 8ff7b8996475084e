//! Monte Carlo campaigns over trials and policies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::Policy;
use crate::error::Result;

use super::config::ExperimentConfig;
use super::jensen::JensenCheck;
use super::rng::Streams;
use super::trial::{SlotRecord, TrialRunner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub policy: Policy,
    pub error: String,
}

/// Per-policy averages over every recorded slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAggregate {
    pub policy: Policy,
    pub slots: usize,
    pub mean_value_v: f64,
    /// Over feasible slots only; `None` when no slot was feasible.
    pub mean_relay_power: Option<f64>,
    pub feasibility_rate: f64,
    pub mean_best_e: f64,
    /// Mean `best_E` per slot index, slot 1 first.
    pub slot_mean_best_e: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Sorted by trial, then policy (in config order), then slot.
    pub records: Vec<SlotRecord>,
    pub failures: Vec<TrialFailure>,
    pub aggregates: Vec<PolicyAggregate>,
}

impl ExperimentResult {
    pub fn jensen_checks(&self) -> impl Iterator<Item = (Policy, &JensenCheck)> {
        self.records
            .iter()
            .filter_map(|r| r.jensen.as_ref().map(|j| (r.policy, j)))
    }

    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every `(trial, policy)` pair, in parallel. Output does not depend on
/// scheduling: each pair draws from its own keyed streams and results are
/// collected in job order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let streams = Streams::new(config.master_seed);
    let jobs: Vec<(usize, Policy)> = (0..config.trials)
        .flat_map(|t| config.policies.iter().map(move |p| (t, *p)))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(trial, policy)| TrialRunner::new(config, streams.clone(), trial, policy).run())
        .collect();

    let mut records = Vec::with_capacity(jobs.len() * config.geometry.num_slots);
    let mut failures = Vec::new();
    for (&(trial, policy), (recs, err)) in jobs.iter().zip(outcomes) {
        records.extend(recs);
        if let Some(e) = err {
            failures.push(TrialFailure {
                trial,
                policy,
                error: e.to_string(),
            });
        }
    }
    let aggregates = aggregate(&records, &config.policies);
    Ok(ExperimentResult {
        records,
        failures,
        aggregates,
    })
}

fn policy_rank(policies: &[Policy], p: Policy) -> usize {
    policies.iter().position(|q| *q == p).unwrap_or(usize::MAX)
}

/// Per-policy aggregates. Records are put in canonical order first, so the
/// result does not depend on the order they are given in.
pub fn aggregate(records: &[SlotRecord], policies: &[Policy]) -> Vec<PolicyAggregate> {
    let mut sorted: Vec<&SlotRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (policy_rank(policies, r.policy), r.trial, r.slot));
    policies
        .iter()
        .map(|&policy| {
            let recs: Vec<&SlotRecord> = sorted.iter().copied().filter(|r| r.policy == policy).collect();
            let n = recs.len() as f64;
            let mean = |f: &dyn Fn(&SlotRecord) -> f64| recs.iter().map(|r| f(r)).sum::<f64>() / n;
            let feasible: Vec<&&SlotRecord> = recs.iter().filter(|r| r.feasible).collect();
            let max_slot = recs.iter().map(|r| r.slot).max().unwrap_or(0);
            let slot_mean_best_e = (1..=max_slot)
                .map(|s| {
                    let v: Vec<f64> = recs.iter().filter(|r| r.slot == s).map(|r| r.best_e).collect();
                    v.iter().sum::<f64>() / v.len() as f64
                })
                .collect();
            PolicyAggregate {
                policy,
                slots: recs.len(),
                mean_value_v: mean(&|r| r.value_v),
                mean_relay_power: (!feasible.is_empty()).then(|| {
                    feasible.iter().map(|r| r.relay_power).sum::<f64>() / feasible.len() as f64
                }),
                feasibility_rate: feasible.len() as f64 / n,
                mean_best_e: mean(&|r| r.best_e),
                slot_mean_best_e,
            }
        })
        .collect()
}
