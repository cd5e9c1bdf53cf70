use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cv::{kfold_cv, CvResult};
use super::report::EvalReport;
use super::trainers::Trainer;
use crate::dataio::DenseDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Default algorithm labels, in the role order [`build_assignment_plan`] expects.
pub const DEFAULT_ALGORITHMS: [&str; 5] = ["LR", "RF", "MLP", "XGB", "SVM"];

/// Folds used inside each plan instance.
pub const PLAN_FOLDS: usize = 5;

/// Algorithm pairs per instance, as indices into the role order
/// (logistic, random forest, MLP, boosted trees, SVM).
const PAIRS: [(usize, usize); 5] = [(0, 1), (2, 0), (3, 2), (4, 3), (4, 1)];
const INSTANCE_IDS: [&str; 5] = ["A", "B", "C", "D", "E"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanInstance {
    pub id: String,
    pub algorithms: (String, String),
    pub partition: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentPlan {
    pub instances: Vec<PlanInstance>,
}

/// Five evaluation instances A..E, each pairing two algorithms on one
/// partition: A (LR, RF), B (MLP, LR), C (XGB, MLP), D (SVM, XGB), E (SVM, RF).
///
/// `algorithms` are caller labels in the role order of [`DEFAULT_ALGORITHMS`];
/// instance `i` uses `partitions[i]`.
pub fn build_assignment_plan(algorithms: &[&str], partitions: &[usize]) -> Result<AssignmentPlan> {
    if algorithms.len() != 5 || partitions.len() != 5 {
        return Err(Error::config(format!(
            "plan needs exactly 5 algorithms and 5 partitions, got {} and {}",
            algorithms.len(),
            partitions.len()
        )));
    }
    let mut seen = algorithms.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != 5 {
        return Err(Error::config("algorithm ids must be distinct"));
    }
    let instances = PAIRS
        .iter()
        .zip(INSTANCE_IDS)
        .zip(partitions)
        .map(|((&(a, b), id), &partition)| PlanInstance {
            id: id.to_owned(),
            algorithms: (algorithms[a].to_owned(), algorithms[b].to_owned()),
            partition,
        })
        .collect();
    Ok(AssignmentPlan { instances })
}

impl AssignmentPlan {
    /// Number of instances each algorithm appears in.
    pub fn algorithm_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for inst in &self.instances {
            for algo in [&inst.algorithms.0, &inst.algorithms.1] {
                *counts.entry(algo.as_str()).or_default() += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub instance: String,
    pub algorithm: String,
    pub partition: usize,
    pub cv: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub instances: Vec<InstanceOutcome>,
    /// Mean of the instance-level mean reports, per algorithm.
    pub per_algorithm: BTreeMap<String, EvalReport>,
    /// Plan algorithms that had no trainer bound and were skipped.
    pub unbound: Vec<String>,
}

/// Runs every (instance, algorithm) pair with [`PLAN_FOLDS`]-fold CV on the
/// instance's partition.
///
/// Instance `i` seeds its folds with `seed::derive(seed, 10, i)`, so swapping
/// two partitions only changes the instances that use them.
pub fn run_plan(
    plan: &AssignmentPlan,
    datasets: &[DenseDataset],
    trainers: &BTreeMap<String, Box<dyn Trainer>>,
    seed: u64,
) -> Result<PlanOutcome> {
    if plan.instances.len() != 5 {
        return Err(Error::config("plan must have 5 instances"));
    }
    let mut outcomes = Vec::new();
    let mut unbound = Vec::new();
    for (i, inst) in plan.instances.iter().enumerate() {
        let data = datasets.get(inst.partition).ok_or_else(|| {
            Error::config(format!("instance {} uses missing partition {}", inst.id, inst.partition))
        })?;
        for algo in [&inst.algorithms.0, &inst.algorithms.1] {
            let Some(trainer) = trainers.get(algo) else {
                if !unbound.contains(algo) {
                    unbound.push(algo.clone());
                }
                continue;
            };
            log::info!("instance {} training {algo} on partition {}", inst.id, inst.partition);
            let cv = kfold_cv(data, PLAN_FOLDS, trainer.as_ref(), seed::derive(seed, 10, i as u64))?;
            outcomes.push(InstanceOutcome {
                instance: inst.id.clone(),
                algorithm: algo.clone(),
                partition: inst.partition,
                cv,
            });
        }
    }
    let mut grouped: BTreeMap<String, Vec<EvalReport>> = BTreeMap::new();
    for o in &outcomes {
        grouped.entry(o.algorithm.clone()).or_default().push(o.cv.mean.clone());
    }
    let per_algorithm = grouped
        .into_iter()
        .map(|(algo, reports)| (algo, EvalReport::average(&reports)))
        .collect();
    Ok(PlanOutcome {
        instances: outcomes,
        per_algorithm,
        unbound,
    })
}
