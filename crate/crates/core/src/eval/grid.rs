use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cv::{kfold_cv, CvResult};
use super::trainers::{Task, Trainer};
use crate::dataio::DenseDataset;
use crate::error::{Error, Result};

pub type ParamGrid = BTreeMap<String, Vec<f64>>;
pub type ParamSet = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: ParamSet,
    /// Mean k-fold RMSE (regression) or mean AUC (classification).
    pub score: f64,
    pub cv: CvResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ParamSet,
    pub best_score: f64,
    pub task: Task,
    pub results: Vec<GridPoint>,
}

/// Every combination of the grid, ordered lexicographically by (parameter
/// name, value position): the alphabetically last name varies fastest.
pub fn grid_points(grid: &ParamGrid) -> Result<Vec<ParamSet>> {
    if grid.is_empty() {
        return Err(Error::config("parameter grid is empty"));
    }
    if let Some((name, _)) = grid.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::config(format!("parameter {name:?} has no values")));
    }
    let mut points = vec![ParamSet::new()];
    for (name, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(name.clone(), *v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// Exhaustive k-fold grid search. Ties keep the earliest combination.
pub fn grid_search(
    grid: &ParamGrid,
    k: usize,
    ds: &DenseDataset,
    factory: &dyn Fn(&ParamSet) -> Result<Box<dyn Trainer>>,
    seed: u64,
) -> Result<GridResult> {
    let points = grid_points(grid)?;
    let mut results: Vec<GridPoint> = Vec::with_capacity(points.len());
    let mut task = None;
    for params in points {
        let trainer = factory(&params)?;
        let t = *task.get_or_insert(trainer.task());
        let cv = kfold_cv(ds, k, trainer.as_ref(), seed)?;
        let score = match t {
            Task::Regression => cv.mean.rmse,
            Task::Classification => cv.mean.auc_roc,
        }
        .ok_or_else(|| Error::data("grid point produced no score"))?;
        log::info!("grid {params:?} -> {score}");
        results.push(GridPoint { params, score, cv });
    }
    let task = task.expect("grid has at least one point");
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        let better = match task {
            Task::Regression => r.score < results[best].score,
            Task::Classification => r.score > results[best].score,
        };
        if better {
            best = i;
        }
    }
    Ok(GridResult {
        best: results[best].params.clone(),
        best_score: results[best].score,
        task,
        results,
    })
}
