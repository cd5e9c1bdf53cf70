//! Gradient-boosted regression trees with the regularized split gain.
//!
//! Squared-error objective, so every hessian is 1 and `min_child_weight` is a
//! minimum leaf row count. Splits come from an exact greedy scan over every
//! feature and every midpoint between consecutive distinct sorted values. The
//! shrinkage `eta` is folded into the stored leaf weights.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub max_depth: usize,
    pub eta: f64,
    pub num_round: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            max_depth: 10,
            eta: 0.05,
            num_round: 300,
            min_child_weight: 5.0,
            lambda: 1.5,
            gamma: 0.1,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::config("max_depth must be >= 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.num_round < 1 {
            return Err(Error::config("num_round must be >= 1"));
        }
        if !(self.min_child_weight >= 0.0 && self.lambda >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::config("min_child_weight, lambda and gamma must be >= 0"));
        }
        Ok(())
    }
}

/// `gain` and `cover` (training hessian sum) are fit-time bookkeeping; they
/// are NaN for trees restored from an artifact.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        cover: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
        cover: f64,
    },
}

impl TreeNode {
    /// `x ≤ threshold` goes left.
    pub fn lookup(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight, .. } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if row(*feature) <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub base_score: f64,
    pub num_features: usize,
    pub trees: Vec<TreeNode>,
}

/// Fit-time byproducts.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Final training-set predictions as accumulated during fit.
    pub train_predictions: Vec<f64>,
    /// Training RMSE after each round.
    pub rmse_per_round: Vec<f64>,
}

/// Regularized gain of splitting `(G, H)` into `(gl, hl)` and the remainder.
pub fn split_gain(gl: f64, hl: f64, g: f64, h: f64, lambda: f64, gamma: f64) -> f64 {
    let (gr, hr) = (g - gl, h - hl);
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Grower<'a> {
    x: ArrayView2<'a, f64>,
    grad: &'a [f64],
    cfg: &'a GbtConfig,
    /// Non-constant feature indices, ascending; constant ones never split.
    active: &'a [usize],
}

impl Grower<'_> {
    /// `sorted[k]` holds the node's rows ordered by feature `active[k]`.
    fn grow(&self, rows: Vec<u32>, sorted: Vec<Vec<u32>>, depth: usize) -> TreeNode {
        let g: f64 = rows.iter().map(|&r| self.grad[r as usize]).sum();
        let h = rows.len() as f64;
        let leaf = TreeNode::Leaf {
            weight: -self.cfg.eta * g / (h + self.cfg.lambda),
            cover: h,
        };
        if depth >= self.cfg.max_depth {
            return leaf;
        }
        let Some(best) = self.best_split(&sorted, g, h) else {
            return leaf;
        };
        let goes_left: Vec<bool> = {
            let mut mask = vec![false; self.x.nrows()];
            for &r in &rows {
                mask[r as usize] = self.x[[r as usize, best.feature]] <= best.threshold;
            }
            mask
        };
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = sorted
            .into_iter()
            .map(|list| list.into_iter().partition(|&r| goes_left[r as usize]))
            .unzip();
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            rows.into_iter().partition(|&r| goes_left[r as usize]);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            gain: best.gain,
            cover: h,
            left: Box::new(self.grow(left_rows, left, depth + 1)),
            right: Box::new(self.grow(right_rows, right, depth + 1)),
        }
    }

    /// Highest-gain admissible split; ties keep the lower feature index, then
    /// the lower threshold.
    fn best_split(&self, sorted: &[Vec<u32>], g: f64, h: f64) -> Option<BestSplit> {
        let cfg = self.cfg;
        let mut best: Option<BestSplit> = None;
        for (&feature, rows) in self.active.iter().zip(sorted) {
            let (mut gl, mut hl) = (0.0, 0.0);
            for pair in rows.windows(2) {
                let (a, b) = (pair[0] as usize, pair[1] as usize);
                gl += self.grad[a];
                hl += 1.0;
                let (va, vb) = (self.x[[a, feature]], self.x[[b, feature]]);
                if va == vb {
                    continue;
                }
                if hl < cfg.min_child_weight || h - hl < cfg.min_child_weight {
                    continue;
                }
                let gain = split_gain(gl, hl, g, h, cfg.lambda, cfg.gamma);
                if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature,
                        threshold: midpoint(va, vb),
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi` so
/// that `x ≤ threshold` separates them.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

fn check_inputs(features: &ArrayView2<'_, f64>, targets: &[f64]) -> Result<()> {
    if features.nrows() != targets.len() {
        return Err(Error::Dimension {
            expected: features.nrows(),
            got: targets.len(),
        });
    }
    if targets.len() < 2 {
        return Err(Error::data("boosting needs at least 2 rows"));
    }
    if features.iter().chain(targets).any(|v| v.is_nan()) {
        return Err(Error::data("NaN in boosting inputs; impute first"));
    }
    Ok(())
}

fn rmse(pred: &[f64], targets: &[f64]) -> f64 {
    let sse: f64 = pred.iter().zip(targets).map(|(p, y)| (p - y).powi(2)).sum();
    (sse / targets.len() as f64).sqrt()
}

pub fn fit(features: ArrayView2<'_, f64>, targets: &[f64], cfg: &GbtConfig) -> Result<GbtModel> {
    fit_traced(features, targets, cfg).map(|(m, _)| m)
}

/// [`fit`] that also returns the per-round training RMSE and final predictions.
pub fn fit_traced(
    features: ArrayView2<'_, f64>,
    targets: &[f64],
    cfg: &GbtConfig,
) -> Result<(GbtModel, FitTrace)> {
    cfg.validate()?;
    check_inputs(&features, targets)?;
    let n = targets.len();
    let base_score = if targets.iter().all(|&y| y == targets[0]) {
        targets[0]
    } else {
        targets.iter().sum::<f64>() / n as f64
    };
    let active: Vec<usize> = (0..features.ncols())
        .filter(|&f| features.column(f).iter().any(|&v| v != features[[0, f]]))
        .collect();
    let presorted: Vec<Vec<u32>> = active
        .iter()
        .map(|&f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| features[[a as usize, f]].total_cmp(&features[[b as usize, f]]));
            idx
        })
        .collect();

    let mut pred = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.num_round);
    let mut rmse_per_round = Vec::with_capacity(cfg.num_round);
    for _ in 0..cfg.num_round {
        for i in 0..n {
            grad[i] = pred[i] - targets[i];
        }
        let grower = Grower {
            x: features,
            grad: &grad,
            cfg,
            active: &active,
        };
        let tree = grower.grow((0..n as u32).collect(), presorted.clone(), 0);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += tree.lookup(|f| features[[i, f]]);
        }
        rmse_per_round.push(rmse(&pred, targets));
        trees.push(tree);
    }
    let model = GbtModel {
        base_score,
        num_features: features.ncols(),
        trees,
    };
    Ok((
        model,
        FitTrace {
            train_predictions: pred,
            rmse_per_round,
        },
    ))
}

impl GbtModel {
    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.predict_rounds(features, self.trees.len())
    }

    /// Prediction using only the first `rounds` trees.
    pub fn predict_rounds(&self, features: ArrayView2<'_, f64>, rounds: usize) -> Result<Vec<f64>> {
        if features.ncols() != self.num_features {
            return Err(Error::Dimension {
                expected: self.num_features,
                got: features.ncols(),
            });
        }
        Ok(features
            .rows()
            .into_iter()
            .map(|row| {
                let mut p = self.base_score;
                for tree in self.trees.iter().take(rounds) {
                    p += tree.lookup(|f| row[f]);
                }
                p
            })
            .collect())
    }
}
