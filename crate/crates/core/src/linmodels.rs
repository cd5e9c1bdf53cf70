//! Linear classifiers trained by stochastic methods.
//!
//! [`train_pegasos`] is the primal estimated sub-gradient SVM solver: one
//! random example per step, step size `1/(λt)`, and an optional projection onto
//! the ball of radius `1/√λ`. [`train_logistic`] minimizes the L2-regularized
//! weighted cross-entropy by seeded mini-batch gradient descent.
//!
//! Both trainers are organized as a sequence of epochs with generators drawn
//! from [`seed::derived_rng`]`(seed, 0, epoch)`. The distributed workers run the
//! same epoch functions with their own worker id as the stream.

use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataio::DenseDataset;
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    Svm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    /// L2 strength.
    pub lambda: f64,
    /// Pegasos: total single-example iterations. Logistic: epochs.
    pub epochs_or_iters: usize,
    pub batch_size: usize,
    /// Logistic only; Pegasos uses `1/(λt)`.
    pub learning_rate: f64,
    pub seed: u64,
    /// Per-example loss multipliers for labels 0 and 1.
    pub class_weights: Option<(f64, f64)>,
    /// Pegasos ball projection after every step.
    pub project: bool,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs_or_iters: 10,
            batch_size: 32,
            learning_rate: 0.1,
            seed: 0,
            class_weights: None,
            project: true,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lambda) {
            return Err(Error::config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.epochs_or_iters < 1 {
            return Err(Error::config("epochs_or_iters must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !positive(self.learning_rate) {
            return Err(Error::config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if let Some((w0, w1)) = self.class_weights {
            if !positive(w0) || !positive(w1) {
                return Err(Error::config("class weights must be > 0"));
            }
        }
        Ok(())
    }

    fn class_weight(&self, label: f64) -> f64 {
        match self.class_weights {
            Some((w0, w1)) => {
                if label == 1.0 {
                    w1
                } else {
                    w0
                }
            }
            None => 1.0,
        }
    }
}

impl LinearModel {
    pub fn zeros(kind: LinearKind, num_features: usize) -> Self {
        Self {
            kind,
            weights: vec![0.0; num_features],
            bias: 0.0,
        }
    }

    pub fn num_features(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: ArrayView1<'_, f64>) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// Weights followed by the bias, the layout used on the wire.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    pub fn from_params(kind: LinearKind, params: &[f64]) -> Result<Self> {
        let (bias, weights) = params
            .split_last()
            .ok_or_else(|| Error::data("empty parameter vector"))?;
        Ok(Self {
            kind,
            weights: weights.to_vec(),
            bias: *bias,
        })
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

fn dot(w: &[f64], x: ArrayView1<'_, f64>) -> f64 {
    match x.as_slice() {
        Some(xs) => w.iter().zip(xs).map(|(a, b)| a * b).sum(),
        None => w.iter().zip(x.iter()).map(|(a, b)| a * b).sum(),
    }
}

fn axpy(alpha: f64, x: ArrayView1<'_, f64>, y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

fn check_width(model: &LinearModel, ds: &DenseDataset) -> Result<()> {
    if model.num_features() != ds.num_features() {
        return Err(Error::Dimension {
            expected: model.num_features(),
            got: ds.num_features(),
        });
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `⟨w,x⟩+b` for SVM models, its sigmoid for logistic models.
pub fn decision_scores(model: &LinearModel, ds: &DenseDataset) -> Result<Vec<f64>> {
    check_width(model, ds)?;
    Ok(ds
        .features()
        .rows()
        .into_iter()
        .map(|x| {
            let m = model.margin(x);
            match model.kind {
                LinearKind::Svm => m,
                LinearKind::Logistic => sigmoid(m),
            }
        })
        .collect())
}

/// Predicted labels: margin > 0.
pub fn predict_labels(model: &LinearModel, ds: &DenseDataset) -> Result<Vec<u32>> {
    check_width(model, ds)?;
    Ok(ds
        .features()
        .rows()
        .into_iter()
        .map(|x| u32::from(model.margin(x) > 0.0))
        .collect())
}

// ---------------------------------------------------------------- Pegasos

/// `λ/2‖w‖² + mean(max(0, 1 − y(⟨w,x⟩+b)))` with `y ∈ {−1,+1}`.
pub fn svm_objective(model: &LinearModel, ds: &DenseDataset, lambda: f64) -> f64 {
    let hinge: f64 = ds
        .features()
        .rows()
        .into_iter()
        .zip(ds.labels())
        .map(|(x, &label)| {
            let y = if label == 1.0 { 1.0 } else { -1.0 };
            (1.0 - y * model.margin(x)).max(0.0)
        })
        .sum();
    0.5 * lambda * model.weight_norm().powi(2) + hinge / ds.len() as f64
}

/// Runs `steps` Pegasos iterations numbered `first_step, first_step + 1, ...`
/// (1-based, so the step size is `1/(λt)`).
///
/// `after_step` observes the model after each projected update.
pub fn pegasos_steps(
    model: &mut LinearModel,
    ds: &DenseDataset,
    cfg: &SgdConfig,
    first_step: u64,
    steps: u64,
    rng: &mut Rng,
    mut after_step: impl FnMut(&LinearModel),
) {
    let radius = 1.0 / cfg.lambda.sqrt();
    let n = ds.len();
    for t in first_step..first_step + steps {
        let i = rng.random_range(0..n);
        let x = ds.row(i);
        let label = ds.labels()[i];
        let y = if label == 1.0 { 1.0 } else { -1.0 };
        let eta = 1.0 / (cfg.lambda * t as f64);
        let violated = y * model.margin(x) < 1.0;
        let shrink = 1.0 - eta * cfg.lambda;
        model.weights.iter_mut().for_each(|w| *w *= shrink);
        if violated {
            let step = eta * cfg.class_weight(label) * y;
            axpy(step, x, &mut model.weights);
            model.bias += step;
        }
        if cfg.project {
            let norm = model.weight_norm();
            if norm > radius {
                let scale = radius / norm;
                model.weights.iter_mut().for_each(|w| *w *= scale);
            }
        }
        after_step(model);
    }
}

/// One Pegasos epoch (`ds.len()` steps) continuing from global step `first_step`.
pub fn pegasos_epoch(
    model: &mut LinearModel,
    ds: &DenseDataset,
    cfg: &SgdConfig,
    first_step: u64,
    rng: &mut Rng,
) {
    pegasos_steps(model, ds, cfg, first_step, ds.len() as u64, rng, |_| {});
}

fn check_training_set(ds: &DenseDataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::data("training set is empty"));
    }
    ds.require_binary()
}

/// Pegasos with `cfg.epochs_or_iters` total iterations.
///
/// Iterations are grouped into epochs of `ds.len()` steps (the final epoch may
/// be partial); epoch `e` samples with `seed::derived_rng(cfg.seed, 0, e)`.
pub fn train_pegasos(ds: &DenseDataset, cfg: &SgdConfig) -> Result<LinearModel> {
    train_pegasos_observed(ds, cfg, |_| {})
}

/// [`train_pegasos`] with a hook called after every iteration.
pub fn train_pegasos_observed(
    ds: &DenseDataset,
    cfg: &SgdConfig,
    mut after_step: impl FnMut(&LinearModel),
) -> Result<LinearModel> {
    cfg.validate()?;
    check_training_set(ds)?;
    let mut model = LinearModel::zeros(LinearKind::Svm, ds.num_features());
    let total = cfg.epochs_or_iters as u64;
    let per_epoch = ds.len() as u64;
    let mut done = 0u64;
    let mut epoch = 0u64;
    while done < total {
        let steps = per_epoch.min(total - done);
        let mut rng = seed::derived_rng(cfg.seed, 0, epoch);
        pegasos_steps(&mut model, ds, cfg, done + 1, steps, &mut rng, &mut after_step);
        done += steps;
        epoch += 1;
    }
    Ok(model)
}

// ---------------------------------------------------------------- logistic

/// Mean weighted cross-entropy plus `λ/2‖w‖²` (bias unregularized).
pub fn logistic_objective(
    model: &LinearModel,
    ds: &DenseDataset,
    lambda: f64,
    class_weights: Option<(f64, f64)>,
) -> f64 {
    let cfg = SgdConfig {
        class_weights,
        ..SgdConfig::default()
    };
    let loss: f64 = ds
        .features()
        .rows()
        .into_iter()
        .zip(ds.labels())
        .map(|(x, &y)| {
            let z = model.margin(x);
            // log(1 + e^z) − y z, stable for large |z|
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            cfg.class_weight(y) * (softplus - y * z)
        })
        .sum();
    loss / ds.len() as f64 + 0.5 * lambda * model.weight_norm().powi(2)
}

/// Gradient of [`logistic_objective`] over `rows`: (dw, db).
pub fn logistic_gradient(
    model: &LinearModel,
    ds: &DenseDataset,
    rows: &[usize],
    lambda: f64,
    class_weights: Option<(f64, f64)>,
) -> (Vec<f64>, f64) {
    let cfg = SgdConfig {
        class_weights,
        ..SgdConfig::default()
    };
    let mut grad = vec![0.0; model.num_features()];
    let mut grad_b = 0.0;
    for &i in rows {
        let x = ds.row(i);
        let y = ds.labels()[i];
        let r = cfg.class_weight(y) * (sigmoid(model.margin(x)) - y);
        axpy(r, x, &mut grad);
        grad_b += r;
    }
    let inv = 1.0 / rows.len() as f64;
    for (g, w) in grad.iter_mut().zip(&model.weights) {
        *g = *g * inv + lambda * w;
    }
    (grad, grad_b * inv)
}

/// One pass of seeded mini-batch gradient descent over `ds`.
pub fn logistic_epoch(model: &mut LinearModel, ds: &DenseDataset, cfg: &SgdConfig, rng: &mut Rng) {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(rng);
    for batch in order.chunks(cfg.batch_size) {
        let (grad, grad_b) = logistic_gradient(model, ds, batch, cfg.lambda, cfg.class_weights);
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
        model.bias -= cfg.learning_rate * grad_b;
    }
}

/// L2-regularized logistic regression, `cfg.epochs_or_iters` epochs.
pub fn train_logistic(ds: &DenseDataset, cfg: &SgdConfig) -> Result<LinearModel> {
    cfg.validate()?;
    check_training_set(ds)?;
    let mut model = LinearModel::zeros(LinearKind::Logistic, ds.num_features());
    for epoch in 0..cfg.epochs_or_iters as u64 {
        let mut rng = seed::derived_rng(cfg.seed, 0, epoch);
        logistic_epoch(&mut model, ds, cfg, &mut rng);
    }
    Ok(model)
}

/// Full-batch projected sub-gradient descent on the SVM primal with step
/// `1/(λt)`, returning the best iterate seen. Used as a convex reference.
pub fn batch_subgradient_svm(ds: &DenseDataset, lambda: f64, steps: usize) -> Result<LinearModel> {
    check_training_set(ds)?;
    let n = ds.len() as f64;
    let radius = 1.0 / lambda.sqrt();
    let mut model = LinearModel::zeros(LinearKind::Svm, ds.num_features());
    let mut best = model.clone();
    let mut best_obj = svm_objective(&model, ds, lambda);
    let mut grad = vec![0.0; ds.num_features()];
    for t in 1..=steps {
        grad.iter_mut().zip(&model.weights).for_each(|(g, w)| *g = lambda * w);
        let mut grad_b = 0.0;
        let mut hinge = 0.0;
        for (x, &label) in ds.features().rows().into_iter().zip(ds.labels()) {
            let y = if label == 1.0 { 1.0 } else { -1.0 };
            let slack = 1.0 - y * model.margin(x);
            if slack > 0.0 {
                hinge += slack;
                axpy(-y / n, x, &mut grad);
                grad_b -= y / n;
            }
        }
        let obj = 0.5 * lambda * model.weight_norm().powi(2) + hinge / n;
        if obj < best_obj {
            best_obj = obj;
            best = model.clone();
        }
        let eta = 1.0 / (lambda * t as f64);
        model.weights.iter_mut().zip(&grad).for_each(|(w, g)| *w -= eta * g);
        model.bias -= eta * grad_b;
        let norm = model.weight_norm();
        if norm > radius {
            model.weights.iter_mut().for_each(|w| *w *= radius / norm);
        }
    }
    if svm_objective(&model, ds, lambda) < best_obj {
        best = model;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::generate_synthetic;
    use crate::eval::auc_roc;
    use ndarray::{array, Array2};

    fn one_point() -> DenseDataset {
        DenseDataset::new(array![[1.0, 0.0, 0.0]], vec![1.0]).unwrap()
    }

    #[test]
    fn pegasos_first_step_by_hand() {
        let cfg = SgdConfig {
            lambda: 1.0,
            epochs_or_iters: 1,
            seed: 99,
            ..SgdConfig::default()
        };
        let model = train_pegasos(&one_point(), &cfg).unwrap();
        assert_eq!(model.weights, vec![1.0, 0.0, 0.0]);
        assert_eq!(model.bias, 1.0);
    }

    #[test]
    fn pegasos_norm_bound_every_step() {
        let ds = generate_synthetic(200, 8, 1.0, 4).unwrap();
        for lambda in [1e-3, 0.1, 1.0] {
            let cfg = SgdConfig {
                lambda,
                epochs_or_iters: 1500,
                seed: 5,
                ..SgdConfig::default()
            };
            let bound = 1.0 / lambda.sqrt() + 1e-12;
            let mut steps = 0;
            let model = train_pegasos_observed(&ds, &cfg, |m| {
                steps += 1;
                assert!(m.weight_norm() <= bound);
            })
            .unwrap();
            assert_eq!(steps, 1500);
            assert!(model.weight_norm() <= bound);
        }
    }

    #[test]
    fn pegasos_rejects_non_binary_and_zero_iters() {
        let ds = DenseDataset::new(array![[1.0], [2.0]], vec![0.0, 2.0]).unwrap();
        assert!(train_pegasos(&ds, &SgdConfig::default()).is_err());
        let cfg = SgdConfig {
            epochs_or_iters: 0,
            ..SgdConfig::default()
        };
        assert!(train_pegasos(&one_point(), &cfg).is_err());
    }

    #[test]
    fn training_is_bit_reproducible() {
        let ds = generate_synthetic(300, 6, 1.0, 2).unwrap();
        let cfg = SgdConfig {
            epochs_or_iters: 3,
            seed: 17,
            ..SgdConfig::default()
        };
        assert_eq!(train_logistic(&ds, &cfg).unwrap(), train_logistic(&ds, &cfg).unwrap());
        let cfg = SgdConfig {
            epochs_or_iters: 700,
            ..cfg
        };
        assert_eq!(train_pegasos(&ds, &cfg).unwrap(), train_pegasos(&ds, &cfg).unwrap());
    }

    #[test]
    fn logistic_majority_collapse() {
        let ds = DenseDataset::new(
            Array2::from_shape_fn((20, 3), |(i, j)| ((i * 3 + j) as f64).sin()),
            vec![1.0; 20],
        )
        .unwrap();
        let model = train_logistic(&ds, &SgdConfig::default()).unwrap();
        assert!(decision_scores(&model, &ds).unwrap().iter().all(|&p| p > 0.5));
    }

    #[test]
    fn logistic_huge_lambda_shrinks_weights() {
        let ds = generate_synthetic(200, 10, 4.0, 3).unwrap();
        let cfg = SgdConfig {
            lambda: 1e6,
            learning_rate: 1e-7,
            epochs_or_iters: 20,
            ..SgdConfig::default()
        };
        let model = train_logistic(&ds, &cfg).unwrap();
        assert!(model.weight_norm() < 1e-3, "{}", model.weight_norm());
    }

    #[test]
    fn logistic_separable_training_auc() {
        let ds = generate_synthetic(200, 10, 4.0, 3).unwrap();
        let cfg = SgdConfig {
            epochs_or_iters: 30,
            ..SgdConfig::default()
        };
        let model = train_logistic(&ds, &cfg).unwrap();
        let auc = auc_roc(ds.labels(), &decision_scores(&model, &ds).unwrap()).unwrap();
        assert!(auc >= 0.95, "auc = {auc}");
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let x = array![
            [0.5, -1.0, 2.0],
            [1.5, 0.3, -0.7],
            [-0.2, 0.8, 0.1],
            [1.0, 1.0, 1.0],
            [-1.3, 0.4, 0.9]
        ];
        let ds = DenseDataset::new(x, vec![1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let model = LinearModel {
            kind: LinearKind::Logistic,
            weights: vec![0.3, -0.2, 0.5],
            bias: 0.1,
        };
        let (lambda, cw) = (0.7, Some((2.0, 0.5)));
        let rows: Vec<usize> = (0..5).collect();
        let (gw, gb) = logistic_gradient(&model, &ds, &rows, lambda, cw);
        let h = 1e-6;
        let mut params = model.to_params();
        let analytic: Vec<f64> = gw.iter().copied().chain([gb]).collect();
        for k in 0..params.len() {
            let orig = params[k];
            params[k] = orig + h;
            let up = logistic_objective(&LinearModel::from_params(LinearKind::Logistic, &params).unwrap(), &ds, lambda, cw);
            params[k] = orig - h;
            let down = logistic_objective(&LinearModel::from_params(LinearKind::Logistic, &params).unwrap(), &ds, lambda, cw);
            params[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - analytic[k]).abs() / analytic[k].abs().max(numeric.abs());
            assert!(rel < 1e-6, "param {k}: analytic {} numeric {numeric}", analytic[k]);
        }
    }

    #[test]
    fn scores_of_zero_model() {
        let ds = generate_synthetic(10, 4, 1.0, 1).unwrap();
        let svm = LinearModel::zeros(LinearKind::Svm, 4);
        let lr = LinearModel::zeros(LinearKind::Logistic, 4);
        assert!(decision_scores(&svm, &ds).unwrap().iter().all(|&s| s == 0.0));
        assert!(decision_scores(&lr, &ds).unwrap().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn svm_score_is_margin() {
        let ds = DenseDataset::new(array![[3.0, 7.0]], vec![1.0]).unwrap();
        let model = LinearModel {
            kind: LinearKind::Svm,
            weights: vec![1.0, 0.0],
            bias: 0.0,
        };
        assert_eq!(decision_scores(&model, &ds).unwrap(), vec![3.0]);
        let narrow = LinearModel::zeros(LinearKind::Svm, 3);
        assert!(matches!(decision_scores(&narrow, &ds), Err(Error::Dimension { .. })));
    }

    #[test]
    fn class_weights_scale_loss() {
        let ds = DenseDataset::new(array![[1.0]], vec![0.0]).unwrap();
        let model = LinearModel {
            kind: LinearKind::Logistic,
            weights: vec![0.4],
            bias: 0.0,
        };
        let plain = logistic_objective(&model, &ds, 0.0, None);
        let weighted = logistic_objective(&model, &ds, 0.0, Some((2.0, 1.0)));
        assert!((weighted - 2.0 * plain).abs() < 1e-15);
    }
}
