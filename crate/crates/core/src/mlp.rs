//! Multilayer perceptron with batch normalization, dropout and Adam.
//!
//! Each hidden block is `affine → batch norm → ReLU → dropout`; a final affine
//! layer produces logits. Gradients are computed by hand-written reverse-mode
//! passes through the dropout masks and the batch-statistics normalization.

use std::io::Write;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataio::DenseDataset;
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input_size: usize,
    pub hidden_size: usize,
    pub num_hidden_blocks: usize,
    pub output_size: usize,
    /// Drop probability.
    pub dropout_p: f64,
}

impl Default for MlpArchitecture {
    /// 2000-128-128-2 with drop probability 0.8.
    fn default() -> Self {
        Self {
            input_size: 2000,
            hidden_size: 128,
            num_hidden_blocks: 2,
            output_size: 2,
            dropout_p: 0.8,
        }
    }
}

impl MlpArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_size < 1 || self.hidden_size < 1 || self.output_size < 1 {
            return Err(Error::config("layer sizes must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::config(format!("dropout_p must be in [0, 1), got {}", self.dropout_p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub seed: u64,
    pub class_weights: Option<(f64, f64)>,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            weight_decay: 1e-4,
            epochs: 100,
            batch_size: 128,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            seed: 0,
            class_weights: None,
        }
    }
}

impl MlpTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::config("learning_rate must be > 0 and weight_decay >= 0"));
        }
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !unit(self.adam_beta1) || !unit(self.adam_beta2) {
            return Err(Error::config("Adam betas must lie in (0, 1)"));
        }
        if !(self.adam_eps > 0.0) || !(self.bn_eps > 0.0) {
            return Err(Error::config("eps values must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(Error::config("bn_momentum must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// What a parameter tensor is; weight decay applies to affine weights only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    AffineWeight,
    AffineBias,
    BnScale,
    BnShift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    /// `out × in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    fn init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((fan_out, fan_in), || rng.random_range(-limit..=limit)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenBlock {
    pub affine: Affine,
    pub bn_scale: Array1<f64>,
    pub bn_shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub arch: MlpArchitecture,
    pub blocks: Vec<HiddenBlock>,
    pub output: Affine,
    pub mode: Mode,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// Use running statistics even in train mode.
    pub bn_frozen: bool,
}

/// Gradient tensors, flattened, in [`MlpModel::param_slices`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

struct BlockCache {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    pre_relu: Array2<f64>,
    /// Dropout multiplier per activation (0 or 1/(1−p)); `None` when identity.
    mask: Option<Array2<f64>>,
    batch_stats: Option<(Array1<f64>, Array1<f64>)>,
}

struct ForwardPass {
    logits: Array2<f64>,
    caches: Vec<BlockCache>,
    last_hidden: Array2<f64>,
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&y| y >= classes) {
        Some(y) => Err(Error::data(format!("label {y} outside 0..{classes}"))),
        None => Ok(()),
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Weighted mean cross-entropy: `Σ c_i·CE_i / B`.
fn cross_entropy(
    logits: &Array2<f64>,
    labels: &[usize],
    class_weights: Option<(f64, f64)>,
) -> (f64, Array2<f64>) {
    let b = logits.nrows() as f64;
    let probs = softmax(&logits.view());
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let c = class_weight(class_weights, y);
        loss += c * (lse - row[y]);
        grad[[i, y]] -= 1.0;
        grad.row_mut(i).mapv_inplace(|g| g * c / b);
    }
    (loss / b, grad)
}

fn class_weight(weights: Option<(f64, f64)>, label: usize) -> f64 {
    match (weights, label) {
        (None, _) => 1.0,
        (Some((w0, _)), 0) => w0,
        (Some((_, w1)), 1) => w1,
        _ => 1.0,
    }
}

impl MlpModel {
    /// Seeded uniform ±√(6/(fan_in+fan_out)) weights, zero biases, BN at identity.
    pub fn init(arch: &MlpArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = seed::rng(seed);
        let mut blocks = Vec::with_capacity(arch.num_hidden_blocks);
        let mut fan_in = arch.input_size;
        for _ in 0..arch.num_hidden_blocks {
            let h = arch.hidden_size;
            blocks.push(HiddenBlock {
                affine: Affine::init(fan_in, h, &mut rng),
                bn_scale: Array1::ones(h),
                bn_shift: Array1::zeros(h),
                running_mean: Array1::zeros(h),
                running_var: Array1::ones(h),
            });
            fan_in = h;
        }
        let output = Affine::init(fan_in, arch.output_size, &mut rng);
        Ok(Self {
            arch: arch.clone(),
            blocks,
            output,
            mode: Mode::Train,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            bn_frozen: false,
        })
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Parameter tensors in a fixed order: per block weight, bias, BN scale,
    /// BN shift; then output weight and bias.
    pub fn param_slices(&self) -> Vec<(ParamRole, &[f64])> {
        let mut out = Vec::with_capacity(4 * self.blocks.len() + 2);
        for b in &self.blocks {
            out.push((ParamRole::AffineWeight, b.affine.weight.as_slice().unwrap()));
            out.push((ParamRole::AffineBias, b.affine.bias.as_slice().unwrap()));
            out.push((ParamRole::BnScale, b.bn_scale.as_slice().unwrap()));
            out.push((ParamRole::BnShift, b.bn_shift.as_slice().unwrap()));
        }
        out.push((ParamRole::AffineWeight, self.output.weight.as_slice().unwrap()));
        out.push((ParamRole::AffineBias, self.output.bias.as_slice().unwrap()));
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<(ParamRole, &mut [f64])> {
        let mut out = Vec::with_capacity(4 * self.blocks.len() + 2);
        for b in &mut self.blocks {
            out.push((ParamRole::AffineWeight, b.affine.weight.as_slice_mut().unwrap()));
            out.push((ParamRole::AffineBias, b.affine.bias.as_slice_mut().unwrap()));
            out.push((ParamRole::BnScale, b.bn_scale.as_slice_mut().unwrap()));
            out.push((ParamRole::BnShift, b.bn_shift.as_slice_mut().unwrap()));
        }
        out.push((ParamRole::AffineWeight, self.output.weight.as_slice_mut().unwrap()));
        out.push((ParamRole::AffineBias, self.output.bias.as_slice_mut().unwrap()));
        out
    }

    fn check_input(&self, batch: &ArrayView2<'_, f64>) -> Result<()> {
        if batch.ncols() != self.arch.input_size {
            return Err(Error::Dimension {
                expected: self.arch.input_size,
                got: batch.ncols(),
            });
        }
        if batch.nrows() == 0 {
            return Err(Error::data("empty batch"));
        }
        if self.mode == Mode::Train && !self.bn_frozen && batch.nrows() < 2 {
            return Err(Error::data("train-mode batch normalization needs at least 2 rows"));
        }
        Ok(())
    }

    /// Forward pass without touching any model state.
    fn run(&self, batch: &ArrayView2<'_, f64>, mode: Mode, mut rng: Option<&mut Rng>) -> ForwardPass {
        let batch_stats = mode == Mode::Train && !self.bn_frozen;
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut x = batch.to_owned();
        for block in &self.blocks {
            let z = block.affine.apply(&x.view());
            let (mean, var) = if batch_stats {
                let mean = z.mean_axis(Axis(0)).unwrap();
                let var = z.var_axis(Axis(0), 0.0);
                (mean, var)
            } else {
                (block.running_mean.clone(), block.running_var.clone())
            };
            let inv_std = var.mapv(|v| 1.0 / (v + self.bn_eps).sqrt());
            let xhat = (&z - &mean) * &inv_std;
            let pre_relu = &xhat * &block.bn_scale + &block.bn_shift;
            let mut act = pre_relu.mapv(|v| v.max(0.0));
            let mask = match (mode, rng.as_deref_mut()) {
                (Mode::Train, Some(rng)) if self.arch.dropout_p > 0.0 => {
                    let p = self.arch.dropout_p;
                    let keep = 1.0 / (1.0 - p);
                    let mask = Array2::from_shape_simple_fn(act.raw_dim(), || {
                        if rng.random::<f64>() < p {
                            0.0
                        } else {
                            keep
                        }
                    });
                    act *= &mask;
                    Some(mask)
                }
                _ => None,
            };
            caches.push(BlockCache {
                input: x,
                xhat,
                inv_std,
                pre_relu,
                mask,
                batch_stats: batch_stats.then_some((mean, var)),
            });
            x = act;
        }
        let logits = self.output.apply(&x.view());
        ForwardPass {
            logits,
            caches,
            last_hidden: x,
        }
    }

    fn update_running_stats(&mut self, caches: &[BlockCache], batch_rows: usize) {
        let m = self.bn_momentum;
        let correction = batch_rows as f64 / (batch_rows as f64 - 1.0);
        for (block, cache) in self.blocks.iter_mut().zip(caches) {
            if let Some((mean, var)) = &cache.batch_stats {
                block.running_mean = &block.running_mean * (1.0 - m) + mean * m;
                block.running_var = &block.running_var * (1.0 - m) + &(var * (correction * m));
            }
        }
    }

    /// Logits for `batch` in the model's current mode.
    ///
    /// Train mode draws dropout masks from `rng` and updates the running
    /// batch-norm statistics.
    pub fn forward(&mut self, batch: ArrayView2<'_, f64>, rng: &mut Rng) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        match self.mode {
            Mode::Eval => Ok(self.run(&batch, Mode::Eval, None).logits),
            Mode::Train => {
                let pass = self.run(&batch, Mode::Train, Some(rng));
                self.update_running_stats(&pass.caches, batch.nrows());
                Ok(pass.logits)
            }
        }
    }

    /// Eval-mode logits; never mutates the model.
    pub fn forward_eval(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if batch.ncols() != self.arch.input_size {
            return Err(Error::Dimension {
                expected: self.arch.input_size,
                got: batch.ncols(),
            });
        }
        Ok(self.run(&batch, Mode::Eval, None).logits)
    }

    /// Train-mode post-normalization activations (before scale/shift) of every
    /// hidden block, without dropout.
    pub fn normalized_activations(&self, batch: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        self.check_input(&batch)?;
        Ok(self
            .run(&batch, Mode::Train, None)
            .caches
            .into_iter()
            .map(|c| c.xhat)
            .collect())
    }

    /// Weighted mean softmax cross-entropy and its gradient for every
    /// parameter. Requires train mode; running statistics are updated as in
    /// [`forward`](Self::forward).
    pub fn loss_and_gradients(
        &mut self,
        batch: ArrayView2<'_, f64>,
        labels: &[usize],
        class_weights: Option<(f64, f64)>,
        rng: &mut Rng,
    ) -> Result<(f64, Gradients)> {
        if self.mode != Mode::Train {
            return Err(Error::config("loss_and_gradients requires train mode"));
        }
        self.check_input(&batch)?;
        if labels.len() != batch.nrows() {
            return Err(Error::Dimension {
                expected: batch.nrows(),
                got: labels.len(),
            });
        }
        check_labels(labels, self.arch.output_size)?;
        let pass = self.run(&batch, Mode::Train, Some(rng));
        let (loss, dlogits) = cross_entropy(&pass.logits, labels, class_weights);

        let mut tensors: Vec<Vec<f64>> = Vec::with_capacity(4 * self.blocks.len() + 2);
        let out_w = dlogits.t().dot(&pass.last_hidden);
        let out_b = dlogits.sum_axis(Axis(0));
        let mut upstream = dlogits.dot(&self.output.weight);

        let mut block_grads = Vec::with_capacity(self.blocks.len());
        for (block, cache) in self.blocks.iter().zip(&pass.caches).rev() {
            let mut dact = upstream;
            if let Some(mask) = &cache.mask {
                dact *= mask;
            }
            let dy = ndarray::Zip::from(&dact)
                .and(&cache.pre_relu)
                .map_collect(|&g, &y| if y > 0.0 { g } else { 0.0 });
            let dscale = (&dy * &cache.xhat).sum_axis(Axis(0));
            let dshift = dy.sum_axis(Axis(0));
            let dxhat = &dy * &block.bn_scale;
            let dz = if cache.batch_stats.is_some() {
                let b = dxhat.nrows() as f64;
                let sum_dxhat = dxhat.sum_axis(Axis(0));
                let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
                ((&dxhat * b) - &sum_dxhat - &(&cache.xhat * &sum_dxhat_xhat)) * &(&cache.inv_std / b)
            } else {
                &dxhat * &cache.inv_std
            };
            let dw = dz.t().dot(&cache.input);
            let db = dz.sum_axis(Axis(0));
            upstream = dz.dot(&block.affine.weight);
            block_grads.push([dw.into_raw_vec_and_offset().0, db.to_vec(), dscale.to_vec(), dshift.to_vec()]);
        }
        for grads in block_grads.into_iter().rev() {
            tensors.extend(grads);
        }
        tensors.push(out_w.into_raw_vec_and_offset().0);
        tensors.push(out_b.to_vec());

        self.update_running_stats(&pass.caches, batch.nrows());
        Ok((loss, Gradients { tensors }))
    }

    /// Eval-mode loss over `batch`; no state change.
    pub fn eval_loss(
        &self,
        batch: ArrayView2<'_, f64>,
        labels: &[usize],
        class_weights: Option<(f64, f64)>,
    ) -> Result<f64> {
        check_labels(labels, self.arch.output_size)?;
        let logits = self.forward_eval(batch)?;
        Ok(cross_entropy(&logits, labels, class_weights).0)
    }

    /// Eval-mode probability of class 1 per row (two-class networks).
    pub fn positive_probabilities(&self, ds: &DenseDataset) -> Result<Vec<f64>> {
        if self.arch.output_size < 2 {
            return Err(Error::config("positive_probabilities needs at least two outputs"));
        }
        let mut out = Vec::with_capacity(ds.len());
        let feats = ds.features();
        for start in (0..ds.len()).step_by(1024) {
            let end = (start + 1024).min(ds.len());
            let probs = softmax(&self.forward_eval(feats.slice(s![start..end, ..]))?.view());
            out.extend(probs.column(1).iter().copied());
        }
        Ok(out)
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &MlpModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.param_slices().iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// Adam step with L2 weight decay added to the affine-weight gradients.
    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, cfg: &MlpTrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for (k, (role, params)) in model.param_slices_mut().into_iter().enumerate() {
            let decay = if role == ParamRole::AffineWeight { cfg.weight_decay } else { 0.0 };
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads.tensors[k]);
            for i in 0..params.len() {
                let gi = g[i] + decay * params[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                params[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Writes `epoch,train_loss,val_loss` rows.
pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], mut out: W) -> Result<()> {
    writeln!(out, "epoch,train_loss,val_loss")?;
    for p in curve {
        writeln!(out, "{},{},{}", p.epoch, p.train_loss, p.val_loss)?;
    }
    Ok(())
}

fn class_labels(ds: &DenseDataset, classes: usize) -> Result<Vec<usize>> {
    ds.labels()
        .iter()
        .map(|&y| {
            if y >= 0.0 && y.fract() == 0.0 && (y as usize) < classes {
                Ok(y as usize)
            } else {
                Err(Error::data(format!("label {y} is not a class in 0..{classes}")))
            }
        })
        .collect()
}

/// Trains on a seeded 90% of `ds`; the other 10% only feeds the learning curve.
///
/// Each epoch reshuffles the training rows. A trailing batch of one row is
/// skipped since batch statistics are undefined for it.
pub fn train(
    ds: &DenseDataset,
    arch: &MlpArchitecture,
    cfg: &MlpTrainConfig,
) -> Result<(MlpModel, Vec<CurvePoint>)> {
    arch.validate()?;
    cfg.validate()?;
    if ds.num_features() != arch.input_size {
        return Err(Error::Dimension {
            expected: arch.input_size,
            got: ds.num_features(),
        });
    }
    if ds.len() < 3 {
        return Err(Error::data("need at least 3 rows to hold out a validation split"));
    }
    let labels = class_labels(ds, arch.output_size)?;
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut seed::derived_rng(cfg.seed, 2, 0));
    let val_rows = (ds.len() / 10).max(1);
    let (val_idx, train_idx) = order.split_at(val_rows);
    let mut train_idx = train_idx.to_vec();
    if cfg.batch_size > train_idx.len() {
        return Err(Error::config(format!(
            "batch_size {} exceeds {} training rows",
            cfg.batch_size,
            train_idx.len()
        )));
    }
    let val = ds.select(val_idx);
    let val_labels: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut model = MlpModel::init(arch, seed::derive(cfg.seed, 3, 0))?;
    model.bn_momentum = cfg.bn_momentum;
    model.bn_eps = cfg.bn_eps;
    let mut adam = Adam::new(&model);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let feats = ds.features();

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut seed::derived_rng(cfg.seed, 4, epoch as u64));
        let mut dropout_rng = seed::derived_rng(cfg.seed, 5, epoch as u64);
        model.set_mode(Mode::Train);
        let (mut loss_sum, mut rows) = (0.0, 0usize);
        for batch in train_idx.chunks(cfg.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let x = feats.select(Axis(0), batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = model.loss_and_gradients(x.view(), &y, cfg.class_weights, &mut dropout_rng)?;
            adam.step(&mut model, &grads, cfg);
            loss_sum += loss * batch.len() as f64;
            rows += batch.len();
        }
        model.set_mode(Mode::Eval);
        let val_loss = model.eval_loss(val.features().view(), &val_labels, cfg.class_weights)?;
        curve.push(CurvePoint {
            epoch: epoch + 1,
            train_loss: loss_sum / rows as f64,
            val_loss,
        });
    }
    model.set_mode(Mode::Eval);
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small_arch(blocks: usize, p: f64) -> MlpArchitecture {
        MlpArchitecture {
            input_size: 6,
            hidden_size: 3,
            num_hidden_blocks: blocks,
            output_size: 2,
            dropout_p: p,
        }
    }

    fn batch() -> Array2<f64> {
        Array2::from_shape_fn((4, 6), |(i, j)| ((i * 7 + j * 3) as f64 * 0.37).sin() * 1.5)
    }

    #[test]
    fn zero_network_gives_zero_logits() {
        let mut model = MlpModel::init(&small_arch(2, 0.0), 1).unwrap();
        for (_, p) in model.param_slices_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut model.blocks {
            b.bn_scale.fill(1.0);
        }
        model.set_mode(Mode::Eval);
        let logits = model.forward_eval(batch().view()).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eval_shape_for_any_batch() {
        let model = MlpModel::init(&small_arch(2, 0.5), 1).unwrap();
        for b in 1..6 {
            let x = Array2::<f64>::ones((b, 6));
            assert_eq!(model.forward_eval(x.view()).unwrap().dim(), (b, 2));
        }
    }

    #[test]
    fn train_mode_rejects_single_row_and_bad_width() {
        let mut model = MlpModel::init(&small_arch(1, 0.0), 1).unwrap();
        let mut rng = seed::rng(0);
        assert!(model.forward(Array2::<f64>::ones((1, 6)).view(), &mut rng).is_err());
        assert!(matches!(
            model.forward(Array2::<f64>::ones((3, 5)).view(), &mut rng),
            Err(Error::Dimension { .. })
        ));
        model.set_mode(Mode::Eval);
        assert!(model.forward(Array2::<f64>::ones((1, 6)).view(), &mut rng).is_ok());
    }

    #[test]
    fn batch_norm_standardizes_in_train_mode() {
        let model = MlpModel::init(&small_arch(2, 0.0), 3).unwrap();
        let x = Array2::from_shape_fn((16, 6), |(i, j)| ((i * 5 + j) as f64).cos() * (j + 1) as f64);
        for xhat in model.normalized_activations(x.view()).unwrap() {
            for col in xhat.columns() {
                let mean = col.mean().unwrap();
                let var = col.var(0.0);
                assert!(mean.abs() < 1e-6);
                assert!((var - 1.0).abs() < 1e-3 || var < 1e-6, "var {var}");
            }
        }
    }

    #[test]
    fn eval_forward_is_pure() {
        let mut model = MlpModel::init(&small_arch(2, 0.5), 3).unwrap();
        let mut rng = seed::rng(1);
        model.forward(batch().view(), &mut rng).unwrap();
        model.set_mode(Mode::Eval);
        let before = model.clone();
        let a = model.forward(batch().view(), &mut rng).unwrap();
        let b = model.forward_eval(batch().view()).unwrap();
        assert_eq!(a, b);
        assert_eq!(model, before);
    }

    #[test]
    fn running_stats_move_in_train_mode() {
        let mut model = MlpModel::init(&small_arch(1, 0.0), 3).unwrap();
        let mut rng = seed::rng(1);
        model.forward(batch().view(), &mut rng).unwrap();
        assert!(model.blocks[0].running_mean.iter().any(|&m| m != 0.0));
        assert!(model.blocks[0].running_var.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn uniform_logits_give_ln2() {
        let logits = Array2::<f64>::zeros((3, 2));
        let (loss, _) = cross_entropy(&logits, &[0, 1, 1], None);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn class_weight_doubles_loss() {
        let logits = array![[0.3, -0.4]];
        let (plain, _) = cross_entropy(&logits, &[0], None);
        let (weighted, _) = cross_entropy(&logits, &[0], Some((2.0, 1.0)));
        assert_eq!(weighted, 2.0 * plain);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = array![[1.0, 2.0, 3.0], [-1000.0, 0.0, 1000.0], [0.0, 0.0, 0.0]];
        for row in softmax(&logits.view()).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_requires_train_mode() {
        let mut model = MlpModel::init(&small_arch(1, 0.0), 3).unwrap();
        model.set_mode(Mode::Eval);
        let mut rng = seed::rng(0);
        assert!(model.loss_and_gradients(batch().view(), &[0, 1, 0, 1], None, &mut rng).is_err());
    }

    #[test]
    fn config_invariants() {
        let cfg = MlpTrainConfig {
            epochs: 0,
            ..MlpTrainConfig::default()
        };
        let ds = crate::dataio::generate_synthetic(20, 6, 1.0, 1).unwrap();
        assert!(train(&ds, &small_arch(1, 0.0), &cfg).is_err());
        let cfg = MlpTrainConfig {
            batch_size: 100,
            epochs: 1,
            ..MlpTrainConfig::default()
        };
        assert!(train(&ds, &small_arch(1, 0.0), &cfg).is_err());
        assert!(small_arch(1, 1.0).validate().is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let ds = crate::dataio::generate_synthetic(120, 6, 2.0, 4).unwrap();
        let cfg = MlpTrainConfig {
            learning_rate: 1e-2,
            epochs: 4,
            batch_size: 16,
            seed: 9,
            ..MlpTrainConfig::default()
        };
        let (m1, c1) = train(&ds, &small_arch(2, 0.3), &cfg).unwrap();
        let (m2, c2) = train(&ds, &small_arch(2, 0.3), &cfg).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(m1, m2);
        assert_eq!(c1.len(), 4);
        let mut csv = Vec::new();
        write_curve_csv(&c1, &mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("epoch,train_loss,val_loss\n1,"));
    }
}
