use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::report::EvalReport;
use super::trainers::{Task, Trainer};
use crate::dataio::DenseDataset;
use crate::error::{Error, Result};
use crate::seed;

const MAX_RESHUFFLES: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<EvalReport>,
    pub mean: EvalReport,
}

/// Test-fold index sets: a seeded shuffle cut into `k` contiguous slices whose
/// sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::config(format!("k = {k} exceeds {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

fn complement(n: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; n];
    test.iter().for_each(|&i| in_test[i] = true);
    (0..n).filter(|&i| !in_test[i]).collect()
}

fn has_both_classes(ds: &DenseDataset, rows: &[usize]) -> bool {
    let pos = rows.iter().filter(|&&i| ds.labels()[i] == 1.0).count();
    pos > 0 && pos < rows.len()
}

/// K-fold cross-validation of `trainer` on `ds`.
///
/// For classification every training fold must contain both classes; the
/// shuffle is redrawn with derived seeds up to 100 times before giving up.
/// The mean report averages per-fold metrics and sums wall clock.
pub fn kfold_cv(ds: &DenseDataset, k: usize, trainer: &dyn Trainer, seed: u64) -> Result<CvResult> {
    let task = trainer.task();
    if task == Task::Classification {
        ds.require_binary()?;
    }
    let n = ds.len();
    let mut folds = None;
    for attempt in 0..MAX_RESHUFFLES {
        let shuffle_seed = if attempt == 0 { seed } else { seed::derive(seed, 1, attempt) };
        let candidate = kfold_indices(n, k, shuffle_seed)?;
        if task == Task::Regression
            || candidate.iter().all(|test| has_both_classes(ds, &complement(n, test)))
        {
            folds = Some(candidate);
            break;
        }
    }
    let folds = folds.ok_or_else(|| {
        Error::data(format!(
            "no {k}-fold split with both classes in every training fold after {MAX_RESHUFFLES} shuffles"
        ))
    })?;

    let mut reports = Vec::with_capacity(k);
    for test_idx in &folds {
        let train = ds.select(&complement(n, test_idx));
        let test = ds.select(test_idx);
        let start = Instant::now();
        let predictor = trainer.fit(&train)?;
        let predictions = predictor.predict(&test)?;
        let elapsed = start.elapsed().as_secs_f64();
        reports.push(EvalReport::evaluate(test.labels(), &predictions, elapsed)?);
    }
    let mean = EvalReport::average(&reports);
    Ok(CvResult { folds: reports, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::generate_synthetic;
    use crate::eval::trainers::{ConstantTrainer, LogisticTrainer};
    use crate::linmodels::SgdConfig;
    use ndarray::Array2;

    #[test]
    fn folds_partition_indices() {
        let folds = kfold_indices(100, 5, 3).unwrap();
        assert!(folds.iter().all(|f| f.len() == 20));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let sizes: Vec<usize> = kfold_indices(103, 5, 3).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![21, 21, 21, 20, 20]);
        assert!(kfold_indices(3, 5, 0).is_err());
        assert!(kfold_indices(30, 1, 0).is_err());
    }

    #[test]
    fn logistic_cv_reports() {
        let ds = generate_synthetic(100, 5, 3.0, 1).unwrap();
        let trainer = LogisticTrainer(SgdConfig::default());
        let cv = kfold_cv(&ds, 5, &trainer, 7).unwrap();
        assert_eq!(cv.folds.len(), 5);
        assert!(cv.folds.iter().all(|f| f.rows == 20));
        let mean_acc = cv.folds.iter().map(|f| f.accuracy.unwrap()).sum::<f64>() / 5.0;
        assert!((mean_acc - cv.mean.accuracy.unwrap()).abs() < 1e-12);
        let wall: f64 = cv.folds.iter().map(|f| f.wall_clock_s).sum();
        assert!((wall - cv.mean.wall_clock_s).abs() < 1e-12);
        assert_eq!(cv.mean.rows, 100);
    }

    #[test]
    fn regression_cv_skips_class_check() {
        let x = Array2::from_shape_fn((12, 1), |(i, _)| i as f64);
        let y: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let ds = DenseDataset::new(x, y).unwrap();
        let cv = kfold_cv(&ds, 3, &ConstantTrainer(Task::Regression), 1).unwrap();
        assert!(cv.mean.rmse.is_some());
        assert!(cv.mean.accuracy.is_none());
    }

    #[test]
    fn single_positive_cannot_cover_all_training_folds() {
        let x = Array2::from_shape_fn((6, 1), |(i, _)| i as f64);
        let mut y = vec![0.0; 6];
        y[0] = 1.0;
        let ds = DenseDataset::new(x, y).unwrap();
        let err = kfold_cv(&ds, 3, &ConstantTrainer(Task::Classification), 1).unwrap_err();
        assert!(err.to_string().contains("both classes"));
    }
}
