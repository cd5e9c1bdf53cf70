use crate::error::{Error, Result};

/// `[actual][predicted]` counts for a binary problem.
pub type Confusion = [[u64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension { expected: a, got: b });
    }
    if a == 0 {
        return Err(Error::data("no rows to evaluate"));
    }
    Ok(())
}

pub fn confusion_and_accuracy(labels: &[u32], predictions: &[u32]) -> Result<(Confusion, f64)> {
    check_lengths(labels.len(), predictions.len())?;
    let mut confusion = [[0u64; 2]; 2];
    for (&y, &p) in labels.iter().zip(predictions) {
        if y > 1 || p > 1 {
            return Err(Error::data(format!("non-binary class in ({y}, {p})")));
        }
        confusion[y as usize][p as usize] += 1;
    }
    let accuracy = (confusion[0][0] + confusion[1][1]) as f64 / labels.len() as f64;
    Ok((confusion, accuracy))
}

/// Unweighted mean of per-class precision, recall and F1 over all
/// `num_classes` classes. Every 0/0 is taken as 0, so a class that never
/// occurs still contributes zeros.
pub fn macro_prf(labels: &[u32], predictions: &[u32], num_classes: usize) -> Result<(f64, f64, f64)> {
    check_lengths(labels.len(), predictions.len())?;
    if num_classes == 0 {
        return Err(Error::config("num_classes must be positive"));
    }
    let mut tp = vec![0u64; num_classes];
    let mut predicted = vec![0u64; num_classes];
    let mut actual = vec![0u64; num_classes];
    for (&y, &p) in labels.iter().zip(predictions) {
        let (y, p) = (y as usize, p as usize);
        if y >= num_classes || p >= num_classes {
            return Err(Error::data(format!("class out of range 0..{num_classes}: ({y}, {p})")));
        }
        actual[y] += 1;
        predicted[p] += 1;
        if y == p {
            tp[y] += 1;
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for c in 0..num_classes {
        let p = ratio(tp[c], predicted[c]);
        let r = ratio(tp[c], actual[c]);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        sp += p;
        sr += r;
        sf += f;
    }
    let k = num_classes as f64;
    Ok((sp / k, sr / k, sf / k))
}

/// Rank-sum (Mann-Whitney) AUC with average ranks for tied scores.
///
/// Labels are 1.0 for positives and anything else for negatives.
pub fn auc_roc(labels: &[f64], scores: &[f64]) -> Result<f64> {
    check_lengths(labels.len(), scores.len())?;
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::data(format!("non-finite score {s}")));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::data("AUC needs both classes present"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) share the 1-based average rank
        let avg_rank = (start + end + 1) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i] == 1.0).count();
        rank_sum_pos += avg_rank * positives as f64;
        start = end;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn regression_metrics(targets: &[f64], predictions: &[f64]) -> Result<RegressionMetrics> {
    check_lengths(targets.len(), predictions.len())?;
    if targets.len() < 2 {
        return Err(Error::data("regression metrics need at least 2 rows"));
    }
    let n = targets.len() as f64;
    let (mut sse, mut sae) = (0.0, 0.0);
    for (y, p) in targets.iter().zip(predictions) {
        let e = y - p;
        sse += e * e;
        sae += e.abs();
    }
    let mean = targets.iter().sum::<f64>() / n;
    let sst: f64 = targets.iter().map(|y| (y - mean).powi(2)).sum();
    Ok(RegressionMetrics {
        rmse: (sse / n).sqrt(),
        mae: sae / n,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Quadratic pair count, the direct definition of AUC.
    fn auc_pairs(labels: &[f64], scores: &[f64]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                if labels[i] == 1.0 && labels[j] != 1.0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn confusion_hand_count() {
        let (c, acc) = confusion_and_accuracy(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(c, [[1, 1], [1, 1]]);
        assert_eq!(acc, 0.5);
        let (c, acc) = confusion_and_accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((c[0][1], c[1][0], acc), (0, 0, 1.0));
        assert_eq!(confusion_and_accuracy(&[1, 0], &[0, 1]).unwrap().1, 0.0);
        assert!(confusion_and_accuracy(&[1, 0], &[0]).is_err());
    }

    #[test]
    fn macro_perfect_and_absent() {
        assert_eq!(macro_prf(&[0, 1, 1], &[0, 1, 1], 2).unwrap(), (1.0, 1.0, 1.0));
        // class 0 never predicted: its precision is 0 by convention
        let (p, r, f) = macro_prf(&[0, 1, 1, 0], &[1, 1, 1, 1], 2).unwrap();
        assert_eq!(p, 0.25);
        assert_eq!(r, 0.5);
        assert!((f - (2.0 * 0.5 / 1.5) / 2.0).abs() < 1e-15);
        assert!(macro_prf(&[0, 3], &[0, 1], 2).is_err());
    }

    #[test]
    fn macro_three_class_table() {
        // actual:    0 0 0 1 1 1 2 2 2
        // predicted: 0 0 1 1 1 2 2 0 2
        let labels = [0, 0, 0, 1, 1, 1, 2, 2, 2];
        let preds = [0, 0, 1, 1, 1, 2, 2, 0, 2];
        // class 0: tp 2, predicted 3, actual 3 -> P 2/3 R 2/3 F 2/3
        // class 1: tp 2, predicted 3, actual 3 -> P 2/3 R 2/3 F 2/3
        // class 2: tp 2, predicted 3, actual 3 -> P 2/3 R 2/3 F 2/3
        let (p, r, f) = macro_prf(&labels, &preds, 3).unwrap();
        for v in [p, r, f] {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
        // skewed variant: class 2 predicted once
        let preds = [0, 0, 0, 1, 1, 0, 2, 1, 1];
        // class 0: tp 3, pred 4, act 3 -> P .75 R 1 F 6/7
        // class 1: tp 2, pred 4, act 3 -> P .5 R 2/3 F 4/7
        // class 2: tp 1, pred 1, act 3 -> P 1 R 1/3 F .5
        let (p, r, f) = macro_prf(&labels, &preds, 3).unwrap();
        assert!((p - (0.75 + 0.5 + 1.0) / 3.0).abs() < 1e-15);
        assert!((r - (1.0 + 2.0 / 3.0 + 1.0 / 3.0) / 3.0).abs() < 1e-15);
        assert!((f - (6.0 / 7.0 + 4.0 / 7.0 + 0.5) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn auc_edges() {
        assert_eq!(auc_roc(&[0.0, 0.0, 1.0, 1.0], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.0, 1.0, 1.0, 0.0], &[3.0; 4]).unwrap(), 0.5);
        assert!(auc_roc(&[1.0, 1.0], &[0.1, 0.2]).is_err());
        assert!(auc_roc(&[1.0, 0.0], &[f64::NAN, 0.2]).is_err());
    }

    #[test]
    fn auc_matches_pair_count_with_ties() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let labels: Vec<f64> = (0..200).map(|_| f64::from(rng.random_bool(0.4) as u8)).collect();
            let scores: Vec<f64> = (0..200).map(|_| rng.random_range(0..30) as f64 / 7.0).collect();
            if labels.iter().all(|&y| y == labels[0]) {
                continue;
            }
            let fast = auc_roc(&labels, &scores).unwrap();
            assert!((fast - auc_pairs(&labels, &scores)).abs() < 1e-12);
        }
    }

    #[test]
    fn regression_hand_values() {
        let m = regression_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap();
        assert!((m.rmse - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.r2.unwrap() + 1.0).abs() < 1e-15);
        let perfect = regression_metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((perfect.rmse, perfect.mae, perfect.r2), (0.0, 0.0, Some(1.0)));
        assert_eq!(regression_metrics(&[1.0, 3.0], &[2.0, 2.0]).unwrap().r2, Some(0.0));
        let flat = regression_metrics(&[2.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(flat.r2, None);
        assert_eq!(flat.mae, 1.0);
    }

    proptest! {
        #[test]
        fn auc_complement_and_monotone(
            pairs in prop::collection::vec((any::<bool>(), -1e6f64..1e6), 2..80)
        ) {
            let labels: Vec<f64> = pairs.iter().map(|p| f64::from(p.0 as u8)).collect();
            let scores: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(labels.contains(&1.0) && labels.contains(&0.0));
            let auc = auc_roc(&labels, &scores).unwrap();
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            let tie_free = sorted.windows(2).all(|w| w[0] != w[1]);
            if tie_free {
                let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
                prop_assert!((auc + auc_roc(&labels, &neg).unwrap() - 1.0).abs() < 1e-12);
            }
            let transformed: Vec<f64> = scores.iter().map(|s| (s / 1e6).exp() * 3.0 + 1.0).collect();
            let mut t_sorted = transformed.clone();
            t_sorted.sort_by(f64::total_cmp);
            // exp may merge nearly-equal scores into ties; only compare when it did not
            if t_sorted.windows(2).filter(|w| w[0] == w[1]).count() == sorted.windows(2).filter(|w| w[0] == w[1]).count() {
                prop_assert!((auc - auc_roc(&labels, &transformed).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn metrics_invariant_under_joint_permutation(
            pairs in prop::collection::vec((0u32..2, 0u32..2, -5.0f64..5.0), 2..50),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let split = |v: &[(u32, u32, f64)]| -> (Vec<u32>, Vec<u32>, Vec<f64>) {
                (v.iter().map(|p| p.0).collect(), v.iter().map(|p| p.1).collect(), v.iter().map(|p| p.2).collect())
            };
            let (l1, p1, s1) = split(&pairs);
            let (l2, p2, s2) = split(&shuffled);
            prop_assert_eq!(confusion_and_accuracy(&l1, &p1).unwrap(), confusion_and_accuracy(&l2, &p2).unwrap());
            let (a, b) = (macro_prf(&l1, &p1, 2).unwrap(), macro_prf(&l2, &p2, 2).unwrap());
            prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12 && (a.2 - b.2).abs() < 1e-12);
            let lf1: Vec<f64> = l1.iter().map(|&y| f64::from(y)).collect();
            let lf2: Vec<f64> = l2.iter().map(|&y| f64::from(y)).collect();
            if let (Ok(x), Ok(y)) = (auc_roc(&lf1, &s1), auc_roc(&lf2, &s2)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let r1 = regression_metrics(&s1, &lf1).unwrap();
            let r2 = regression_metrics(&s2, &lf2).unwrap();
            prop_assert!((r1.rmse - r2.rmse).abs() < 1e-12 && (r1.mae - r2.mae).abs() < 1e-12);
        }
    }
}
