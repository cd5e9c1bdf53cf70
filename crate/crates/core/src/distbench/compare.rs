use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::master::BenchRecord;
use crate::dataio::DenseDataset;
use crate::error::{Error, Result};
use crate::eval::{auc_roc, Predictions, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub algorithm: String,
    pub wall_clock_s: f64,
    pub auc_roc: f64,
    pub manifest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algorithm: String,
    pub mode: String,
    pub wall_clock_s: f64,
    pub auc_roc: Option<f64>,
    /// Local over distributed wall clock; 1.0 on local rows.
    pub speedup: Option<f64>,
    pub note: String,
}

const TREE_NOTE: &str = "tree ensembles have no parameter-averaging rule; local only";

fn is_tree(algorithm: &str) -> bool {
    let a = algorithm.to_ascii_lowercase();
    ["gbt", "xgb", "rf", "forest", "tree"].iter().any(|t| a.contains(t))
}

/// Trains each trainer on `train` and scores `holdout` with AUC.
pub fn local_benchmark(
    train: &DenseDataset,
    holdout: &DenseDataset,
    trainers: &[(&str, &dyn Trainer)],
    manifest: Option<&str>,
) -> Result<Vec<LocalResult>> {
    trainers
        .iter()
        .map(|(name, t)| {
            let start = Instant::now();
            let predictor = t.fit(train)?;
            let wall = start.elapsed().as_secs_f64();
            let scores = match predictor.predict(holdout)? {
                Predictions::Classes { scores, .. } => scores,
                Predictions::Values(v) => v,
            };
            Ok(LocalResult {
                algorithm: (*name).to_owned(),
                wall_clock_s: wall,
                auc_roc: auc_roc(holdout.labels(), &scores)?,
                manifest: manifest.map(str::to_owned),
            })
        })
        .collect()
}

/// Pairs local and distributed runs of the same algorithm.
pub fn bench_compare(local: &[LocalResult], distributed: &[BenchRecord]) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for d in distributed {
        let l = local
            .iter()
            .find(|l| l.algorithm == d.algorithm)
            .ok_or_else(|| Error::data(format!("no local run of {:?} to compare against", d.algorithm)))?;
        if let (Some(a), Some(b)) = (&l.manifest, &d.manifest) {
            if a != b {
                return Err(Error::data(format!("manifest mismatch for {}: {a:?} vs {b:?}", d.algorithm)));
            }
        }
    }
    for l in local {
        rows.push(ComparisonRow {
            algorithm: l.algorithm.clone(),
            mode: "local".into(),
            wall_clock_s: l.wall_clock_s,
            auc_roc: Some(l.auc_roc),
            speedup: Some(1.0),
            note: if is_tree(&l.algorithm) { TREE_NOTE.into() } else { String::new() },
        });
        for d in distributed.iter().filter(|d| d.algorithm == l.algorithm) {
            rows.push(ComparisonRow {
                algorithm: d.algorithm.clone(),
                mode: format!("distributed-{}", d.workers),
                wall_clock_s: d.wall_clock_s,
                auc_roc: d.holdout_auc,
                speedup: (d.wall_clock_s > 0.0).then(|| l.wall_clock_s / d.wall_clock_s),
                note: if d.completed { String::new() } else { "stopped early".into() },
            });
        }
    }
    Ok(rows)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("algorithm,mode,wall_clock_s,auc_roc,speedup,note\n");
    for r in rows {
        let auc = r.auc_roc.map(|a| format!("{a:.4}")).unwrap_or_default();
        let speedup = r.speedup.map(|x| format!("{x:.2}")).unwrap_or_default();
        writeln!(s, "{},{},{:.2},{auc},{speedup},{}", r.algorithm, r.mode, r.wall_clock_s, r.note).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local(algo: &str, wall: f64) -> LocalResult {
        LocalResult {
            algorithm: algo.into(),
            wall_clock_s: wall,
            auc_roc: 0.95036,
            manifest: Some("eps".into()),
        }
    }

    fn dist(algo: &str, wall: f64) -> BenchRecord {
        BenchRecord {
            algorithm: algo.into(),
            workers: 3,
            total_rows: 10,
            handshake_bytes_sent: 0,
            handshake_bytes_received: 0,
            rounds: vec![],
            wall_clock_s: wall,
            holdout_auc: Some(0.9402),
            manifest: Some("eps".into()),
            completed: true,
        }
    }

    #[test]
    fn speedups() {
        let rows = bench_compare(&[local("svm", 300.0)], &[dist("svm", 150.0)]).unwrap();
        assert_eq!(rows[1].speedup, Some(2.0));
        let rows = bench_compare(&[local("svm", 5.0)], &[dist("svm", 5.0)]).unwrap();
        assert_eq!(rows[1].speedup, Some(1.0));
    }

    #[test]
    fn four_decimal_auc() {
        let rows = bench_compare(&[local("svm", 136.57)], &[dist("svm", 100.0)]).unwrap();
        let csv = comparison_csv(&rows);
        assert!(csv.contains("svm,local,136.57,0.9504,1.00,"));
        assert!(csv.contains(",0.9402,"));
    }

    #[test]
    fn mismatches() {
        let mut d = dist("svm", 1.0);
        d.manifest = Some("other".into());
        assert!(bench_compare(&[local("svm", 1.0)], &[d]).is_err());
        assert!(bench_compare(&[local("logistic", 1.0)], &[dist("svm", 1.0)]).is_err());
    }

    #[test]
    fn trees_marked_local_only() {
        let rows = bench_compare(&[local("gbt", 1.0)], &[]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].note.contains("local only"));
    }
}
