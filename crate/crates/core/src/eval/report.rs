use std::io::Write;

use serde::{Deserialize, Serialize};

use super::cv::CvResult;
use super::metrics::{self, Confusion};
use super::trainers::Predictions;
use crate::error::Result;

/// Metric bundle for one fold, one averaged run, or one grid point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: Option<f64>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
    pub auc_roc: Option<f64>,
    /// `[actual][predicted]`.
    pub confusion: Option<Confusion>,
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub r2: Option<f64>,
    pub wall_clock_s: f64,
    /// Rows evaluated.
    pub rows: usize,
}

impl EvalReport {
    /// Scores `predictions` against the true labels or targets.
    pub fn evaluate(truth: &[f64], predictions: &Predictions, wall_clock_s: f64) -> Result<Self> {
        let mut report = EvalReport {
            wall_clock_s,
            rows: truth.len(),
            ..EvalReport::default()
        };
        match predictions {
            Predictions::Classes { scores, labels } => {
                let truth_labels: Vec<u32> = truth.iter().map(|&y| u32::from(y == 1.0)).collect();
                let (confusion, accuracy) = metrics::confusion_and_accuracy(&truth_labels, labels)?;
                let (p, r, f) = metrics::macro_prf(&truth_labels, labels, 2)?;
                report.accuracy = Some(accuracy);
                report.confusion = Some(confusion);
                report.macro_precision = Some(p);
                report.macro_recall = Some(r);
                report.macro_f1 = Some(f);
                // undefined when the fold holds one class only
                report.auc_roc = metrics::auc_roc(truth, scores).ok();
            }
            Predictions::Values(values) => {
                let m = metrics::regression_metrics(truth, values)?;
                report.rmse = Some(m.rmse);
                report.mae = Some(m.mae);
                report.r2 = m.r2;
            }
        }
        Ok(report)
    }

    /// Unweighted mean of each metric over the reports that carry it;
    /// confusion matrices, rows and wall clock are summed.
    pub fn average(reports: &[EvalReport]) -> EvalReport {
        fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
            let present: Vec<f64> = values.flatten().collect();
            (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
        }
        let confusion = reports.iter().filter_map(|r| r.confusion).reduce(|mut acc, c| {
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += c[i][j];
                }
            }
            acc
        });
        EvalReport {
            accuracy: mean(reports.iter().map(|r| r.accuracy)),
            macro_precision: mean(reports.iter().map(|r| r.macro_precision)),
            macro_recall: mean(reports.iter().map(|r| r.macro_recall)),
            macro_f1: mean(reports.iter().map(|r| r.macro_f1)),
            auc_roc: mean(reports.iter().map(|r| r.auc_roc)),
            confusion,
            rmse: mean(reports.iter().map(|r| r.rmse)),
            mae: mean(reports.iter().map(|r| r.mae)),
            r2: mean(reports.iter().map(|r| r.r2)),
            wall_clock_s: reports.iter().map(|r| r.wall_clock_s).sum(),
            rows: reports.iter().map(|r| r.rows).sum(),
        }
    }
}

pub const REPORT_CSV_HEADER: &str = "run_id,algo,fold,accuracy,macro_f1,auc_roc,rmse,mae,r2,wall_clock_s";

/// One line of the flat report CSV.
#[derive(Debug, Clone)]
pub struct ReportRow<'a> {
    pub run_id: String,
    pub algo: String,
    /// Fold index, `mean`, or a grid-point label.
    pub fold: String,
    pub report: &'a EvalReport,
}

/// Per-fold rows followed by a `mean` row.
pub fn cv_rows<'a>(run_id: &str, algo: &str, cv: &'a CvResult) -> Vec<ReportRow<'a>> {
    cv.folds
        .iter()
        .enumerate()
        .map(|(i, r)| (i.to_string(), r))
        .chain(std::iter::once(("mean".to_owned(), &cv.mean)))
        .map(|(fold, report)| ReportRow {
            run_id: run_id.to_owned(),
            algo: algo.to_owned(),
            fold,
            report,
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_report_csv<W: Write>(rows: &[ReportRow<'_>], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(REPORT_CSV_HEADER.split(','))?;
    for row in rows {
        let r = row.report;
        csv.write_record([
            row.run_id.clone(),
            row.algo.clone(),
            row.fold.clone(),
            opt(r.accuracy),
            opt(r.macro_f1),
            opt(r.auc_roc),
            opt(r.rmse),
            opt(r.mae),
            opt(r.r2),
            r.wall_clock_s.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// One row per model: accuracy, macro F1 and AUC as percentages with two
/// decimals, plus training time in seconds.
pub fn summary_table_csv<W: Write>(entries: &[(String, EvalReport)], out: W) -> Result<()> {
    let pct = |v: Option<f64>| v.map(|x| format!("{:.2}", 100.0 * x)).unwrap_or_default();
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["Model", "Average Accuracy (%)", "Macro F1-Score (%)", "AUC-ROC (%)", "Training Time (s)"])?;
    for (name, r) in entries {
        csv.write_record([
            name.clone(),
            pct(r.accuracy),
            pct(r.macro_f1),
            pct(r.auc_roc),
            format!("{:.2}", r.wall_clock_s),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_means_and_sums() {
        let a = EvalReport {
            accuracy: Some(0.5),
            auc_roc: None,
            confusion: Some([[1, 1], [1, 1]]),
            wall_clock_s: 1.0,
            rows: 4,
            ..EvalReport::default()
        };
        let b = EvalReport {
            accuracy: Some(1.0),
            auc_roc: Some(0.75),
            confusion: Some([[2, 0], [0, 2]]),
            wall_clock_s: 2.0,
            rows: 4,
            ..EvalReport::default()
        };
        let avg = EvalReport::average(&[a, b]);
        assert_eq!(avg.accuracy, Some(0.75));
        assert_eq!(avg.auc_roc, Some(0.75));
        assert_eq!(avg.confusion, Some([[3, 1], [1, 3]]));
        assert_eq!(avg.wall_clock_s, 3.0);
        assert_eq!(avg.rmse, None);
        let total: u64 = avg.confusion.unwrap().iter().flatten().sum();
        assert_eq!(total as usize, avg.rows);
    }

    #[test]
    fn csv_header_and_blanks() {
        let r = EvalReport {
            rmse: Some(0.5),
            wall_clock_s: 0.25,
            ..EvalReport::default()
        };
        let rows = vec![ReportRow {
            run_id: "r1".into(),
            algo: "gbt".into(),
            fold: "0".into(),
            report: &r,
        }];
        let mut buf = Vec::new();
        write_report_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("{REPORT_CSV_HEADER}\nr1,gbt,0,,,,0.5,,,0.25\n"));
    }

    #[test]
    fn summary_percentages() {
        let r = EvalReport {
            accuracy: Some(0.8918),
            macro_f1: Some(0.8918),
            auc_roc: Some(0.93),
            wall_clock_s: 503.234,
            ..EvalReport::default()
        };
        let mut buf = Vec::new();
        summary_table_csv(&[("MLP".into(), r)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("MLP,89.18,89.18,93.00,503.23\n"), "{text}");
    }
}
