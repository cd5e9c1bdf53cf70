//! Metrics, K-fold cross-validation, the two-algorithms-per-partition
//! assignment plan, and grid search.

mod cv;
mod grid;
mod metrics;
mod plan;
mod report;
pub mod trainers;

pub use cv::{kfold_cv, kfold_indices, CvResult};
pub use grid::{grid_search, GridPoint, GridResult, ParamGrid, ParamSet};
pub use metrics::{auc_roc, confusion_and_accuracy, macro_prf, regression_metrics, Confusion, RegressionMetrics};
pub use plan::{
    build_assignment_plan, run_plan, AssignmentPlan, InstanceOutcome, PlanInstance, PlanOutcome,
    DEFAULT_ALGORITHMS, PLAN_FOLDS,
};
pub use report::{cv_rows, summary_table_csv, write_report_csv, EvalReport, ReportRow, REPORT_CSV_HEADER};
pub use trainers::{
    ConstantTrainer, GbtTrainer, LogisticTrainer, MlpTrainer, PegasosTrainer, Predictions, Predictor, Task, Trainer,
};
