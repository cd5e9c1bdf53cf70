use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use deskscale::artifact::ModelArtifact;
use deskscale::dataio::{load_manifest, DenseDataset};
use deskscale::eval::{
    build_assignment_plan, cv_rows, grid_search, kfold_cv, run_plan, summary_table_csv,
    write_report_csv, EvalReport, GbtTrainer, LogisticTrainer, MlpTrainer, ParamGrid, ParamSet,
    PegasosTrainer, Predictions, Task, Trainer,
};
use deskscale::gbt::{self, GbtConfig};
use deskscale::linmodels::{self, SgdConfig};
use deskscale::mlp::{self, write_curve_csv, MlpArchitecture, MlpTrainConfig};
use deskscale::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::write_effective;
use crate::{load_dense, parse_list, write_json, Common, Labels};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    /// Mini-batch logistic regression.
    #[value(alias = "lr")]
    Logreg,
    /// Pegasos linear SVM.
    Svm,
    /// Batch-normalized MLP.
    Mlp,
    /// Gradient-boosted trees.
    #[value(alias = "xgb")]
    Gbt,
}

impl Algo {
    pub fn label(self) -> &'static str {
        match self {
            Algo::Logreg => "LR",
            Algo::Svm => "SVM",
            Algo::Mlp => "MLP",
            Algo::Gbt => "XGB",
        }
    }
}

/// Hyperparameters; each algorithm reads the ones that apply to it.
#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModelArgs {
    /// L2 strength (logreg, svm).
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    /// Epochs [default: 10 for logreg/svm, 100 for mlp].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 32 for logreg/svm, 128 for mlp].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Step size [default: 0.1 for logreg, 1e-5 for mlp].
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    /// MLP drop probability.
    #[arg(long, default_value_t = 0.8)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 10)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value_t = 300)]
    pub num_round: usize,
    #[arg(long, default_value_t = 5.0)]
    pub min_child_weight: f64,
    /// Leaf-weight L2 for boosted trees.
    #[arg(long, default_value_t = 1.5)]
    pub tree_lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Boosted trees regress the labels instead of classifying.
    #[arg(long)]
    pub regression: bool,
}

fn whole(name: &str, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("{name} must be a non-negative integer, got {v}")))
    }
}

impl ModelArgs {
    pub fn sgd(&self, algo: Algo, seed: u64) -> SgdConfig {
        let d = SgdConfig::default();
        SgdConfig {
            lambda: self.lambda,
            epochs_or_iters: self.epochs.unwrap_or(d.epochs_or_iters),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            seed,
            project: algo == Algo::Svm,
            ..d
        }
    }

    pub fn mlp(&self, input_size: usize, seed: u64) -> (MlpArchitecture, MlpTrainConfig) {
        let arch = MlpArchitecture {
            input_size,
            hidden_size: self.hidden,
            num_hidden_blocks: self.blocks,
            output_size: 2,
            dropout_p: self.dropout,
        };
        let d = MlpTrainConfig::default();
        let cfg = MlpTrainConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            weight_decay: self.weight_decay,
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            seed,
            ..d
        };
        (arch, cfg)
    }

    pub fn gbt(&self, seed: u64) -> GbtConfig {
        GbtConfig {
            max_depth: self.max_depth,
            eta: self.eta,
            num_round: self.num_round,
            min_child_weight: self.min_child_weight,
            lambda: self.tree_lambda,
            gamma: self.gamma,
            seed,
        }
    }

    pub fn task(&self) -> Task {
        if self.regression {
            Task::Regression
        } else {
            Task::Classification
        }
    }

    pub fn trainer(&self, algo: Algo, seed: u64) -> Box<dyn Trainer> {
        match algo {
            Algo::Logreg => Box::new(LogisticTrainer(self.sgd(algo, seed))),
            Algo::Svm => Box::new(PegasosTrainer(self.sgd(algo, seed))),
            Algo::Mlp => {
                // The input size is taken from the training data at fit time.
                let (arch, config) = self.mlp(1, seed);
                Box::new(MlpTrainer { arch, config })
            }
            Algo::Gbt => Box::new(GbtTrainer {
                config: self.gbt(seed),
                task: self.task(),
            }),
        }
    }

    /// Overrides one hyperparameter by name, as used in grid files.
    pub fn set(&mut self, algo: Algo, name: &str, v: f64) -> Result<()> {
        match name {
            "lambda" if algo == Algo::Gbt => self.tree_lambda = v,
            "lambda" => self.lambda = v,
            "tree_lambda" => self.tree_lambda = v,
            "epochs" => self.epochs = Some(whole(name, v)?),
            "batch_size" => self.batch_size = Some(whole(name, v)?),
            "learning_rate" => self.learning_rate = Some(v),
            "hidden" | "hidden_size" => self.hidden = whole(name, v)?,
            "blocks" | "num_hidden_blocks" => self.blocks = whole(name, v)?,
            "dropout" | "dropout_p" => self.dropout = v,
            "weight_decay" => self.weight_decay = v,
            "max_depth" => self.max_depth = whole(name, v)?,
            "eta" => self.eta = v,
            "num_round" => self.num_round = whole(name, v)?,
            "min_child_weight" => self.min_child_weight = v,
            "gamma" => self.gamma = v,
            _ => return Err(Error::Config(format!("unknown hyperparameter {name:?}"))),
        }
        Ok(())
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Dense training file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "zero-one")]
    pub labels: Labels,
    /// Dense file to score; the training data is scored when omitted.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

type Scorer = Box<dyn Fn(&DenseDataset) -> Result<Predictions>>;

pub fn train(a: &TrainArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let ds = load_dense(&a.data, a.labels)?;
    let eval_ds = match &a.holdout {
        Some(p) => load_dense(p, a.labels)?,
        None => ds.clone(),
    };
    let seed = a.common.seed;
    let start = Instant::now();
    let (artifact, predict): (ModelArtifact, Scorer) = match a.algo {
        Algo::Logreg | Algo::Svm => {
            let mut cfg = a.model.sgd(a.algo, seed);
            let model = if a.algo == Algo::Svm {
                cfg.epochs_or_iters *= ds.len();
                linmodels::train_pegasos(&ds, &cfg)?
            } else {
                linmodels::train_logistic(&ds, &cfg)?
            };
            let art = ModelArtifact::from_linear(&model, serde_json::to_value(&cfg)?, seed);
            (
                art,
                Box::new(move |d: &DenseDataset| {
                    Ok(Predictions::Classes {
                        scores: linmodels::decision_scores(&model, d)?,
                        labels: linmodels::predict_labels(&model, d)?,
                    })
                }),
            )
        }
        Algo::Mlp => {
            let (arch, cfg) = a.model.mlp(ds.num_features(), seed);
            let (model, curve) = mlp::train(&ds, &arch, &cfg)?;
            write_curve_csv(&curve, BufWriter::new(File::create(a.out.join("curve.csv"))?))?;
            let art = ModelArtifact::from_mlp(&model, json!({ "architecture": arch, "train": cfg }), seed);
            (
                art,
                Box::new(move |d: &DenseDataset| {
                    let scores = model.positive_probabilities(d)?;
                    let labels = scores.iter().map(|&p| u32::from(p > 0.5)).collect();
                    Ok(Predictions::Classes { scores, labels })
                }),
            )
        }
        Algo::Gbt => {
            let cfg = a.model.gbt(seed);
            if !a.model.regression {
                ds.require_binary()?;
            }
            let model = gbt::fit(ds.features().view(), ds.labels(), &cfg)?;
            let art = ModelArtifact::from_gbt(&model, serde_json::to_value(&cfg)?, seed);
            let classify = !a.model.regression;
            (
                art,
                Box::new(move |d: &DenseDataset| {
                    let values = model.predict(d.features().view())?;
                    Ok(if classify {
                        let labels = values.iter().map(|&v| u32::from(v > 0.5)).collect();
                        Predictions::Classes { scores: values, labels }
                    } else {
                        Predictions::Values(values)
                    })
                }),
            )
        }
    };
    let wall = start.elapsed().as_secs_f64();
    artifact.write(&a.out.join("model.json"))?;
    let report = EvalReport::evaluate(eval_ds.labels(), &predict(&eval_ds)?, wall)?;
    write_json(&a.out.join("train-report.json"), &report)?;
    write_effective(&a.out, a)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "zero-one")]
    pub labels: Labels,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct CvReport<'a> {
    algo: Algo,
    k: usize,
    folds: &'a [EvalReport],
    mean: &'a EvalReport,
}

pub fn cv(a: &CvArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let ds = load_dense(&a.data, a.labels)?;
    let trainer = a.model.trainer(a.algo, a.common.seed);
    let res = kfold_cv(&ds, a.k, trainer.as_ref(), a.common.seed)?;
    write_json(
        &a.out.join("cv-report.json"),
        &CvReport {
            algo: a.algo,
            k: a.k,
            folds: &res.folds,
            mean: &res.mean,
        },
    )?;
    let rows = cv_rows("cv", a.algo.label(), &res);
    write_report_csv(&rows, BufWriter::new(File::create(a.out.join("cv-report.csv"))?))?;
    write_effective(&a.out, a)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PlanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Partitions; the plan has one per instance.
    #[arg(long, default_value_t = 5)]
    pub partitions: usize,
    /// Labels for the logistic, forest, MLP, boosted-tree and SVM roles.
    #[arg(long, default_value = "LR,RF,MLP,XGB,SVM")]
    pub algorithms: String,
    /// Split manifest; when given, every instance is also run with 5-fold CV.
    /// The forest role has no trainer and is reported as unbound.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn plan(a: &PlanArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let labels = parse_list(&a.algorithms);
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let partitions: Vec<usize> = (0..a.partitions).collect();
    let plan = build_assignment_plan(&refs, &partitions)?;
    write_json(&a.out.join("plan.json"), &plan)?;
    for inst in &plan.instances {
        sayln!("{}\t{}\t{}\tpartition {}", inst.id, inst.algorithms.0, inst.algorithms.1, inst.partition);
    }
    if let Some(path) = &a.manifest {
        let (_, parts) = load_manifest(path)?;
        if parts.len() < a.partitions {
            return Err(Error::InvalidData(format!(
                "manifest has {} parts, plan needs {}",
                parts.len(),
                a.partitions
            )));
        }
        let roles = [Some(Algo::Logreg), None, Some(Algo::Mlp), Some(Algo::Gbt), Some(Algo::Svm)];
        let trainers: BTreeMap<String, Box<dyn Trainer>> = roles
            .iter()
            .zip(&labels)
            .filter_map(|(r, l)| r.map(|algo| (l.clone(), a.model.trainer(algo, a.common.seed))))
            .collect();
        let outcome = run_plan(&plan, &parts, &trainers, a.common.seed)?;
        write_json(&a.out.join("plan-report.json"), &outcome)?;
        let rows: Vec<_> = outcome
            .instances
            .iter()
            .flat_map(|o| cv_rows(&o.instance, &o.algorithm, &o.cv))
            .collect();
        write_report_csv(&rows, BufWriter::new(File::create(a.out.join("plan-report.csv"))?))?;
        // Table order follows the role order, not the alphabet.
        let table: Vec<(String, EvalReport)> = labels
            .iter()
            .filter_map(|l| outcome.per_algorithm.get(l).map(|r| (l.clone(), r.clone())))
            .collect();
        summary_table_csv(&table, BufWriter::new(File::create(a.out.join("summary-table.csv"))?))?;
    }
    write_effective(&a.out, a)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GridArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "gbt")]
    pub algo: Algo,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "zero-one")]
    pub labels: Labels,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// JSON object mapping hyperparameter names to value lists.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn default_grid(algo: Algo) -> ParamGrid {
    let g: &[(&str, &[f64])] = match algo {
        Algo::Logreg | Algo::Svm => &[("lambda", &[1e-5, 1e-4, 1e-3])],
        Algo::Mlp => &[("learning_rate", &[1e-4, 1e-3])],
        Algo::Gbt => &[("max_depth", &[3.0, 6.0]), ("eta", &[0.05, 0.1]), ("num_round", &[50.0, 100.0])],
    };
    g.iter().map(|(k, v)| ((*k).to_owned(), v.to_vec())).collect()
}

pub fn gridsearch(a: &GridArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let grid: ParamGrid = match &a.grid {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)
            .map_err(|e| Error::Config(format!("grid file {}: {e}", p.display())))?,
        None => default_grid(a.algo),
    };
    let ds = load_dense(&a.data, a.labels)?;
    let factory = |params: &ParamSet| -> Result<Box<dyn Trainer>> {
        let mut m = a.model.clone();
        for (name, &v) in params {
            m.set(a.algo, name, v)?;
        }
        Ok(m.trainer(a.algo, a.common.seed))
    };
    let res = grid_search(&grid, a.k, &ds, &factory, a.common.seed)?;
    write_json(&a.out.join("grid-results.json"), &res)?;
    write_json(&a.out.join("best-params.json"), &res.best)?;
    let names: Vec<&String> = grid.keys().collect();
    let mut csv = names.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(",");
    csv.push_str(",score\n");
    for p in &res.results {
        let vals: Vec<String> = names.iter().map(|n| p.params[*n].to_string()).collect();
        csv.push_str(&format!("{},{}\n", vals.join(","), p.score));
    }
    fs::write(a.out.join("grid-results.csv"), csv)?;
    sayln!("best {:?} score {}", res.best, res.best_score);
    write_effective(&a.out, a)
}
