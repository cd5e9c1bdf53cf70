//! The model-fitting interface used by cross-validation, the assignment plan
//! and grid search, with adapters for every learner in the crate.

use serde::{Deserialize, Serialize};

use crate::dataio::DenseDataset;
use crate::error::{Error, Result};
use crate::gbt::{self, GbtConfig, GbtModel};
use crate::linmodels::{self, LinearModel, SgdConfig};
use crate::mlp::{self, MlpArchitecture, MlpModel, MlpTrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    /// Ranking scores (higher = more positive) and hard labels.
    Classes { scores: Vec<f64>, labels: Vec<u32> },
    Values(Vec<f64>),
}

pub trait Predictor: Send + Sync {
    fn predict(&self, ds: &DenseDataset) -> Result<Predictions>;
}

pub trait Trainer: Send + Sync {
    fn task(&self) -> Task;
    fn fit(&self, train: &DenseDataset) -> Result<Box<dyn Predictor>>;
}

struct LinearPredictor(LinearModel);

impl Predictor for LinearPredictor {
    fn predict(&self, ds: &DenseDataset) -> Result<Predictions> {
        Ok(Predictions::Classes {
            scores: linmodels::decision_scores(&self.0, ds)?,
            labels: linmodels::predict_labels(&self.0, ds)?,
        })
    }
}

pub struct LogisticTrainer(pub SgdConfig);

impl Trainer for LogisticTrainer {
    fn task(&self) -> Task {
        Task::Classification
    }

    fn fit(&self, train: &DenseDataset) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(LinearPredictor(linmodels::train_logistic(train, &self.0)?)))
    }
}

/// Pegasos SVM; `epochs_or_iters` counts epochs here and is scaled by the
/// training-set size.
pub struct PegasosTrainer(pub SgdConfig);

impl Trainer for PegasosTrainer {
    fn task(&self) -> Task {
        Task::Classification
    }

    fn fit(&self, train: &DenseDataset) -> Result<Box<dyn Predictor>> {
        let cfg = SgdConfig {
            epochs_or_iters: self.0.epochs_or_iters * train.len(),
            ..self.0.clone()
        };
        Ok(Box::new(LinearPredictor(linmodels::train_pegasos(train, &cfg)?)))
    }
}

struct MlpPredictor(MlpModel);

impl Predictor for MlpPredictor {
    fn predict(&self, ds: &DenseDataset) -> Result<Predictions> {
        let scores = self.0.positive_probabilities(ds)?;
        let labels = scores.iter().map(|&p| u32::from(p > 0.5)).collect();
        Ok(Predictions::Classes { scores, labels })
    }
}

pub struct MlpTrainer {
    pub arch: MlpArchitecture,
    pub config: MlpTrainConfig,
}

impl Trainer for MlpTrainer {
    fn task(&self) -> Task {
        Task::Classification
    }

    fn fit(&self, train: &DenseDataset) -> Result<Box<dyn Predictor>> {
        let arch = MlpArchitecture {
            input_size: train.num_features(),
            ..self.arch.clone()
        };
        let (model, _) = mlp::train(train, &arch, &self.config)?;
        Ok(Box::new(MlpPredictor(model)))
    }
}

struct GbtPredictor {
    model: GbtModel,
    classify: bool,
}

impl Predictor for GbtPredictor {
    fn predict(&self, ds: &DenseDataset) -> Result<Predictions> {
        let values = self.model.predict(ds.features().view())?;
        Ok(if self.classify {
            let labels = values.iter().map(|&v| u32::from(v > 0.5)).collect();
            Predictions::Classes { scores: values, labels }
        } else {
            Predictions::Values(values)
        })
    }
}

/// Boosted trees on the dataset labels. As a classifier it regresses the 0/1
/// labels and thresholds at 0.5.
pub struct GbtTrainer {
    pub config: GbtConfig,
    pub task: Task,
}

impl Trainer for GbtTrainer {
    fn task(&self) -> Task {
        self.task
    }

    fn fit(&self, train: &DenseDataset) -> Result<Box<dyn Predictor>> {
        if self.task == Task::Classification {
            train.require_binary()?;
        }
        Ok(Box::new(GbtPredictor {
            model: gbt::fit(train.features().view(), train.labels(), &self.config)?,
            classify: self.task == Task::Classification,
        }))
    }
}

struct ConstantPredictor {
    value: f64,
    task: Task,
}

impl Predictor for ConstantPredictor {
    fn predict(&self, ds: &DenseDataset) -> Result<Predictions> {
        Ok(match self.task {
            Task::Classification => Predictions::Classes {
                scores: vec![self.value; ds.len()],
                labels: vec![u32::from(self.value > 0.5); ds.len()],
            },
            Task::Regression => Predictions::Values(vec![self.value; ds.len()]),
        })
    }
}

/// Predicts the training label mean for every row.
pub struct ConstantTrainer(pub Task);

impl Trainer for ConstantTrainer {
    fn task(&self) -> Task {
        self.0
    }

    fn fit(&self, train: &DenseDataset) -> Result<Box<dyn Predictor>> {
        if train.is_empty() {
            return Err(Error::data("empty training set"));
        }
        let value = train.labels().iter().sum::<f64>() / train.len() as f64;
        Ok(Box::new(ConstantPredictor { value, task: self.0 }))
    }
}
