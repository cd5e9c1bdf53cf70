use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, ValueEnum};
use deskscale::artifact::ModelArtifact;
use deskscale::dataio::{load_manifest, DenseDataset};
use deskscale::distbench::{
    bench_compare, comparison_csv, local_benchmark, run_worker_file, Algo as WireAlgo, BenchRecord,
    ClusterSpec, ComparisonRow, LocalResult, Master, MasterConfig, WorkerOptions,
};
use deskscale::eval::{cv_rows, kfold_cv, kfold_indices, summary_table_csv, write_report_csv, CvResult, EvalReport};
use deskscale::{seed, Error, Result};
use serde::Serialize;

use crate::config::write_effective;
use crate::models::{Algo, ModelArgs};
use crate::{install_interrupt, load_dense, parse_list, stopped, write_json, Common, Labels, STOP};

fn bench_name(algo: Algo) -> &'static str {
    match algo {
        Algo::Logreg => WireAlgo::Logistic.name(),
        Algo::Svm => WireAlgo::Svm.name(),
        Algo::Mlp => "mlp",
        Algo::Gbt => "gbt",
    }
}

fn parse_algo(name: &str) -> Result<Algo> {
    Algo::from_str(name, true).map_err(|_| Error::Config(format!("unknown algorithm {name:?}")))
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct LocalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Dense data file.
    #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
    pub data: Option<PathBuf>,
    /// Split manifest; all parts are pooled.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "zero-one")]
    pub labels: Labels,
    /// Comma-separated algorithms.
    #[arg(long, default_value = "logreg,svm,mlp")]
    pub algos: String,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Holdout file for the AUC column; otherwise 1/holdout-folds of the data
    /// is held out.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub holdout_folds: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct LocalSummary<'a> {
    completed: bool,
    cv: Vec<(&'a str, &'a CvResult)>,
    holdout: &'a [LocalResult],
}

fn interrupted() -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::Interrupted,
        "interrupted; partial results written",
    ))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn local(a: &LocalArgs) -> Result<()> {
    install_interrupt();
    fs::create_dir_all(&a.out)?;
    let algos = parse_list(&a.algos).iter().map(|s| parse_algo(s)).collect::<Result<Vec<_>>>()?;
    let (ds, manifest) = match (&a.data, &a.manifest) {
        (Some(p), _) => (load_dense(p, a.labels)?, stem(p)),
        (None, Some(m)) => {
            let (man, parts) = load_manifest(m)?;
            (DenseDataset::concat(&parts)?, man.name)
        }
        (None, None) => return Err(Error::Config("--data or --manifest is required".into())),
    };
    let (train, holdout) = match &a.holdout {
        Some(p) => (ds, load_dense(p, a.labels)?),
        None => {
            let folds = kfold_indices(ds.len(), a.holdout_folds, seed::derive(a.common.seed, 13, 0))?;
            let rest: Vec<usize> = folds[1..].iter().flatten().copied().collect();
            (ds.select(&rest), ds.select(&folds[0]))
        }
    };

    let mut cvs: Vec<(Algo, CvResult)> = Vec::new();
    let mut results = Vec::new();
    for &algo in &algos {
        if stopped() {
            break;
        }
        let trainer = a.model.trainer(algo, a.common.seed);
        log::info!("cross-validating {}", bench_name(algo));
        let cv = kfold_cv(&train, a.k, trainer.as_ref(), a.common.seed)?;
        cvs.push((algo, cv));
        if stopped() {
            break;
        }
        results.extend(local_benchmark(&train, &holdout, &[(bench_name(algo), trainer.as_ref())], Some(&manifest))?);
    }

    let table: Vec<(String, EvalReport)> = cvs.iter().map(|(a, cv)| (a.label().to_owned(), cv.mean.clone())).collect();
    summary_table_csv(&table, BufWriter::new(File::create(a.out.join("summary-table.csv"))?))?;
    let rows: Vec<_> = cvs.iter().flat_map(|(al, cv)| cv_rows("bench-local", al.label(), cv)).collect();
    write_report_csv(&rows, BufWriter::new(File::create(a.out.join("cv-report.csv"))?))?;
    write_json(&a.out.join("local-results.json"), &results)?;
    write_json(
        &a.out.join("bench-local.json"),
        &LocalSummary {
            completed: !stopped(),
            cv: cvs.iter().map(|(al, cv)| (bench_name(*al), cv)).collect(),
            holdout: &results,
        },
    )?;
    write_effective(&a.out, a)?;
    if stopped() {
        return Err(interrupted());
    }
    Ok(())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistAlgo {
    #[value(alias = "logreg")]
    Logistic,
    Svm,
}

impl From<DistAlgo> for WireAlgo {
    fn from(a: DistAlgo) -> Self {
        match a {
            DistAlgo::Logistic => WireAlgo::Logistic,
            DistAlgo::Svm => WireAlgo::Svm,
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MasterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value = "0.0.0.0:7077")]
    pub listen: String,
    /// Worker count; ids are 0..workers.
    #[arg(long, default_value_t = 3)]
    pub workers: u32,
    /// Cluster JSON (master_address, workers, timeouts); replaces --listen and
    /// --workers.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "logistic")]
    pub algo: DistAlgo,
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 60.0)]
    pub round_timeout: f64,
    #[arg(long, default_value_t = 60.0)]
    pub accept_timeout: f64,
    /// Dense holdout scored after every run.
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "zero-one")]
    pub labels: Labels,
    /// Name recorded with the run and checked against local results.
    #[arg(long)]
    pub manifest_name: Option<String>,
    /// Full training data for a single-node baseline with the same settings.
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    /// local-results.json from bench-local, used instead of --train-data.
    #[arg(long)]
    pub local: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn distributed_only(records: &[BenchRecord]) -> Vec<ComparisonRow> {
    records
        .iter()
        .map(|d| ComparisonRow {
            algorithm: d.algorithm.clone(),
            mode: format!("distributed-{}", d.workers),
            wall_clock_s: d.wall_clock_s,
            auc_roc: d.holdout_auc,
            speedup: None,
            note: if d.completed { "no local baseline" } else { "stopped early" }.into(),
        })
        .collect()
}

pub fn master(a: &MasterArgs) -> Result<()> {
    install_interrupt();
    fs::create_dir_all(&a.out)?;
    let mut spec = match &a.spec {
        Some(p) => read_json::<ClusterSpec>(p).map_err(|e| Error::Config(format!("cluster spec {}: {e}", p.display())))?,
        None => ClusterSpec::local(&a.listen, a.workers),
    };
    if a.spec.is_none() {
        spec.round_timeout_s = a.round_timeout;
        spec.accept_timeout_s = a.accept_timeout;
    }
    spec.max_rounds = spec.max_rounds.max(a.rounds);
    let holdout = a.holdout.as_deref().map(|p| load_dense(p, a.labels)).transpose()?;
    let master = Master::bind(spec)?;
    sayln!("listening on {}", master.local_addr()?);
    let cfg = MasterConfig {
        algo: a.algo.into(),
        rounds: a.rounds,
        seed: a.common.seed,
        lambda: a.lambda,
        learning_rate: a.learning_rate,
    };
    let (model, mut record) = master.run_until(&cfg, holdout.as_ref(), Some(&STOP))?;
    record.manifest = a.manifest_name.clone();
    write_json(&a.out.join("bench-record.json"), &record)?;
    ModelArtifact::from_linear(&model, serde_json::to_value(&cfg)?, a.common.seed).write(&a.out.join("model.json"))?;

    let local = match (&a.local, &a.train_data, &holdout) {
        (Some(p), _, _) => Some(read_json::<Vec<LocalResult>>(p)?),
        (None, Some(p), Some(h)) if !stopped() => {
            let train = load_dense(p, a.labels)?;
            let algo = match a.algo {
                DistAlgo::Logistic => Algo::Logreg,
                DistAlgo::Svm => Algo::Svm,
            };
            let model_args = ModelArgs {
                lambda: a.lambda,
                epochs: Some(a.rounds),
                learning_rate: Some(a.learning_rate),
                ..local_defaults()
            };
            let trainer = model_args.trainer(algo, a.common.seed);
            Some(local_benchmark(&train, h, &[(bench_name(algo), trainer.as_ref())], a.manifest_name.as_deref())?)
        }
        (None, Some(_), None) => return Err(Error::Config("--train-data needs --holdout".into())),
        _ => None,
    };
    let rows = match &local {
        Some(l) => {
            let l: Vec<LocalResult> = l.iter().filter(|r| r.algorithm == record.algorithm).cloned().collect();
            write_json(&a.out.join("local-results.json"), &l)?;
            bench_compare(&l, std::slice::from_ref(&record))?
        }
        None => distributed_only(std::slice::from_ref(&record)),
    };
    fs::write(a.out.join("comparison.csv"), comparison_csv(&rows))?;
    say!("{}", comparison_csv(&rows));
    write_effective(&a.out, a)?;
    if !record.completed {
        return Err(interrupted());
    }
    Ok(())
}

/// Flag defaults of [`ModelArgs`], for building one outside clap.
fn local_defaults() -> ModelArgs {
    use clap::FromArgMatches;
    let cmd = <ModelArgs as clap::Args>::augment_args(clap::Command::new("defaults"));
    ModelArgs::from_arg_matches(&cmd.get_matches_from(["defaults"])).expect("defaults parse")
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct WorkerArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value = "127.0.0.1:7077")]
    pub connect: String,
    /// This worker's dense part file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "zero-one")]
    pub labels: Labels,
    #[arg(long, default_value_t = 0)]
    pub worker_id: u32,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 40)]
    pub connect_attempts: u32,
    #[arg(long, default_value_t = 250)]
    pub retry_delay_ms: u64,
    /// Per-read timeout once connected.
    #[arg(long)]
    pub io_timeout: Option<f64>,
    /// Defaults to out/worker-<id>.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct WorkerReport {
    worker_id: u32,
    rounds_completed: usize,
}

pub fn worker(a: &WorkerArgs) -> Result<()> {
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("out/worker-{}", a.worker_id)));
    fs::create_dir_all(&out)?;
    let mut opts = WorkerOptions::new(a.worker_id);
    opts.batch_size = a.batch_size;
    opts.connect_attempts = a.connect_attempts;
    opts.retry_delay = Duration::from_millis(a.retry_delay_ms);
    opts.io_timeout = a.io_timeout.map(Duration::from_secs_f64);
    let summary = run_worker_file(&a.connect, &a.data, a.labels.into(), &opts)?;
    write_json(
        &out.join("worker-report.json"),
        &WorkerReport {
            worker_id: a.worker_id,
            rounds_completed: summary.rounds_completed,
        },
    )?;
    let resolved = WorkerArgs {
        out: Some(out.clone()),
        ..a.clone()
    };
    write_effective(&out, &resolved)
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ReportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// local-results.json from bench-local or bench-master.
    #[arg(long)]
    pub local: PathBuf,
    /// bench-record.json files, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub distributed: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn report(a: &ReportArgs) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let local: Vec<LocalResult> = read_json(&a.local)?;
    let records = a.distributed.iter().map(|p| read_json(p)).collect::<Result<Vec<BenchRecord>>>()?;
    let rows = bench_compare(&local, &records)?;
    fs::write(a.out.join("comparison.csv"), comparison_csv(&rows))?;
    write_json(&a.out.join("comparison.json"), &rows)?;
    say!("{}", comparison_csv(&rows));
    write_effective(&a.out, a)
}
