/// `print!`/`println!` that tolerate a closed stdout.
macro_rules! say {
    ($($t:tt)*) => { $crate::emit(&format!($($t)*)) };
}
macro_rules! sayln {
    ($($t:tt)*) => { $crate::emit(&(format!($($t)*) + "\n")) };
}

mod bench;
mod config;
mod data;
mod models;
mod text;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use deskscale::dataio::{read_dense_file, sniff_num_features, DenseDataset, LabelMap};
use deskscale::{Error, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "deskscale", version, about = "Desk-scale learning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (dense, movies, or reviews).
    Gen(data::GenArgs),
    /// Shuffle a dense file into parts plus a manifest.
    Split(data::SplitArgs),
    /// Fit one model and write its artifact.
    Train(models::TrainArgs),
    /// k-fold cross-validation of one algorithm.
    Cv(models::CvArgs),
    /// Emit (and optionally run) the five-instance algorithm assignment plan.
    Plan(models::PlanArgs),
    /// Exhaustive k-fold grid search.
    Gridsearch(models::GridArgs),
    /// Movie-rating pipeline: clean, impute, TF-IDF, boosted trees.
    Pipeline(text::PipelineArgs),
    /// Review balancing: SPAM filter, ring undersampling, augmentation.
    Balance(text::BalanceArgs),
    /// Single-node benchmark of the binary classifiers.
    BenchLocal(bench::LocalArgs),
    /// Coordinate distributed linear training over TCP.
    BenchMaster(bench::MasterArgs),
    /// Train on one part file for a bench-master.
    BenchWorker(bench::WorkerArgs),
    /// Join local and distributed results into a comparison table.
    Report(bench::ReportArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// JSON file of flag values; flags on the command line win.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<std::path::PathBuf>,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// More logging (repeatable).
    #[arg(short, long, action = ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Labels {
    ZeroOne,
    PlusMinusOne,
    Continuous,
}

impl From<Labels> for LabelMap {
    fn from(l: Labels) -> Self {
        match l {
            Labels::ZeroOne => LabelMap::ZeroOne,
            Labels::PlusMinusOne => LabelMap::PlusMinusOne,
            Labels::Continuous => LabelMap::Continuous,
        }
    }
}

pub static STOP: AtomicBool = AtomicBool::new(false);

/// First interrupt asks long runs to stop and flush; a second one exits.
pub fn install_interrupt() {
    let res = ctrlc::set_handler(|| {
        if STOP.swap(true, Ordering::SeqCst) {
            std::process::exit(130);
        }
        eprintln!("interrupt: finishing the current step and writing partial results");
    });
    if let Err(e) = res {
        log::warn!("cannot install interrupt handler: {e}");
    }
}

pub fn stopped() -> bool {
    STOP.load(Ordering::SeqCst)
}

pub fn load_dense(path: &Path, labels: Labels) -> Result<DenseDataset> {
    if !path.is_file() {
        return Err(Error::InvalidData(format!("data file {} not found", path.display())));
    }
    let n = sniff_num_features(path)?;
    read_dense_file(path, n, labels.into())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes to stdout; a closed pipe is not an error for a report echo.
pub fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

pub fn parse_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// 1: usage or configuration, 2: bad input data, 3: protocol or runtime.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Parse { .. } | Error::InvalidData(_) | Error::Dimension { .. } | Error::Json(_) => 2,
        Error::Protocol(_) | Error::Timeout(_) | Error::Io(_) => 3,
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Gen(a) => &a.common,
            Command::Split(a) => &a.common,
            Command::Train(a) => &a.common,
            Command::Cv(a) => &a.common,
            Command::Plan(a) => &a.common,
            Command::Gridsearch(a) => &a.common,
            Command::Pipeline(a) => &a.common,
            Command::Balance(a) => &a.common,
            Command::BenchLocal(a) => &a.common,
            Command::BenchMaster(a) => &a.common,
            Command::BenchWorker(a) => &a.common,
            Command::Report(a) => &a.common,
        }
    }

    fn run(&self) -> Result<()> {
        match self {
            Command::Gen(a) => data::gen(a),
            Command::Split(a) => data::split(a),
            Command::Train(a) => models::train(a),
            Command::Cv(a) => models::cv(a),
            Command::Plan(a) => models::plan(a),
            Command::Gridsearch(a) => models::gridsearch(a),
            Command::Pipeline(a) => text::pipeline(a),
            Command::Balance(a) => text::balance(a),
            Command::BenchLocal(a) => bench::local(a),
            Command::BenchMaster(a) => bench::master(a),
            Command::BenchWorker(a) => bench::worker(a),
            Command::Report(a) => bench::report(a),
        }
    }
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.command.common().verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
