use std::net::TcpStream;
use std::path::Path;
use std::thread;
use std::time::Duration;

use super::codec::{read_message, write_message, Algo, Message};
use crate::dataio::{read_dense_file, sniff_num_features, DenseDataset, LabelMap};
use crate::error::{Error, Result};
use crate::linmodels::{logistic_epoch, pegasos_epoch, LinearKind, LinearModel, SgdConfig};
use crate::seed;

#[derive(Debug, Clone)]
pub struct WorkerOptions {
    pub worker_id: u32,
    /// The wire config carries no batch size, so each worker sets its own.
    pub batch_size: usize,
    pub connect_attempts: u32,
    pub retry_delay: Duration,
    /// Per-read timeout once connected; `None` blocks indefinitely.
    pub io_timeout: Option<Duration>,
}

impl WorkerOptions {
    pub fn new(worker_id: u32) -> Self {
        WorkerOptions {
            worker_id,
            batch_size: SgdConfig::default().batch_size,
            connect_attempts: 20,
            retry_delay: Duration::from_millis(250),
            io_timeout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerSummary {
    pub rounds_completed: usize,
    pub final_params: Option<Vec<f64>>,
}

fn connect(addr: &str, opts: &WorkerOptions) -> Result<TcpStream> {
    let mut last = None;
    for attempt in 0..opts.connect_attempts.max(1) {
        match TcpStream::connect(addr) {
            Ok(s) => {
                s.set_nodelay(true)?;
                s.set_read_timeout(opts.io_timeout)?;
                return Ok(s);
            }
            Err(e) => {
                log::debug!("connect attempt {} to {addr} failed: {e}", attempt + 1);
                last = Some(e);
                thread::sleep(opts.retry_delay);
            }
        }
    }
    Err(last.map(Error::from).unwrap_or_else(|| Error::Protocol("no connection attempt made".into())))
}

/// One local pass over `part` starting from `params`.
///
/// The generator is derived from (seed, worker id, round); Pegasos continues
/// its global step counter at `round · n + 1`.
pub fn local_epoch(
    algo: Algo,
    params: &[f64],
    part: &DenseDataset,
    cfg: &SgdConfig,
    worker_id: u32,
    round: u32,
) -> Result<LinearModel> {
    let kind = match algo {
        Algo::Logistic => LinearKind::Logistic,
        Algo::Svm => LinearKind::Svm,
    };
    let mut model = LinearModel::from_params(kind, params)?;
    let mut rng = seed::derived_rng(cfg.seed, u64::from(worker_id), u64::from(round));
    match algo {
        Algo::Logistic => logistic_epoch(&mut model, part, cfg, &mut rng),
        Algo::Svm => {
            let first = u64::from(round) * part.len() as u64 + 1;
            pegasos_epoch(&mut model, part, cfg, first, &mut rng);
        }
    }
    Ok(model)
}

/// Connects, introduces itself, and serves rounds until DONE.
pub fn run_worker(addr: &str, part: &DenseDataset, opts: &WorkerOptions) -> Result<WorkerSummary> {
    part.require_binary()?;
    let mut stream = connect(addr, opts)?;
    write_message(
        &mut stream,
        &Message::Hello {
            worker_id: opts.worker_id,
            num_rows: part.len() as u64,
            num_features: part.num_features() as u32,
        },
    )?;
    let mut cfg: Option<(Algo, SgdConfig)> = None;
    let mut summary = WorkerSummary {
        rounds_completed: 0,
        final_params: None,
    };
    loop {
        let msg = match read_message(&mut stream)? {
            Some((m, _)) => m,
            None => return Err(Error::Protocol("master closed the connection".into())),
        };
        match msg {
            Message::Config {
                algo,
                seed,
                lambda,
                learning_rate,
                ..
            } => {
                let sgd = SgdConfig {
                    lambda,
                    learning_rate,
                    seed,
                    batch_size: opts.batch_size,
                    epochs_or_iters: 1,
                    ..SgdConfig::default()
                };
                sgd.validate()?;
                cfg = Some((algo, sgd));
            }
            Message::Params { round, values } => {
                let (algo, sgd) = cfg
                    .as_ref()
                    .ok_or_else(|| Error::Protocol("PARAMS before CONFIG".into()))?;
                if values.len() != part.num_features() + 1 {
                    return Err(Error::Protocol(format!(
                        "PARAMS carries {} values, expected {}",
                        values.len(),
                        part.num_features() + 1
                    )));
                }
                let model = local_epoch(*algo, &values, part, sgd, opts.worker_id, round)?;
                let params = model.to_params();
                write_message(
                    &mut stream,
                    &Message::Update {
                        round,
                        sample_count: part.len() as u64,
                        values: params.clone(),
                    },
                )?;
                summary.rounds_completed += 1;
                summary.final_params = Some(params);
            }
            Message::Done => return Ok(summary),
            Message::Error(text) => return Err(Error::Protocol(format!("master reported: {text}"))),
            other => {
                return Err(Error::Protocol(format!(
                    "unexpected frame type 0x{:02x} from master",
                    other.type_byte()
                )))
            }
        }
    }
}

/// Loads the part file first; if it cannot be parsed the master is told via an
/// ERROR frame and the parse error is returned.
pub fn run_worker_file(addr: &str, part: &Path, label_map: LabelMap, opts: &WorkerOptions) -> Result<WorkerSummary> {
    let loaded = sniff_num_features(part).and_then(|d| read_dense_file(part, d, label_map));
    match loaded {
        Ok(ds) => run_worker(addr, &ds, opts),
        Err(e) => {
            if let Ok(mut s) = connect(addr, &WorkerOptions { connect_attempts: 1, ..opts.clone() }) {
                let _ = write_message(&mut s, &Message::Error(format!("worker {}: {e}", opts.worker_id)));
            }
            Err(e)
        }
    }
}
