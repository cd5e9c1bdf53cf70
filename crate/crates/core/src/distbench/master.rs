use std::collections::{BTreeMap, BTreeSet};
use std::io::ErrorKind;
use std::net::{Shutdown, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::codec::{encoded_len, read_message, write_message, Algo, Message};
use crate::dataio::DenseDataset;
use crate::error::{Error, Result};
use crate::eval::auc_roc;
use crate::linmodels::{decision_scores, LinearKind, LinearModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerSpec {
    pub id: u32,
    #[serde(default = "one")]
    pub cores: u32,
    /// The worker's preloaded part; informational for the master.
    #[serde(default)]
    pub part: PathBuf,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub master_address: String,
    pub workers: Vec<WorkerSpec>,
    pub round_timeout_s: f64,
    pub max_rounds: usize,
    /// How long to wait for every worker to connect and say hello.
    #[serde(default = "default_accept")]
    pub accept_timeout_s: f64,
}

fn default_accept() -> f64 {
    30.0
}

impl ClusterSpec {
    /// `n` workers with ids `0..n` on the given address.
    pub fn local(master_address: &str, n: u32) -> Self {
        ClusterSpec {
            master_address: master_address.to_owned(),
            workers: (0..n)
                .map(|id| WorkerSpec {
                    id,
                    cores: 1,
                    part: PathBuf::new(),
                })
                .collect(),
            round_timeout_s: 60.0,
            max_rounds: 1000,
            accept_timeout_s: default_accept(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers.is_empty() {
            return Err(Error::config("cluster has no workers"));
        }
        let ids: BTreeSet<u32> = self.workers.iter().map(|w| w.id).collect();
        if ids.len() != self.workers.len() {
            return Err(Error::config("worker ids must be unique"));
        }
        if self.max_rounds < 1 {
            return Err(Error::config("max_rounds must be >= 1"));
        }
        if !(self.round_timeout_s > 0.0) || !(self.accept_timeout_s > 0.0) {
            return Err(Error::config("timeouts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterConfig {
    pub algo: Algo,
    pub rounds: usize,
    pub seed: u64,
    pub lambda: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub wall_clock_s: f64,
    pub bytes_sent: usize,
    pub bytes_received: usize,
    pub retried: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub algorithm: String,
    pub workers: usize,
    pub total_rows: u64,
    pub handshake_bytes_sent: usize,
    pub handshake_bytes_received: usize,
    pub rounds: Vec<RoundRecord>,
    pub wall_clock_s: f64,
    pub holdout_auc: Option<f64>,
    /// Dataset manifest name, when known; compared against local runs.
    pub manifest: Option<String>,
    /// False when the run was stopped early.
    pub completed: bool,
}

struct Event {
    conn: usize,
    frame: Result<Option<(Message, usize)>>,
}

struct Conn {
    stream: TcpStream,
    worker_id: u32,
    rows: u64,
}

pub struct Master {
    listener: TcpListener,
    spec: ClusterSpec,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Logistic => "logistic",
            Algo::Svm => "svm",
        }
    }

    fn kind(self) -> LinearKind {
        match self {
            Algo::Logistic => LinearKind::Logistic,
            Algo::Svm => LinearKind::Svm,
        }
    }
}

fn spawn_reader(conn: usize, stream: TcpStream, tx: mpsc::Sender<Event>) {
    thread::spawn(move || {
        let mut stream = stream;
        loop {
            let frame = read_message(&mut stream);
            let stop = !matches!(frame, Ok(Some(_)));
            if tx.send(Event { conn, frame }).is_err() || stop {
                break;
            }
        }
    });
}

impl Master {
    pub fn bind(spec: ClusterSpec) -> Result<Self> {
        spec.validate()?;
        let listener = TcpListener::bind(&spec.master_address)?;
        Ok(Master { listener, spec })
    }

    pub fn local_addr(&self) -> Result<std::net::SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub fn run(&self, cfg: &MasterConfig, holdout: Option<&DenseDataset>) -> Result<(LinearModel, BenchRecord)> {
        self.run_until(cfg, holdout, None)
    }

    /// Like [`Master::run`], but checks `stop` between rounds; a stopped run
    /// returns the model so far with `completed = false`.
    pub fn run_until(
        &self,
        cfg: &MasterConfig,
        holdout: Option<&DenseDataset>,
        stop: Option<&AtomicBool>,
    ) -> Result<(LinearModel, BenchRecord)> {
        if cfg.rounds < 1 || cfg.rounds > self.spec.max_rounds {
            return Err(Error::config(format!(
                "rounds must be in 1..={}, got {}",
                self.spec.max_rounds, cfg.rounds
            )));
        }
        let started = Instant::now();
        let (tx, rx) = mpsc::channel();
        let mut streams = self.accept_all(&tx)?;
        drop(tx);
        let result = self.drive(cfg, holdout, stop, &mut streams, &rx, started);
        for s in streams.iter().flatten() {
            let _ = s.shutdown(Shutdown::Both);
        }
        result
    }

    fn accept_all(&self, tx: &mpsc::Sender<Event>) -> Result<Vec<Option<TcpStream>>> {
        let deadline = Instant::now() + Duration::from_secs_f64(self.spec.accept_timeout_s);
        self.listener.set_nonblocking(true)?;
        let mut streams = Vec::new();
        while streams.len() < self.spec.workers.len() {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    stream.set_nonblocking(false)?;
                    stream.set_nodelay(true)?;
                    log::info!("connection from {peer}");
                    spawn_reader(streams.len(), stream.try_clone()?, tx.clone());
                    streams.push(Some(stream));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(Error::Timeout(format!(
                            "{} of {} workers connected within {}s",
                            streams.len(),
                            self.spec.workers.len(),
                            self.spec.accept_timeout_s
                        )));
                    }
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        }
        self.listener.set_nonblocking(false)?;
        Ok(streams)
    }

    fn drive(
        &self,
        cfg: &MasterConfig,
        holdout: Option<&DenseDataset>,
        stop: Option<&AtomicBool>,
        streams: &mut [Option<TcpStream>],
        rx: &Receiver<Event>,
        started: Instant,
    ) -> Result<(LinearModel, BenchRecord)> {
        // handshake
        let deadline = Instant::now() + Duration::from_secs_f64(self.spec.accept_timeout_s);
        let expected: BTreeSet<u32> = self.spec.workers.iter().map(|w| w.id).collect();
        let mut hello: BTreeMap<usize, (u32, u64, u32)> = BTreeMap::new();
        let mut handshake_received = 0;
        while hello.len() < streams.len() {
            let ev = recv_before(rx, deadline, "hello")?;
            match ev.frame {
                Ok(Some((
                    Message::Hello {
                        worker_id,
                        num_rows,
                        num_features,
                    },
                    n,
                ))) if !hello.contains_key(&ev.conn) => {
                    handshake_received += n;
                    if !expected.contains(&worker_id) {
                        return Err(Error::Protocol(format!("unexpected worker id {worker_id}")));
                    }
                    if hello.values().any(|h| h.0 == worker_id) {
                        return Err(Error::Protocol(format!("worker id {worker_id} connected twice")));
                    }
                    if num_rows == 0 {
                        return Err(Error::data(format!("worker {worker_id} holds no rows")));
                    }
                    hello.insert(ev.conn, (worker_id, num_rows, num_features));
                }
                Ok(Some((Message::Error(msg), _))) => {
                    return Err(Error::Protocol(format!("connection {} reported: {msg}", ev.conn)));
                }
                other => return Err(violation(&format!("connection {}", ev.conn), other)),
            }
        }
        let dims: BTreeSet<u32> = hello.values().map(|h| h.2).collect();
        if dims.len() != 1 {
            return Err(Error::data(format!("workers disagree on feature count: {dims:?}")));
        }
        let d = *dims.first().unwrap() as usize;
        // order connections by worker id: this fixes the summation order
        let mut conns: Vec<Conn> = hello
            .iter()
            .map(|(&c, &(worker_id, rows, _))| Conn {
                stream: streams[c].take().expect("each connection says hello once"),
                worker_id,
                rows,
            })
            .collect();
        let conn_of: BTreeMap<usize, usize> = {
            let mut order: Vec<(u32, usize)> = hello.iter().map(|(&c, h)| (h.0, c)).collect();
            order.sort_unstable();
            conns.sort_by_key(|c| c.worker_id);
            order.into_iter().enumerate().map(|(slot, (_, c))| (c, slot)).collect()
        };

        let config = Message::Config {
            algo: cfg.algo,
            rounds: cfg.rounds as u32,
            seed: cfg.seed,
            lambda: cfg.lambda,
            learning_rate: cfg.learning_rate,
        };
        let mut handshake_sent = 0;
        for c in &mut conns {
            handshake_sent += write_message(&mut c.stream, &config)?;
        }

        let total_rows: u64 = conns.iter().map(|c| c.rows).sum();
        let mut global = vec![0.0; d + 1];
        let mut records = Vec::with_capacity(cfg.rounds);
        let mut completed = true;
        let timeout = Duration::from_secs_f64(self.spec.round_timeout_s);
        let outcome = (|| -> Result<()> {
            for round in 0..cfg.rounds {
                if stop.is_some_and(|s| s.load(Ordering::SeqCst)) {
                    log::warn!("stopping after {round} rounds");
                    completed = false;
                    break;
                }
                let t0 = Instant::now();
                let (mut sent, mut received) = (0, 0);
                let mut pending: BTreeSet<usize> = (0..conns.len()).collect();
                let mut updates: Vec<Option<(u64, Vec<f64>)>> = vec![None; conns.len()];
                let params = Message::Params {
                    round: round as u32,
                    values: global.clone(),
                };
                let mut retried = false;
                for attempt in 0..2 {
                    for &slot in &pending {
                        sent += write_message(&mut conns[slot].stream, &params)?;
                    }
                    let deadline = Instant::now() + timeout;
                    while !pending.is_empty() {
                        let ev = match recv_before(rx, deadline, "update") {
                            Ok(ev) => ev,
                            Err(Error::Timeout(_)) => break,
                            Err(e) => return Err(e),
                        };
                        let slot = conn_of[&ev.conn];
                        let who = format!("worker {}", conns[slot].worker_id);
                        match ev.frame {
                            Ok(Some((
                                Message::Update {
                                    round: r,
                                    sample_count,
                                    values,
                                },
                                n,
                            ))) => {
                                received += n;
                                if r as usize != round || !pending.contains(&slot) {
                                    log::debug!("{who}: discarding stale update for round {r}");
                                    continue;
                                }
                                if values.len() != d + 1 {
                                    return Err(Error::Protocol(format!(
                                        "{who} sent {} parameters, expected {}",
                                        values.len(),
                                        d + 1
                                    )));
                                }
                                if sample_count != conns[slot].rows {
                                    log::warn!("{who}: sample count {sample_count} differs from hello {}", conns[slot].rows);
                                }
                                updates[slot] = Some((sample_count, values));
                                pending.remove(&slot);
                            }
                            Ok(Some((Message::Error(msg), _))) => {
                                return Err(Error::Protocol(format!("{who} reported: {msg}")));
                            }
                            other => {
                                let _ = conns[slot].stream.shutdown(Shutdown::Both);
                                return Err(violation(&who, other));
                            }
                        }
                    }
                    if pending.is_empty() {
                        break;
                    }
                    let late: Vec<u32> = pending.iter().map(|&s| conns[s].worker_id).collect();
                    if attempt == 0 {
                        log::warn!("round {round}: workers {late:?} timed out; retrying");
                        retried = true;
                    } else {
                        return Err(Error::Timeout(format!("round {round}: workers {late:?} did not respond")));
                    }
                }
                global = aggregate(updates.into_iter().map(|u| u.expect("all received")));
                let rec = RoundRecord {
                    round,
                    wall_clock_s: t0.elapsed().as_secs_f64(),
                    bytes_sent: sent,
                    bytes_received: received,
                    retried,
                };
                log::info!("round {round} done in {:.3}s", rec.wall_clock_s);
                records.push(rec);
            }
            Ok(())
        })();
        // DONE goes out even on failure so well-behaved workers exit
        for c in &mut conns {
            let _ = write_message(&mut c.stream, &Message::Done);
            let _ = c.stream.shutdown(Shutdown::Write);
        }
        outcome?;

        let model = LinearModel::from_params(cfg.algo.kind(), &global)?;
        let holdout_auc = match holdout {
            Some(h) => Some(auc_roc(h.labels(), &decision_scores(&model, h)?)?),
            None => None,
        };
        let record = BenchRecord {
            algorithm: cfg.algo.name().to_owned(),
            workers: conns.len(),
            total_rows,
            handshake_bytes_sent: handshake_sent,
            handshake_bytes_received: handshake_received,
            rounds: records,
            wall_clock_s: started.elapsed().as_secs_f64(),
            holdout_auc,
            manifest: None,
            completed,
        };
        Ok((model, record))
    }
}

/// Sample-weighted mean, summed in the iteration order given.
pub fn aggregate(updates: impl IntoIterator<Item = (u64, Vec<f64>)>) -> Vec<f64> {
    let updates: Vec<(u64, Vec<f64>)> = updates.into_iter().collect();
    let total: u64 = updates.iter().map(|u| u.0).sum();
    let mut out = vec![0.0; updates.first().map_or(0, |u| u.1.len())];
    for (n, w) in &updates {
        let share = *n as f64 / total as f64;
        out.iter_mut().zip(w).for_each(|(o, x)| *o += share * x);
    }
    out
}

/// Bytes one round should move with no retries: one PARAMS out and one UPDATE
/// back per worker.
pub fn expected_round_bytes(workers: usize, num_params: usize) -> (usize, usize) {
    let params = encoded_len(&Message::Params {
        round: 0,
        values: vec![0.0; num_params],
    });
    let update = encoded_len(&Message::Update {
        round: 0,
        sample_count: 0,
        values: vec![0.0; num_params],
    });
    (workers * params, workers * update)
}

fn recv_before(rx: &Receiver<Event>, deadline: Instant, what: &str) -> Result<Event> {
    let left = deadline.saturating_duration_since(Instant::now());
    rx.recv_timeout(left).map_err(|e| match e {
        RecvTimeoutError::Timeout => Error::Timeout(format!("waiting for {what}")),
        RecvTimeoutError::Disconnected => Error::Protocol(format!("all connections closed while waiting for {what}")),
    })
}

fn violation(who: &str, frame: Result<Option<(Message, usize)>>) -> Error {
    match frame {
        Ok(Some((msg, _))) => Error::Protocol(format!("{who} sent unexpected frame type 0x{:02x}", msg.type_byte())),
        Ok(None) => Error::Protocol(format!("{who} disconnected")),
        Err(e) => Error::Protocol(format!("{who}: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_counts_average_is_plain_mean() {
        let a = aggregate([(5, vec![1.0, 2.0]), (5, vec![3.0, 6.0])]);
        assert_eq!(a, vec![2.0, 4.0]);
    }

    #[test]
    fn weighted_average() {
        let a = aggregate([(1, vec![0.0]), (3, vec![4.0])]);
        assert_eq!(a, vec![3.0]);
        let single = aggregate([(7, vec![0.1, -0.3])]);
        assert_eq!(single, vec![0.1, -0.3]);
    }

    #[test]
    fn spec_validation() {
        let mut s = ClusterSpec::local("127.0.0.1:0", 2);
        assert!(s.validate().is_ok());
        s.workers[1].id = 0;
        assert!(s.validate().is_err());
        let mut s = ClusterSpec::local("127.0.0.1:0", 1);
        s.max_rounds = 0;
        assert!(s.validate().is_err());
    }
}
