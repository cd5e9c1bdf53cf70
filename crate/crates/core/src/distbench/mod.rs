//! Master–worker data-parallel training over TCP with per-round parameter
//! averaging, plus local-vs-distributed benchmark tables.

pub mod codec;
mod compare;
mod master;
mod worker;

pub use codec::{Algo, Message, MAX_FRAME};
pub use compare::{bench_compare, comparison_csv, local_benchmark, ComparisonRow, LocalResult};
pub use master::{
    aggregate, expected_round_bytes, BenchRecord, ClusterSpec, Master, MasterConfig, RoundRecord, WorkerSpec,
};
pub use worker::{local_epoch, run_worker, run_worker_file, WorkerOptions, WorkerSummary};
