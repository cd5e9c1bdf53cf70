//! Desk-scale benchmarking harness for large binary classification, text
//! preparation, and tabular rating regression.
//!
//! Every learner here is written from first principles: Pegasos and logistic
//! regression ([`linmodels`]), a batch-normalized MLP ([`mlp`]), exact-greedy
//! gradient boosting ([`gbt`]). [`distbench`] runs the linear learners in a
//! master-worker setup over a small length-prefixed TCP protocol and compares
//! the result against single-node training.

pub mod artifact;
pub mod dataio;
pub mod distbench;
pub mod error;
pub mod eval;
pub mod gbt;
pub mod linmodels;
pub mod mlp;
pub mod prep;
pub mod seed;
pub mod textfeat;

pub use error::{Error, Result};
