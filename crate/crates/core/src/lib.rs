//! Closeness testing for sequential data.
//!
//! Two observation streams are quantized into a finite state space and treated
//! as trajectories of Markov chains. For every state the empirical outgoing
//! transition rows of the two chains are compared with a Poissonized χ²-type
//! closeness tester, giving per-state acceptance and rejection probabilities,
//! a χ²-type statistic and a total variation distance. On top of that sit
//! segment-pair evolution matrices, k-means over distance rows, classical
//! two-sample baselines, the simulation fixtures, and CSV ingestion.
//!
//! ```
//! use seqcloseness::{closeness, simdata};
//!
//! let fx = simdata::fixtures();
//! let params = closeness::ClosenessParams::new(0.1, 100.0, 5, 5).unwrap();
//! let result = closeness::closeness_analysis(&fx.qx, &fx.qx, &params).unwrap();
//! let summary = closeness::aggregate(&result, closeness::Aggregation::Mean).unwrap();
//! assert!(summary.accept_prob > 0.9);
//! ```

pub mod baselines;
pub mod cli;
pub mod closeness;
pub mod clustering;
pub mod divergences;
mod error;
pub mod evolution;
pub mod ingest;
pub mod quantizer;
pub mod simdata;
pub mod streams;
pub mod transition;

pub use error::{Error, Result};
pub use quantizer::{QuantizationSpec, StateSequence};
