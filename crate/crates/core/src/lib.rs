//! Domain-context calibration for in-context classification: content-free
//! and random-text prior estimation, the domain-label bias metric, and an
//! experiment harness over pluggable scoring backends.

pub mod backend;
pub mod calibration;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod harness;
pub mod metrics;
pub mod prompt;
pub mod sampling;
pub mod seed;
pub mod synthetic;

pub use backend::{Backend, BackendConfig, BackendError, BackendKind, LabelScores};
pub use calibration::{CalibrationMethod, Method, PriorEstimate};
pub use config::{RunFile, RunSpec};
pub use dataset::{Dataset, LabelSet, Template};
pub use harness::{run_eval, EvalReport};
