//! Location verification from Time-of-Arrival measurements.
//!
//! Simulates ToA observations of legitimate vehicles (with NLoS bias) and
//! far-field location spoofers at a set of base stations, then verifies
//! claimed locations with a likelihood-ratio test and with a small
//! feed-forward network trained by backpropagation.

pub mod channel;
pub mod error;
pub mod harness;
pub mod io;
pub mod lrt;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod scenario;

pub use channel::{generate_dataset, ChannelParams, Class, Dataset, LabeledSample};
pub use error::{Error, Result};
pub use lrt::{evaluate_lrt, LrtDetector, LrtEvaluation};
pub use metrics::{compute_metrics, MetricsReport, Prior};
pub use nn::{incremental_training_run, train, LearningCurve, MlpModel, TrainConfig};
pub use rng::RngStream;
pub use scenario::{Location, Scenario};
