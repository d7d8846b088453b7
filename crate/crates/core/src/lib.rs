//! Neurochaos learning: chaotic GLS-neuron feature extraction (ChaosFEX), the
//! ChaosNet cosine-similarity classifier, hybrid CFX+ML back-ends, and the
//! evaluation machinery used to run high- and low-training-sample experiments.

pub mod chaosfex;
pub mod chaosnet;
pub mod classifiers;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gls_neuron;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod tuning;

pub use error::{Error, Result};
pub use gls_neuron::{ChaosConfig, MapKind};
pub use matrix::Matrix;
