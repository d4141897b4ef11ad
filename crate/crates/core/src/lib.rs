//! Spike-based environmental sound recognition.
//!
//! The pipeline converts audio into sparse spatiotemporal spike patterns via
//! spectrogram key-points, feeds them to current-based leaky integrate-and-fire
//! neurons, and trains one neuron per sound class with one of three supervised
//! rules (tempotron, PSD, or threshold-driven multi-spike plasticity). Readout
//! harnesses cover absolute and winner-take-all decisions, noise-robustness
//! evaluation, and burst detection on continuous streams.

pub mod audio;
pub mod encoding;
pub mod error;
pub mod experiments;
pub mod learning;
pub mod neuron;
pub(crate) mod par;
pub mod patterns;
pub mod readout;
pub mod rng;
pub mod sts;

pub use encoding::{EncodingConfig, SpikePattern};
pub use error::Error;
pub use learning::{LearningConfig, Model, Rule};
pub use neuron::{NeuronParams, SimResult, Weights};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
