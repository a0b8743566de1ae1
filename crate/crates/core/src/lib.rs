//! Weather-driven home insurance risk modelling.
//!
//! Weekly precipitation features are mapped to claim counts and aggregate
//! losses with ε-insensitive support vector regression whose hyperparameters
//! `(C, σ², ε)` are tuned by a real-coded genetic algorithm. A one-hidden-layer
//! network and a fixed-hyperparameter SVR serve as baselines, and a fitted
//! two-stage model projects percentage changes in claims and losses under
//! future precipitation scenarios.
//!
//! The `parallel` feature (on by default) evaluates GA populations, model
//! comparisons and scenario projections on the rayon thread pool. Results are
//! identical with the feature disabled.

pub mod ann;
pub mod data;
mod error;
pub mod ga;
pub mod kernel;
pub mod matrix;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod serial;
pub mod svr;

pub use error::{Error, Result};
pub use matrix::DesignMatrix;
