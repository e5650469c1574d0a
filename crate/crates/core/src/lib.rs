//! Weighted nonlinear ICA.
//!
//! - [`wii`]: the weighted independence index of a sample, computed from
//!   Gaussian-weighted covariances at a handful of weighting points.
//! - [`trainer`]: an autoencoder whose encoder is pushed towards independent
//!   latent components by penalizing the wii of each encoded minibatch.
//! - [`mixer`]: an exactly invertible nonlinear mixing built from random
//!   isometries and additive coupling layers, for benchmarks.
//! - [`metrics`]: OTS (optimal-assignment Spearman similarity) and max_corr.
//! - [`datagen`]: synthetic independent and dependent-but-uncorrelated sources.

pub mod dataset;
pub mod datagen;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod mixer;
pub mod nn;
pub mod rng;
pub mod stats;
pub mod trainer;
pub mod wii;

pub use dataset::Dataset;
pub use error::{Result, WicaError};
pub use rng::RngStream;
