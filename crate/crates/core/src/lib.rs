//! Latent-space steered adaptive ensemble simulation.
//!
//! An ensemble of toy folding simulations ([`dynamics`]) is featurized into
//! contact maps ([`features`]), embedded by a dense variational autoencoder
//! ([`latent`]), and steered by density-based outlier selection
//! ([`adaptivity`]). Tasks are organised as pipelines of sequential stages
//! ([`workflow`]) and executed on a simulated pilot resource pool
//! ([`runtime`]).

pub mod adaptivity;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod features;
pub mod latent;
pub mod report;
pub mod rng;
pub mod runtime;
pub mod workflow;

pub use error::{Error, Result};
