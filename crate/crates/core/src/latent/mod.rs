//! Dense variational autoencoder over contact-map feature vectors.
//!
//! Forward and backward passes are written out by hand over a flat parameter
//! vector so that gradients can be checked against finite differences and
//! trained with Adam without an autodiff framework.

mod model;
mod train;

pub use model::{Forward, LatentModel, LayerShape, MAX_LATENT_DIM, MIN_LATENT_DIM};
pub use train::{
    fit, loss, loss_and_gradient, reconstruction_loss, split_holdout, train, EpochLoss,
    LossReport, TrainConfig,
};
