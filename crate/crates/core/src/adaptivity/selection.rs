use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub latent_dim: usize,
    pub heldout_loss: f64,
}

/// Index of the lowest held-out loss; exact ties go to the smaller latent
/// dimension. Non-finite losses never win against finite ones.
pub fn select_best_model(scores: &[ModelScore]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::invalid("no candidate models"));
    }
    let key = |s: &ModelScore| if s.heldout_loss.is_finite() { s.heldout_loss } else { f64::INFINITY };
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let (a, b) = (key(s), key(&scores[best]));
        if a < b || (a == b && s.latent_dim < scores[best].latent_dim) {
            best = i;
        }
    }
    Ok(best)
}
