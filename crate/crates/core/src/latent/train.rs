use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::model::{logistic, LatentModel};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub kl_weight: f64,
    pub seed: u64,
    pub heldout_fraction: f64,
    /// Upper bound on the held-out set size.
    pub heldout_max: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            kl_weight: 1e-3,
            seed: 0,
            heldout_fraction: 0.2,
            heldout_max: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(Error::invalid("kl_weight must be >= 0"));
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 0.5) {
            return Err(Error::invalid("heldout_fraction must lie in (0, 0.5)"));
        }
        if self.heldout_max == 0 {
            return Err(Error::invalid("heldout_max must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

impl EpochLoss {
    fn new(reconstruction: f64, kl: f64, beta: f64) -> Self {
        EpochLoss {
            total: reconstruction + beta * kl,
            reconstruction,
            kl,
        }
    }
}

/// Per-sample averages of the final epoch plus the full history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub heldout_reconstruction: Option<f64>,
    pub history: Vec<EpochLoss>,
}

impl LossReport {
    fn from_epoch(e: EpochLoss, history: Vec<EpochLoss>) -> Self {
        LossReport {
            total: e.total,
            reconstruction: e.reconstruction,
            kl: e.kl,
            heldout_reconstruction: None,
            history,
        }
    }
}

#[inline]
fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

/// Adds the gradient of `scale * (reconstruction + beta * kl)` for one
/// sample to `grad`; returns the unscaled `(reconstruction, kl)`.
fn accumulate_sample(
    m: &LatentModel,
    x: &[f64],
    noise: &[f64],
    beta: f64,
    scale: f64,
    grad: &mut [f64],
) -> Result<(f64, f64)> {
    let fwd = m.forward(x, Some(noise))?;
    let dim = m.input_dim() as f64;
    let mut recon = 0.0;
    let mut g: Vec<f64> = Vec::with_capacity(fwd.logits.len());
    for (&a, &t) in fwd.logits.iter().zip(x) {
        recon += softplus(a) - t * a;
        g.push((logistic(a) - t) / dim * scale);
    }
    recon /= dim;

    let enc_len = m.encoder_len();
    let n_layers = m.layers().len();
    // decoder, output layer first
    for k in (0..n_layers - enc_len).rev() {
        let layer = enc_len + k;
        let input = &fwd.dec[k];
        g = backprop_layer(m, layer, input, &g, grad, k > 0);
    }
    let dz = g;

    let mut kl = 0.0;
    let d = m.latent_dim();
    let mut head = vec![0.0; 2 * d];
    for j in 0..d {
        let mu = fwd.mean[j];
        let lv = fwd.log_var[j];
        let var = lv.exp();
        kl += -0.5 * (1.0 + lv - mu * mu - var);
        head[j] = dz[j] + scale * beta * mu;
        head[d + j] = dz[j] * noise[j] * 0.5 * (0.5 * lv).exp() + scale * beta * 0.5 * (var - 1.0);
    }

    let mut g = head;
    for k in (0..enc_len).rev() {
        g = backprop_layer(m, k, &fwd.enc[k], &g, grad, k > 0);
    }
    Ok((recon, kl))
}

/// Accumulates weight/bias gradients of one affine layer and returns the
/// gradient w.r.t. its input, passed back through tanh when `tanh_input`.
fn backprop_layer(
    m: &LatentModel,
    layer: usize,
    input: &[f64],
    g_out: &[f64],
    grad: &mut [f64],
    tanh_input: bool,
) -> Vec<f64> {
    let (w_off, b_off) = m.layer_offsets(layer);
    let inputs = input.len();
    let weights = m.weights(layer);
    let mut g_in = vec![0.0; inputs];
    for (o, &go) in g_out.iter().enumerate() {
        if go == 0.0 {
            continue;
        }
        grad[b_off + o] += go;
        let gw = &mut grad[w_off + o * inputs..w_off + (o + 1) * inputs];
        for (gwi, &xi) in gw.iter_mut().zip(input) {
            *gwi += go * xi;
        }
        let row = &weights[o * inputs..(o + 1) * inputs];
        for (gi, &wi) in g_in.iter_mut().zip(row) {
            *gi += go * wi;
        }
    }
    if tanh_input {
        for (gi, &a) in g_in.iter_mut().zip(input) {
            *gi *= 1.0 - a * a;
        }
    }
    g_in
}

/// Batch-mean loss and its exact gradient for fixed reparameterization
/// noise (one row per sample).
pub fn loss_and_gradient(
    m: &LatentModel,
    batch: &[Vec<f64>],
    noise: &[Vec<f64>],
    beta: f64,
) -> Result<(EpochLoss, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if noise.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            expected: batch.len(),
            got: noise.len(),
        });
    }
    let mut grad = vec![0.0; m.params().len()];
    let scale = 1.0 / batch.len() as f64;
    let (mut r, mut k) = (0.0, 0.0);
    for (x, xi) in batch.iter().zip(noise) {
        let (ri, ki) = accumulate_sample(m, x, xi, beta, scale, &mut grad)?;
        r += ri;
        k += ki;
    }
    Ok((EpochLoss::new(r * scale, k * scale, beta), grad))
}

fn draw_noise(rng: &mut impl Rng, rows: usize, d: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Stochastic loss of one batch with noise drawn from `rng`.
pub fn loss(m: &LatentModel, batch: &[Vec<f64>], beta: f64, rng: &mut impl Rng) -> Result<LossReport> {
    let noise = draw_noise(rng, batch.len(), m.latent_dim());
    let (e, _) = loss_and_gradient(m, batch, &noise, beta)?;
    if !e.total.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            reason: "non-finite loss".into(),
        });
    }
    Ok(LossReport::from_epoch(e, Vec::new()))
}

/// Mean per-element binary cross-entropy of decoding `z = mean` (no sampling).
pub fn reconstruction_loss(m: &LatentModel, heldout: &[Vec<f64>]) -> Result<f64> {
    if heldout.is_empty() {
        return Err(Error::invalid("empty held-out set"));
    }
    let dim = m.input_dim() as f64;
    let mut total = 0.0;
    for x in heldout {
        let fwd = m.forward(x, None)?;
        let r: f64 = fwd
            .logits
            .iter()
            .zip(x.iter())
            .map(|(&a, &t)| softplus(a) - t * a)
            .sum();
        total += r / dim;
    }
    let v = total / heldout.len() as f64;
    if !v.is_finite() {
        return Err(Error::NonFinite("reconstruction loss"));
    }
    Ok(v)
}

/// Splits `n` sample indices into `(train, heldout)`. The held-out size is
/// `round(fraction * n)` clamped to `[1, max]`.
pub fn split_holdout(n: usize, fraction: f64, max: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = stream(seed, 0, Purpose::Sampling);
    idx.shuffle(&mut rng);
    let k = ((fraction * n as f64).round() as usize).clamp(1, max.max(1)).min(n.saturating_sub(1));
    let mut heldout = idx[..k].to_vec();
    let mut train = idx[k..].to_vec();
    heldout.sort_unstable();
    train.sort_unstable();
    (train, heldout)
}

struct Adam {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            b1: 0.9,
            b2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.b1.powi(self.t);
        let c2 = 1.0 - self.b2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.b1 * *m + (1.0 - self.b1) * g;
            *v = self.b2 * *v + (1.0 - self.b2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Mini-batch Adam on an already split training set.
pub fn fit(mut m: LatentModel, train_set: &[Vec<f64>], cfg: &TrainConfig) -> Result<(LatentModel, LossReport)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if let Some(x) = train_set.iter().find(|x| x.len() != m.input_dim()) {
        return Err(Error::DimensionMismatch {
            expected: m.input_dim(),
            got: x.len(),
        });
    }
    let d = m.latent_dim() as u64;
    let mut order_rng = stream(cfg.seed, d, Purpose::Sampling);
    let mut noise_rng = stream(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, d, Purpose::Training);
    let mut adam = Adam::new(m.params().len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0.0; m.params().len()];
    let mut noise = vec![0.0; m.latent_dim()];

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let (mut r_sum, mut k_sum) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                noise.iter_mut().for_each(|e| *e = noise_rng.sample(StandardNormal));
                let (r, k) = accumulate_sample(&m, &train_set[i], &noise, cfg.kl_weight, scale, &mut grad)?;
                r_sum += r;
                k_sum += k;
            }
            adam.step(m.params_mut(), &grad);
        }
        let n = train_set.len() as f64;
        let e = EpochLoss::new(r_sum / n, k_sum / n, cfg.kl_weight);
        history.push(e);
        if !e.total.is_finite() || !m.is_finite() {
            return Err(Error::TrainingDiverged { epoch, history });
        }
    }
    let last = *history.last().unwrap();
    Ok((m, LossReport::from_epoch(last, history)))
}

/// Reserves a held-out split, fits on the remainder and reports the
/// held-out reconstruction loss.
pub fn train(m: LatentModel, dataset: &[Vec<f64>], cfg: &TrainConfig) -> Result<(LatentModel, LossReport)> {
    cfg.validate()?;
    if dataset.len() < 10 {
        return Err(Error::invalid(format!(
            "training needs at least 10 samples, got {}",
            dataset.len()
        )));
    }
    let (train_idx, heldout_idx) = split_holdout(dataset.len(), cfg.heldout_fraction, cfg.heldout_max, cfg.seed);
    let train_set: Vec<Vec<f64>> = train_idx.iter().map(|&i| dataset[i].clone()).collect();
    let heldout: Vec<Vec<f64>> = heldout_idx.iter().map(|&i| dataset[i].clone()).collect();
    let (m, mut report) = fit(m, &train_set, cfg)?;
    report.heldout_reconstruction = Some(reconstruction_loss(&m, &heldout)?);
    Ok((m, report))
}
