use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

pub const MIN_LATENT_DIM: usize = 3;
pub const MAX_LATENT_DIM: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    weight_offset: usize,
    bias_offset: usize,
}

impl LayerShape {
    fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// Encoder `input -> hidden... -> 2d` (tanh hidden, linear head emitting
/// mean and log-variance) and mirrored decoder `d -> ...hidden -> input`
/// with a logistic output.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    input_dim: usize,
    latent_dim: usize,
    hidden: Vec<usize>,
    layers: Vec<LayerShape>,
    encoder_len: usize,
    params: Vec<f64>,
}

/// Activations kept from a forward pass, needed by backprop.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Encoder activations, `enc[0]` is the input.
    pub(crate) enc: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
    /// Decoder activations, `dec[0]` is the latent sample.
    pub(crate) dec: Vec<Vec<f64>>,
    /// Output pre-activations.
    pub logits: Vec<f64>,
}

impl LatentModel {
    /// Zero-initialized model with the given architecture. The latent width
    /// is unrestricted here; [`LatentModel::init`] enforces the sweep range.
    pub fn zeros(input_dim: usize, hidden: &[usize], latent_dim: usize) -> Result<Self> {
        if input_dim == 0 || latent_dim == 0 || hidden.contains(&0) {
            return Err(Error::invalid(format!(
                "invalid dimensions: input {input_dim}, hidden {hidden:?}, latent {latent_dim}"
            )));
        }
        let mut widths_enc = vec![input_dim];
        widths_enc.extend_from_slice(hidden);
        widths_enc.push(2 * latent_dim);
        let mut widths_dec = vec![latent_dim];
        widths_dec.extend(hidden.iter().rev());
        widths_dec.push(input_dim);

        let mut layers = Vec::new();
        let mut offset = 0;
        for widths in [&widths_enc, &widths_dec] {
            for w in widths.windows(2) {
                let shape = LayerShape {
                    inputs: w[0],
                    outputs: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset += shape.param_count();
                layers.push(shape);
            }
        }
        Ok(LatentModel {
            input_dim,
            latent_dim,
            hidden: hidden.to_vec(),
            encoder_len: widths_enc.len() - 1,
            layers,
            params: vec![0.0; offset],
        })
    }

    /// Scaled-uniform (Glorot) initialization with zero biases; identical
    /// seeds give identical weights.
    pub fn init(input_dim: usize, hidden: &[usize], latent_dim: usize, seed: u64) -> Result<Self> {
        if !(MIN_LATENT_DIM..=MAX_LATENT_DIM).contains(&latent_dim) {
            return Err(Error::invalid(format!(
                "latent dimension {latent_dim} outside [{MIN_LATENT_DIM}, {MAX_LATENT_DIM}]"
            )));
        }
        let mut m = Self::zeros(input_dim, hidden, latent_dim)?;
        let mut rng = stream(seed, latent_dim as u64, Purpose::Training);
        for l in m.layers.clone() {
            let bound = init_bound(&l);
            for w in &mut m.params[l.weight_offset..l.bias_offset] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(m)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn encoder_layers(&self) -> &[LayerShape] {
        &self.layers[..self.encoder_len]
    }

    pub fn decoder_layers(&self) -> &[LayerShape] {
        &self.layers[self.encoder_len..]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let l = &self.layers[layer];
        &self.params[l.weight_offset..l.bias_offset]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.params[l.weight_offset..l.bias_offset]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let l = &self.layers[layer];
        &self.params[l.bias_offset..l.bias_offset + l.outputs]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let l = self.layers[layer];
        &mut self.params[l.bias_offset..l.bias_offset + l.outputs]
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Deterministic encoder pass: `(mean, log_var)`.
    pub fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(x)?;
        let enc = self.encoder_pass(x);
        let head = enc.last().unwrap();
        let (mean, log_var) = head.split_at(self.latent_dim);
        if !head.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("encoder output"));
        }
        Ok((mean.to_vec(), log_var.to_vec()))
    }

    /// Decoder output probabilities for a latent point.
    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim,
                got: z.len(),
            });
        }
        let (_, logits) = self.decoder_pass(z.to_vec());
        Ok(logits.iter().map(|&a| logistic(a)).collect())
    }

    pub(crate) fn encoder_pass(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.encoder_len + 1);
        acts.push(x.to_vec());
        for (k, l) in self.encoder_layers().iter().enumerate() {
            let mut out = self.affine(l, acts.last().unwrap());
            if k + 1 < self.encoder_len {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        acts
    }

    /// Returns decoder activations (hidden layers included, latent first)
    /// and the output logits.
    pub(crate) fn decoder_pass(&self, z: Vec<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
        let dec_layers = self.decoder_layers();
        let mut acts = Vec::with_capacity(dec_layers.len());
        acts.push(z);
        for (k, l) in dec_layers.iter().enumerate() {
            let mut out = self.affine(l, acts.last().unwrap());
            if k + 1 == dec_layers.len() {
                return (acts, out);
            }
            out.iter_mut().for_each(|v| *v = v.tanh());
            acts.push(out);
        }
        unreachable!("decoder has at least one layer")
    }

    /// Full pass with latent sample `z = mean + exp(log_var / 2) * noise`.
    pub fn forward(&self, x: &[f64], noise: Option<&[f64]>) -> Result<Forward> {
        self.check_input(x)?;
        let enc = self.encoder_pass(x);
        let head = enc.last().unwrap();
        let mean = head[..self.latent_dim].to_vec();
        let log_var = head[self.latent_dim..].to_vec();
        let z: Vec<f64> = match noise {
            Some(xi) => mean
                .iter()
                .zip(&log_var)
                .zip(xi)
                .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
                .collect(),
            None => mean.clone(),
        };
        let (dec, logits) = self.decoder_pass(z);
        Ok(Forward {
            enc,
            mean,
            log_var,
            dec,
            logits,
        })
    }

    #[inline]
    pub(crate) fn affine(&self, l: &LayerShape, x: &[f64]) -> Vec<f64> {
        let w = &self.params[l.weight_offset..l.bias_offset];
        let b = &self.params[l.bias_offset..l.bias_offset + l.outputs];
        w.chunks_exact(l.inputs)
            .zip(b)
            .map(|(row, bias)| bias + dot(row, x))
            .collect()
    }

    pub(crate) fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let l = &self.layers[layer];
        (l.weight_offset, l.bias_offset)
    }

    pub(crate) fn encoder_len(&self) -> usize {
        self.encoder_len
    }
}

pub(crate) fn init_bound(l: &LayerShape) -> f64 {
    (6.0 / (l.inputs + l.outputs) as f64).sqrt()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn logistic(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    input_dim: usize,
    latent_dim: usize,
    hidden: Vec<usize>,
    encoder: Vec<LayerDoc>,
    decoder: Vec<LayerDoc>,
}

impl LatentModel {
    /// Single JSON document: layer shapes plus row-major weights.
    pub fn to_checkpoint(&self) -> Result<String> {
        let doc_layer = |i: usize| LayerDoc {
            rows: self.layers[i].outputs,
            cols: self.layers[i].inputs,
            weights: self.weights(i).to_vec(),
            bias: self.bias(i).to_vec(),
        };
        let doc = CheckpointDoc {
            input_dim: self.input_dim,
            latent_dim: self.latent_dim,
            hidden: self.hidden.clone(),
            encoder: (0..self.encoder_len).map(doc_layer).collect(),
            decoder: (self.encoder_len..self.layers.len()).map(doc_layer).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_checkpoint(json: &str) -> Result<Self> {
        let doc: CheckpointDoc = serde_json::from_str(json)?;
        let mut m = Self::zeros(doc.input_dim, &doc.hidden, doc.latent_dim)?;
        let layers: Vec<LayerDoc> = doc.encoder.into_iter().chain(doc.decoder).collect();
        if layers.len() != m.layers.len() {
            return Err(Error::invalid("checkpoint layer count does not match architecture"));
        }
        for (i, l) in layers.into_iter().enumerate() {
            let shape = m.layers[i];
            if l.rows != shape.outputs
                || l.cols != shape.inputs
                || l.weights.len() != shape.inputs * shape.outputs
                || l.bias.len() != shape.outputs
            {
                return Err(Error::invalid(format!("checkpoint layer {i} has wrong shape")));
            }
            m.weights_mut(i).copy_from_slice(&l.weights);
            m.bias_mut(i).copy_from_slice(&l.bias);
        }
        if !m.is_finite() {
            return Err(Error::NonFinite("checkpoint weights"));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = LatentModel::init(45, &[64, 32], 6, 17).unwrap();
        let b = LatentModel::init(45, &[64, 32], 6, 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, LatentModel::init(45, &[64, 32], 6, 18).unwrap());
        assert_eq!(a.encoder_layers().last().unwrap().outputs, 12);
        assert_eq!(a.decoder_layers().first().unwrap().inputs, 6);
        assert_eq!(a.decoder_layers().last().unwrap().outputs, 45);
        for (i, l) in a.layers().iter().enumerate() {
            let bound = init_bound(l);
            assert!(a.weights(i).iter().all(|w| w.abs() <= bound));
        }
        // decoder mirrors encoder
        let enc: Vec<_> = a.encoder_layers().iter().map(|l| l.inputs).collect();
        let dec: Vec<_> = a.decoder_layers().iter().rev().map(|l| l.outputs).collect();
        assert_eq!(enc, dec);
    }

    #[test]
    fn init_rejects_bad_dims() {
        assert!(LatentModel::init(45, &[64, 32], 2, 0).is_err());
        assert!(LatentModel::init(45, &[64, 32], 13, 0).is_err());
        assert!(LatentModel::init(45, &[0], 6, 0).is_err());
    }

    #[test]
    fn zero_weight_encoder_returns_bias() {
        let mut m = LatentModel::zeros(5, &[4], 3).unwrap();
        let head = m.encoder_len() - 1;
        m.bias_mut(head).copy_from_slice(&[0.1, 0.2, 0.3, -1.0, -2.0, -3.0]);
        let (mu, lv) = m.encode(&[1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(mu, vec![0.1, 0.2, 0.3]);
        assert_eq!(lv, vec![-1.0, -2.0, -3.0]);
        assert!(m.encode(&[1.0; 4]).is_err());
    }

    #[test]
    fn tiny_model_hand_computed() {
        // encoder 2 -> 2 (tanh) -> 2 (mean, log_var); latent width 1
        let mut m = LatentModel::zeros(2, &[2], 1).unwrap();
        m.weights_mut(0).copy_from_slice(&[0.5, -0.25, 1.0, 2.0]);
        m.bias_mut(0).copy_from_slice(&[0.1, -0.3]);
        m.weights_mut(1).copy_from_slice(&[1.5, -0.5, 0.2, 0.4]);
        m.bias_mut(1).copy_from_slice(&[0.05, -0.1]);
        let x = [1.0, 0.0];
        let h0 = (0.5f64 * 1.0 + -0.25 * 0.0 + 0.1).tanh(); // tanh(0.6)
        let h1 = (1.0f64 * 1.0 + 2.0 * 0.0 - 0.3).tanh(); // tanh(0.7)
        let mu = 1.5 * h0 - 0.5 * h1 + 0.05;
        let lv = 0.2 * h0 + 0.4 * h1 - 0.1;
        let (got_mu, got_lv) = m.encode(&x).unwrap();
        assert!((got_mu[0] - mu).abs() < 1e-12);
        assert!((got_lv[0] - lv).abs() < 1e-12);
        // 0.6 and 0.7 through tanh, by value
        assert!((h0 - 0.537_049_566_998_035_3).abs() < 1e-12);
        assert!((h1 - 0.604_367_777_117_163_6).abs() < 1e-12);
    }

    #[test]
    fn identical_inputs_identical_embeddings() {
        let m = LatentModel::init(10, &[8], 3, 1).unwrap();
        let x = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        assert_eq!(m.encode(&x).unwrap(), m.encode(&x).unwrap());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = LatentModel::init(45, &[16, 8], 4, 3).unwrap();
        let json = m.to_checkpoint().unwrap();
        assert_eq!(LatentModel::from_checkpoint(&json).unwrap(), m);
        assert!(LatentModel::from_checkpoint("{\"input_dim\":1}").is_err());
    }
}
