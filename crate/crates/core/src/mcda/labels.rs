use serde::{Deserialize, Serialize};

use crate::datagen::check_prob;
use crate::error::Result;
use crate::nnet::tensor::argmax;

const PROB_TOL: f64 = 1e-6;

/// Shannon entropy in nats, with `0·ln 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    check_prob(p, PROB_TOL)?;
    Ok(entropy_unchecked(p))
}

pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Discriminator label for one target sample: the soft prediction, or its
/// one-hot argmax once the prediction is confident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedLabel {
    pub vector: Vec<f64>,
    pub is_onehot: bool,
    pub entropy: f64,
}

impl MixedLabel {
    pub fn onehot(k: usize, class: usize) -> Self {
        let mut vector = vec![0.0; k];
        vector[class] = 1.0;
        MixedLabel {
            vector,
            is_onehot: true,
            entropy: 0.0,
        }
    }
}

/// One-hot at the argmax (lowest index on ties) when `H(p̂) < γ`,
/// otherwise `p̂` unchanged.
pub fn mix_label(p_hat: &[f64], gamma: f64) -> Result<MixedLabel> {
    check_prob(p_hat, PROB_TOL)?;
    Ok(mix_label_unchecked(p_hat, gamma))
}

pub(crate) fn mix_label_unchecked(p_hat: &[f64], gamma: f64) -> MixedLabel {
    let h = entropy_unchecked(p_hat);
    if h < gamma {
        let mut m = MixedLabel::onehot(p_hat.len(), argmax(p_hat));
        m.entropy = h;
        m
    } else {
        MixedLabel {
            is_onehot: p_hat.iter().filter(|&&v| v == 1.0).count() == 1,
            vector: p_hat.to_vec(),
            entropy: h,
        }
    }
}
