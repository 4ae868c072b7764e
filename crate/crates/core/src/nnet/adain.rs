//! Instance statistics and adaptive instance normalization.
//!
//! Standalone maps use channel-major storage. The batched kernels used in
//! training operate on position-major rows (`positions × channels` per
//! sample), the layout the convolution layers produce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// One sample's low-level features, `channels × height × width`,
/// channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Empty("feature map with a zero dimension".into()));
        }
        if values.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {channels}×{height}×{width} map",
                values.len()
            )));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.positions();
        &self.values[c * p..(c + 1) * p]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Per-channel spatial mean and `sqrt(population variance + epsilon)`.
pub fn channel_stats(z: &FeatureMap, epsilon: f64) -> Result<ChannelStats> {
    if z.positions() == 0 {
        return Err(Error::Empty("no spatial positions".into()));
    }
    let (mu, sigma) = (0..z.channels).map(|c| mean_sigma(z.channel(c), epsilon)).unzip();
    Ok(ChannelStats { mu, sigma })
}

fn mean_sigma(xs: &[f64], epsilon: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
    (mu, (var + epsilon).sqrt())
}

/// Renormalizes `content` to the channel statistics of `style`:
/// `σ_t · (z_s − μ_s) / σ_s + μ_t`, with ε inside both deviations.
pub fn adain(content: &FeatureMap, style: &FeatureMap, epsilon: f64) -> Result<FeatureMap> {
    if (content.channels, content.height, content.width) != (style.channels, style.height, style.width) {
        return Err(Error::Shape("content and style layouts differ".into()));
    }
    let s = channel_stats(content, epsilon)?;
    let t = channel_stats(style, epsilon)?;
    let p = content.positions();
    let mut values = Vec::with_capacity(content.values.len());
    for c in 0..content.channels {
        let scale = t.sigma[c] / s.sigma[c];
        values.extend(
            content.values[c * p..(c + 1) * p]
                .iter()
                .map(|x| scale * (x - s.mu[c]) + t.mu[c]),
        );
    }
    FeatureMap::new(content.channels, content.height, content.width, values)
}

/// Saved tensors for the backward pass of [`adain_batch`].
#[derive(Debug, Clone)]
pub struct AdainCache {
    positions: usize,
    channels: usize,
    normalized: Vec<f64>,
    sigma_content: Vec<f64>,
    sigma_style: Vec<f64>,
}

/// Batched AdaIN on position-major rows. `style` row `b` supplies the
/// statistics for `content` row `b`. Style statistics are constants for
/// the backward pass.
pub fn adain_batch(
    content: &[f64],
    style: &[f64],
    batch: usize,
    positions: usize,
    channels: usize,
    epsilon: f64,
) -> (Vec<f64>, AdainCache) {
    let len = positions * channels;
    let mut out = vec![0.0; batch * len];
    let mut normalized = vec![0.0; batch * len];
    let mut sigma_content = vec![0.0; batch * channels];
    let mut sigma_style = vec![0.0; batch * channels];
    let mut buf = vec![0.0; positions];
    for b in 0..batch {
        let zs = &content[b * len..(b + 1) * len];
        let zt = &style[b * len..(b + 1) * len];
        for c in 0..channels {
            gather(zs, c, channels, &mut buf);
            let (mu_s, sig_s) = mean_sigma(&buf, epsilon);
            gather(zt, c, channels, &mut buf);
            let (mu_t, sig_t) = mean_sigma(&buf, epsilon);
            sigma_content[b * channels + c] = sig_s;
            sigma_style[b * channels + c] = sig_t;
            for p in 0..positions {
                let at = b * len + p * channels + c;
                let xhat = (content[at] - mu_s) / sig_s;
                normalized[at] = xhat;
                out[at] = sig_t * xhat + mu_t;
            }
        }
    }
    (
        out,
        AdainCache {
            positions,
            channels,
            normalized,
            sigma_content,
            sigma_style,
        },
    )
}

/// Gradient of [`adain_batch`] with respect to the content rows, flowing
/// through the content mean and deviation.
pub fn adain_batch_backward(cache: &AdainCache, grad_out: &[f64]) -> Vec<f64> {
    let (positions, channels) = (cache.positions, cache.channels);
    let len = positions * channels;
    let batch = grad_out.len() / len;
    let n = positions as f64;
    let mut grad_in = vec![0.0; grad_out.len()];
    for b in 0..batch {
        for c in 0..channels {
            let sig_s = cache.sigma_content[b * channels + c];
            let sig_t = cache.sigma_style[b * channels + c];
            let (mut mean_g, mut mean_gx) = (0.0, 0.0);
            for p in 0..positions {
                let at = b * len + p * channels + c;
                let g = sig_t * grad_out[at];
                mean_g += g;
                mean_gx += g * cache.normalized[at];
            }
            mean_g /= n;
            mean_gx /= n;
            for p in 0..positions {
                let at = b * len + p * channels + c;
                let g = sig_t * grad_out[at];
                grad_in[at] = (g - mean_g - cache.normalized[at] * mean_gx) / sig_s;
            }
        }
    }
    grad_in
}

fn gather(row: &[f64], channel: usize, channels: usize, buf: &mut [f64]) {
    for (p, v) in buf.iter_mut().enumerate() {
        *v = row[p * channels + channel];
    }
}
