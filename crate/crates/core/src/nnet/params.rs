use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::rng;

/// Network shape. Image mode: g1 = stride-2 3×3 conv (in_c → low_width) +
/// ReLU; g2 = stride-2 3×3 conv (low_width → mid_width) + ReLU, flattened,
/// then affine (→ feature_dim) + ReLU. Vector mode: g1 = affine (in_w →
/// low_width) + ReLU, read as a one-channel map over `low_width` positions;
/// g2 = two affine + ReLU layers (→ mid_width → feature_dim).
/// Classifier h is linear; the discriminator is a one-hidden-layer MLP with
/// `disc_outputs` sigmoid heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub mode: Mode,
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub low_width: usize,
    pub mid_width: usize,
    pub feature_dim: usize,
    pub disc_hidden: usize,
    pub classes: usize,
    pub disc_outputs: usize,
}

impl Arch {
    pub fn image(classes: usize) -> Self {
        Arch {
            mode: Mode::Image,
            in_c: 3,
            in_h: 16,
            in_w: 16,
            low_width: 16,
            mid_width: 32,
            feature_dim: 32,
            disc_hidden: 64,
            classes,
            disc_outputs: classes,
        }
    }

    pub fn vector(dim: usize, classes: usize) -> Self {
        Arch {
            mode: Mode::Vector,
            in_c: 1,
            in_h: 1,
            in_w: dim,
            low_width: 32,
            mid_width: 32,
            feature_dim: 32,
            disc_hidden: 64,
            classes,
            disc_outputs: classes,
        }
    }

    /// Default architecture for a dataset's input shape.
    pub fn for_dataset(ds: &Dataset) -> Self {
        match ds.mode {
            Mode::Image => Arch {
                in_c: ds.c,
                in_h: ds.h,
                in_w: ds.w,
                ..Arch::image(ds.k)
            },
            Mode::Vector => Arch::vector(ds.row_len(), ds.k),
        }
    }

    /// Same network with a single-logit (marginal) discriminator.
    pub fn with_binary_discriminator(mut self) -> Self {
        self.disc_outputs = 1;
        self
    }

    pub fn input_len(&self) -> usize {
        self.in_c * self.in_h * self.in_w
    }

    /// Spatial size of the low-level map (image mode).
    pub fn low_hw(&self) -> (usize, usize) {
        (self.in_h.div_ceil(2), self.in_w.div_ceil(2))
    }

    /// Spatial size after the g2 convolution (image mode).
    pub fn mid_hw(&self) -> (usize, usize) {
        let (h, w) = self.low_hw();
        (h.div_ceil(2), w.div_ceil(2))
    }

    /// (channels, positions) of the low-level feature map.
    pub fn low_layout(&self) -> (usize, usize) {
        match self.mode {
            Mode::Image => {
                let (h, w) = self.low_hw();
                (self.low_width, h * w)
            }
            Mode::Vector => (1, self.low_width),
        }
    }

    /// Width of the flattened g2 hidden layer.
    pub fn mid_len(&self) -> usize {
        match self.mode {
            Mode::Image => {
                let (h, w) = self.mid_hw();
                h * w * self.mid_width
            }
            Mode::Vector => self.mid_width,
        }
    }

    pub fn low_len(&self) -> usize {
        let (c, p) = self.low_layout();
        c * p
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.in_c,
            self.in_h,
            self.in_w,
            self.low_width,
            self.mid_width,
            self.feature_dim,
            self.disc_hidden,
            self.classes,
            self.disc_outputs,
        ];
        if dims.contains(&0) {
            return Err(Error::BadArch(format!("zero dimension in {self:?}")));
        }
        if self.disc_outputs != self.classes && self.disc_outputs != 1 {
            return Err(Error::BadArch(format!(
                "discriminator width {} must be k = {} or 1",
                self.disc_outputs, self.classes
            )));
        }
        if self.mode == Mode::Vector && (self.in_c != 1 || self.in_h != 1) {
            return Err(Error::BadArch("vector mode expects c = h = 1".into()));
        }
        if self.mode == Mode::Image && (self.in_h < 2 || self.in_w < 2) {
            return Err(Error::BadArch("image mode needs spatial size >= 2".into()));
        }
        Ok(())
    }

    /// Parameter block layout: (name, shape, fan_in, fan_out).
    pub(crate) fn block_layout(&self) -> Vec<(&'static str, Vec<usize>, usize, usize)> {
        let (g1_w, g1_fans, g2a_w, g2a_fans) = match self.mode {
            Mode::Image => (
                vec![self.low_width, 3, 3, self.in_c],
                (9 * self.in_c, 9 * self.low_width),
                vec![self.mid_width, 3, 3, self.low_width],
                (9 * self.low_width, 9 * self.mid_width),
            ),
            Mode::Vector => (
                vec![self.low_width, self.in_w],
                (self.in_w, self.low_width),
                vec![self.mid_width, self.low_width],
                (self.low_width, self.mid_width),
            ),
        };
        let mid = self.mid_len();
        vec![
            ("g1.weight", g1_w, g1_fans.0, g1_fans.1),
            ("g1.bias", vec![self.low_width], 0, 0),
            ("g2a.weight", g2a_w, g2a_fans.0, g2a_fans.1),
            ("g2a.bias", vec![self.mid_width], 0, 0),
            ("g2b.weight", vec![self.feature_dim, mid], mid, self.feature_dim),
            ("g2b.bias", vec![self.feature_dim], 0, 0),
            (
                "h.weight",
                vec![self.classes, self.feature_dim],
                self.feature_dim,
                self.classes,
            ),
            ("h.bias", vec![self.classes], 0, 0),
            (
                "d1.weight",
                vec![self.disc_hidden, self.feature_dim],
                self.feature_dim,
                self.disc_hidden,
            ),
            ("d1.bias", vec![self.disc_hidden], 0, 0),
            (
                "d2.weight",
                vec![self.disc_outputs, self.disc_hidden],
                self.disc_hidden,
                self.disc_outputs,
            ),
            ("d2.bias", vec![self.disc_outputs], 0, 0),
        ]
    }
}

/// Block indices into [`ModelBundle::blocks`].
pub mod block {
    pub const G1_W: usize = 0;
    pub const G1_B: usize = 1;
    pub const G2A_W: usize = 2;
    pub const G2A_B: usize = 3;
    pub const G2B_W: usize = 4;
    pub const G2B_B: usize = 5;
    pub const H_W: usize = 6;
    pub const H_B: usize = 7;
    pub const D1_W: usize = 8;
    pub const D1_B: usize = 9;
    pub const D2_W: usize = 10;
    pub const D2_B: usize = 11;
    pub const COUNT: usize = 12;

    /// Blocks of the feature extractor g = g2 ∘ g1.
    pub const EXTRACTOR: std::ops::Range<usize> = G1_W..H_W;
    pub const CLASSIFIER: std::ops::Range<usize> = H_W..D1_W;
    pub const DISCRIMINATOR: std::ops::Range<usize> = D1_W..COUNT;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Parameters of g1, g2, h and the discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub arch: Arch,
    pub blocks: Vec<ParamBlock>,
}

impl ModelBundle {
    pub fn block(&self, i: usize) -> &[f64] {
        &self.blocks[i].values
    }

    pub fn num_params(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.values.iter().all(|v| v.is_finite()))
    }

    pub fn bit_eq(&self, other: &ModelBundle) -> bool {
        self.arch == other.arch
            && self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| {
                a.name == b.name
                    && a.shape == b.shape
                    && a.values.len() == b.values.len()
                    && a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Glorot-uniform weights in ±√(6/(fan_in+fan_out)), zero biases.
pub fn init_model(arch: &Arch, seed: u64) -> Result<ModelBundle> {
    arch.validate()?;
    let mut rng = rng::rng_for(seed, rng::stream::INIT);
    let blocks = arch
        .block_layout()
        .into_iter()
        .map(|(name, shape, fan_in, fan_out)| {
            let len: usize = shape.iter().product();
            let values = if fan_in == 0 {
                vec![0.0; len]
            } else {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                (0..len).map(|_| rng.random_range(-limit..=limit)).collect()
            };
            ParamBlock {
                name: name.to_string(),
                shape,
                values,
            }
        })
        .collect();
    Ok(ModelBundle {
        arch: arch.clone(),
        blocks,
    })
}

/// Gradient buffers shaped like a bundle's parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub blocks: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(bundle: &ModelBundle) -> Self {
        Grads {
            blocks: bundle.blocks.iter().map(|b| vec![0.0; b.values.len()]).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|v| v.is_finite())
    }

    pub fn add_scaled(&mut self, other: &Grads, scale: f64) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let arch = Arch::image(4);
        let a = init_model(&arch, 3).unwrap();
        let b = init_model(&arch, 3).unwrap();
        assert!(a.bit_eq(&b));
        for i in [
            block::G1_B,
            block::G2A_B,
            block::G2B_B,
            block::H_B,
            block::D1_B,
            block::D2_B,
        ] {
            assert!(a.block(i).iter().all(|&v| v == 0.0));
        }
        let c = init_model(&arch, 4).unwrap();
        assert!(!a.bit_eq(&c));
    }

    #[test]
    fn init_respects_glorot_limits() {
        let arch = Arch::image(4);
        let m = init_model(&arch, 1).unwrap();
        let limit = (6.0f64 / (27.0 + 144.0)).sqrt();
        assert!(m.block(block::G1_W).iter().all(|v| v.abs() <= limit));
        assert_eq!(m.block(block::G1_W).len(), 16 * 27);
        assert_eq!(m.block(block::G2A_W).len(), 32 * 144);
        assert_eq!(m.block(block::G2B_W).len(), 32 * 4 * 4 * 32);
        assert_eq!(m.block(block::D2_W).len(), 4 * 64);
    }

    #[test]
    fn zero_classes_is_bad_arch() {
        let err = init_model(&Arch::image(0), 1).unwrap_err();
        assert_eq!(err.code(), "E_BAD_ARCH");
    }
}
