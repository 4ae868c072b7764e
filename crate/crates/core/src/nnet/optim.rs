use super::params::{Grads, ModelBundle};

/// SGD with heavy-ball momentum and L2 weight decay:
/// `v ← μ·v + (g + wd·θ)`, `θ ← θ − η·v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Grads,
    block_scale: Vec<f64>,
}

impl Sgd {
    pub fn new(bundle: &ModelBundle, momentum: f64, weight_decay: f64) -> Self {
        Sgd {
            momentum,
            weight_decay,
            velocity: Grads::zeros_like(bundle),
            block_scale: vec![1.0; bundle.blocks.len()],
        }
    }

    /// Multiplies the learning rate of the given parameter blocks.
    pub fn with_block_scale(mut self, blocks: std::ops::Range<usize>, scale: f64) -> Self {
        for b in blocks {
            self.block_scale[b] = scale;
        }
        self
    }

    pub fn step(&mut self, bundle: &mut ModelBundle, grads: &Grads, lr: f64) {
        for (((block, g), v), &scale) in bundle
            .blocks
            .iter_mut()
            .zip(&grads.blocks)
            .zip(&mut self.velocity.blocks)
            .zip(&self.block_scale)
        {
            let lr = lr * scale;
            for ((theta, &gi), vi) in block.values.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = self.momentum * *vi + gi + self.weight_decay * *theta;
                *theta -= lr * *vi;
            }
        }
    }
}
