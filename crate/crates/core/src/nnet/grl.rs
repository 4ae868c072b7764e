use crate::error::{Error, Result};

/// Gradient reversal: identity forward, `−λ·g` backward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grl {
    lambda: f64,
}

impl Grl {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Invalid(format!("gradient reversal coefficient {lambda} < 0")));
        }
        Ok(Grl { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    pub fn backward(&self, upstream: &[f64]) -> Vec<f64> {
        upstream.iter().map(|g| -self.lambda * g).collect()
    }
}
