use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_prob, Dataset};
use crate::error::{Error, Result};
use crate::rng;

/// Family of class priors used to impose label shift on a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelShift {
    Uniform,
    /// `p_c ∝ ratio^c`
    LongTailed {
        ratio: f64,
    },
    /// `p_c ∝ ratio^(k−1−c)`
    ReverseLongTailed {
        ratio: f64,
    },
    /// `p_c ∝ exp(−(c − center)² / (2·width²))`
    Gaussian {
        center: f64,
        width: f64,
    },
}

impl LabelShift {
    pub fn prior(&self, k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::BadK(k));
        }
        let weights: Vec<f64> = match *self {
            LabelShift::Uniform => vec![1.0; k],
            LabelShift::LongTailed { ratio } | LabelShift::ReverseLongTailed { ratio } => {
                if !(ratio > 0.0 && ratio <= 1.0) {
                    return Err(Error::Invalid(format!("long-tail ratio {ratio} outside (0,1]")));
                }
                let w: Vec<f64> = (0..k).map(|c| ratio.powi(c as i32)).collect();
                if matches!(self, LabelShift::ReverseLongTailed { .. }) {
                    w.into_iter().rev().collect()
                } else {
                    w
                }
            }
            LabelShift::Gaussian { center, width } => {
                if !(width > 0.0 && center.is_finite()) {
                    return Err(Error::Invalid(format!("gaussian width {width} must be > 0")));
                }
                (0..k)
                    .map(|c| (-(c as f64 - center).powi(2) / (2.0 * width * width)).exp())
                    .collect()
            }
        };
        let total: f64 = weights.iter().sum();
        let prior: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        check_prob(&prior, 1e-9)?;
        Ok(prior)
    }
}

/// Resamples the rows of one domain, with replacement, so that its label
/// distribution follows `shift`. The domain keeps its size and its row
/// positions; all other rows are copied through unchanged.
pub fn resample_label_shift(ds: &Dataset, domain_id: usize, shift: &LabelShift, seed: u64) -> Result<Dataset> {
    let prior = shift.prior(ds.k)?;
    let rows = ds.domain_rows(domain_id);
    if rows.is_empty() {
        return Err(Error::EmptyDomain(domain_id));
    }
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); ds.k];
    for &r in &rows {
        pools[ds.labels[r] as usize].push(r);
    }
    for (class, (p, pool)) in prior.iter().zip(&pools).enumerate() {
        if *p > 0.0 && pool.is_empty() {
            return Err(Error::NoSupport {
                domain: domain_id,
                class,
            });
        }
    }

    let mut rng = rng::rng_for(seed, rng::stream::RESAMPLE + domain_id as u64);
    let classes = WeightedIndex::new(&prior).map_err(|e| Error::BadProb(e.to_string()))?;
    let d = ds.row_len();
    let mut out = ds.clone();
    for &dst in &rows {
        let class = classes.sample(&mut rng);
        let pool = &pools[class];
        let src = pool[rng.random_range(0..pool.len())];
        out.data[dst * d..(dst + 1) * d].copy_from_slice(ds.row(src));
        out.labels[dst] = ds.labels[src];
    }
    Ok(out)
}
