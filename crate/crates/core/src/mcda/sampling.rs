use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Source row indices grouped by class.
#[derive(Debug, Clone)]
pub struct ClassPools {
    pools: Vec<Vec<usize>>,
}

impl ClassPools {
    pub fn from_rows(ds: &Dataset, rows: &[usize]) -> Self {
        let mut pools = vec![Vec::new(); ds.k];
        for &r in rows {
            pools[ds.labels[r] as usize].push(r);
        }
        ClassPools { pools }
    }

    pub fn from_counts(counts: &[usize]) -> Self {
        let mut next = 0;
        let pools = counts
            .iter()
            .map(|&c| {
                let pool = (next..next + c).collect();
                next += c;
                pool
            })
            .collect();
        ClassPools { pools }
    }

    pub fn classes(&self) -> usize {
        self.pools.len()
    }

    pub fn pool(&self, class: usize) -> &[usize] {
        &self.pools[class]
    }
}

/// Class-balanced batch: classes are visited round-robin in a freshly
/// shuffled order, and each visit draws a row of that class uniformly with
/// replacement.
pub fn balanced_source_batch(pools: &ClassPools, rng: &mut Rng, batch_size: usize) -> Result<Vec<usize>> {
    if let Some(empty) = pools.pools.iter().position(|p| p.is_empty()) {
        return Err(Error::EmptyClass(empty));
    }
    if batch_size == 0 {
        return Err(Error::Invalid("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..pools.classes()).collect();
    order.shuffle(rng);
    Ok((0..batch_size)
        .map(|i| {
            let pool = &pools.pools[order[i % order.len()]];
            pool[rng.random_range(0..pool.len())]
        })
        .collect())
}

/// Uniform draw with replacement.
pub fn uniform_batch(rows: &[usize], rng: &mut Rng, batch_size: usize) -> Vec<usize> {
    (0..batch_size).map(|_| rows[rng.random_range(0..rows.len())]).collect()
}
