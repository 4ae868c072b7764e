//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use serde::Serialize;

use super::params::{Grads, ModelBundle};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step. Kept small so perturbations rarely straddle
    /// a ReLU kink.
    pub step: f64,
    /// Check at most this many coordinates per block (all when `None`).
    pub coords_per_block: Option<usize>,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-7,
            coords_per_block: None,
            seed: 0,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockCheck {
    pub name: String,
    pub checked: usize,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockCheck>,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Relative error `‖a − n‖ / max(‖a‖ + ‖n‖, 1e-6)` of one block.
fn block_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().cloned()) + norm(&mut numeric.iter().cloned());
    diff / scale.max(1e-6)
}

/// Checks several scalar objectives at once. `objectives` evaluates every
/// objective at the given parameters; `analytic[i]` is the claimed
/// gradient of objective `i` at `bundle`.
pub fn grad_check_multi<F>(
    mut objectives: F,
    analytic: &[Grads],
    bundle: &ModelBundle,
    opts: &GradCheckOptions,
) -> Result<Vec<GradCheckReport>>
where
    F: FnMut(&ModelBundle) -> Result<Vec<f64>>,
{
    let mut rng = rng::rng_for(opts.seed, 0x6C);
    let mut probe = bundle.clone();
    let n_obj = analytic.len();
    let mut per_obj: Vec<Vec<BlockCheck>> = vec![Vec::new(); n_obj];

    for (bi, block) in bundle.blocks.iter().enumerate() {
        let len = block.values.len();
        let coords: Vec<usize> = match opts.coords_per_block {
            Some(n) if n < len => {
                let mut c = sample(&mut rng, len, n).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..len).collect(),
        };
        let mut numeric = vec![Vec::with_capacity(coords.len()); n_obj];
        for &i in &coords {
            let orig = block.values[i];
            probe.blocks[bi].values[i] = orig + opts.step;
            let plus = finite(objectives(&probe)?)?;
            probe.blocks[bi].values[i] = orig - opts.step;
            let minus = finite(objectives(&probe)?)?;
            probe.blocks[bi].values[i] = orig;
            for o in 0..n_obj {
                numeric[o].push((plus[o] - minus[o]) / (2.0 * opts.step));
            }
        }
        for o in 0..n_obj {
            let picked: Vec<f64> = coords.iter().map(|&i| analytic[o].blocks[bi][i]).collect();
            if picked.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("analytic gradient of {}", block.name)));
            }
            per_obj[o].push(BlockCheck {
                name: block.name.clone(),
                checked: coords.len(),
                rel_error: block_error(&picked, &numeric[o]),
            });
        }
    }

    Ok(per_obj
        .into_iter()
        .map(|blocks| {
            let max_rel_error = blocks.iter().map(|b| b.rel_error).fold(0.0, f64::max);
            GradCheckReport {
                blocks,
                max_rel_error,
                passed: max_rel_error < opts.tolerance,
            }
        })
        .collect())
}

/// Single-objective form of [`grad_check_multi`].
pub fn grad_check<F>(
    mut objective: F,
    analytic: &Grads,
    bundle: &ModelBundle,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&ModelBundle) -> Result<f64>,
{
    let mut reports = grad_check_multi(
        |m| Ok(vec![objective(m)?]),
        std::slice::from_ref(analytic),
        bundle,
        opts,
    )?;
    Ok(reports.remove(0))
}

fn finite(values: Vec<f64>) -> Result<Vec<f64>> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(values)
    } else {
        Err(Error::NonFinite("objective value during finite differences".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{init_model, Arch};

    fn quadratic(m: &ModelBundle) -> f64 {
        m.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| blk.values.iter().enumerate().map(move |(i, v)| (b, i, v)))
            .map(|(b, i, v)| 0.5 * (1.0 + ((b + i) % 5) as f64) * (v - 0.1) * (v - 0.1))
            .sum()
    }

    fn quadratic_grad(m: &ModelBundle) -> Grads {
        Grads {
            blocks: m
                .blocks
                .iter()
                .enumerate()
                .map(|(b, blk)| {
                    blk.values
                        .iter()
                        .enumerate()
                        .map(|(i, v)| (1.0 + ((b + i) % 5) as f64) * (v - 0.1))
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn quadratic_is_nearly_exact() {
        let m = init_model(&Arch::vector(3, 2), 1).unwrap();
        let report = grad_check(
            |m| Ok(quadratic(m)),
            &quadratic_grad(&m),
            &m,
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-7, "{report:?}");
        assert!(report.passed);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let m = init_model(&Arch::vector(3, 2), 1).unwrap();
        let mut g = quadratic_grad(&m);
        g.blocks[0][0] += 1.0;
        let report = grad_check(|m| Ok(quadratic(m)), &g, &m, &GradCheckOptions::default()).unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn nan_objective_is_reported() {
        let m = init_model(&Arch::vector(3, 2), 1).unwrap();
        let err = grad_check(
            |_| Ok(f64::NAN),
            &Grads::zeros_like(&m),
            &m,
            &GradCheckOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.code(), "E_NONFINITE");
    }
}
