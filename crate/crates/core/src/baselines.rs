//! Reference methods on the shared network and the multi-seed harness.

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::mcda::objective::{evaluate, Batch, GradMode, ObjectiveSpec};
use crate::mcda::train::{argmax_rows, predict_dataset, train, TrainOutcome};
use crate::mcda::{Adversary, Method, TargetSupervision, TrainConfig};
use crate::metrics::{bound_check, two_standard_errors, BoundReport};
use crate::nnet::{Grl, ModelBundle, DEFAULT_EPSILON};

/// Optional replacements for [`TrainConfig`] fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub eta0: Option<f64>,
    pub gamma: Option<f64>,
    pub momentum: Option<f64>,
    pub weight_decay: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub grl_max: Option<f64>,
    pub disc_lr_mult: Option<f64>,
    pub balanced: Option<bool>,
    pub augment: Option<bool>,
}

impl ConfigOverrides {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        c.eta0 = self.eta0.unwrap_or(c.eta0);
        c.gamma = self.gamma.unwrap_or(c.gamma);
        c.momentum = self.momentum.unwrap_or(c.momentum);
        c.weight_decay = self.weight_decay.unwrap_or(c.weight_decay);
        c.batch_size = self.batch_size.unwrap_or(c.batch_size);
        c.epochs = self.epochs.unwrap_or(c.epochs);
        c.grl_max = self.grl_max.unwrap_or(c.grl_max);
        c.disc_lr_mult = self.disc_lr_mult.unwrap_or(c.disc_lr_mult);
        c.balanced = self.balanced.unwrap_or(c.balanced);
        c.augment = self.augment.unwrap_or(c.augment);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    #[serde(default)]
    pub overrides: ConfigOverrides,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        MethodSpec {
            method,
            overrides: ConfigOverrides::default(),
        }
    }

    pub fn config(&self, base: &TrainConfig, seed: u64) -> TrainConfig {
        let mut c = self.overrides.apply(base);
        c.method = self.method;
        c.seed = seed;
        c
    }
}

/// Marginal adversarial loss `mean ln D(g(x_s)) + mean ln(1 − D(g(x_t)))`
/// for a single-output discriminator. Only target inputs are taken, so no
/// target label can enter.
pub fn dann_adversarial_loss(bundle: &ModelBundle, source: &Batch, target_x: &[f64], lambda: f64) -> Result<f64> {
    Grl::new(lambda)?;
    if bundle.arch.disc_outputs != 1 {
        return Err(Error::BadArch(format!(
            "marginal loss needs one discriminator output, model has {}",
            bundle.arch.disc_outputs
        )));
    }
    let rows = target_x.len() / bundle.arch.input_len();
    let target = Batch::unlabeled(target_x.to_vec(), rows);
    let spec = ObjectiveSpec {
        augment: false,
        adversary: Adversary::Binary,
        supervision: TargetSupervision::Pseudo { gamma: 0.0 },
        target_ce: false,
        epsilon: DEFAULT_EPSILON,
    };
    Ok(evaluate(bundle, source, &target, None, &spec, None, GradMode::Skip)?
        .losses
        .adv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub method: Method,
    pub seed: u64,
    pub acc_tgt_mean: f64,
    pub acc_tgt_per_domain: Vec<f64>,
    pub bound: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub rows: Vec<SuiteRow>,
}

impl SuiteResult {
    pub fn to_csv(&self) -> String {
        let targets = self.rows.first().map_or(0, |r| r.acc_tgt_per_domain.len());
        let mut out = String::from("method,seed,acc_tgt_mean");
        for j in 1..=targets {
            out.push_str(&format!(",acc_t{j}"));
        }
        out.push_str(",lhs,rhs,holds\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", r.method, r.seed, r.acc_tgt_mean));
            for a in &r.acc_tgt_per_domain {
                out.push_str(&format!(",{a}"));
            }
            out.push_str(&format!(",{},{},{}\n", r.bound.lhs, r.bound.rhs, r.bound.holds));
        }
        out
    }

    /// Mean, sample standard deviation and median of final mean target
    /// accuracy per method, in first-seen order.
    pub fn summary(&self) -> Vec<MethodSummary> {
        let mut order: Vec<Method> = Vec::new();
        for r in &self.rows {
            if !order.contains(&r.method) {
                order.push(r.method);
            }
        }
        order
            .into_iter()
            .map(|m| {
                let mut v: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == m)
                    .map(|r| r.acc_tgt_mean)
                    .collect();
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let std = if v.len() > 1 {
                    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                MethodSummary {
                    method: m,
                    runs: v.len(),
                    mean,
                    std,
                    median: median(&mut v),
                }
            })
            .collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,runs,mean,std,median\n");
        for s in self.summary() {
            out.push_str(&format!("{},{},{},{},{}\n", s.method, s.runs, s.mean, s.std, s.median));
        }
        out
    }
}

/// Median with the upper middle element for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

/// Bound report of a trained model at the two-standard-error tolerance.
pub fn evaluate_bound(bundle: &ModelBundle, ds: &Dataset) -> Result<BoundReport> {
    let (_, probs) = predict_dataset(bundle, ds)?;
    let preds = argmax_rows(&probs, ds.k);
    bound_check(&preds, ds, two_standard_errors(&preds, ds)?)
}

/// Trains every (method, seed) pair in order and scores it.
pub fn run_suite(ds: &Dataset, methods: &[MethodSpec], seeds: &[u64], base: &TrainConfig) -> Result<SuiteResult> {
    run_suite_with(ds, methods, seeds, base, |_, _, _| Ok(()))
}

/// As [`run_suite`], handing each finished run to `on_run`.
pub fn run_suite_with<F>(
    ds: &Dataset,
    methods: &[MethodSpec],
    seeds: &[u64],
    base: &TrainConfig,
    mut on_run: F,
) -> Result<SuiteResult>
where
    F: FnMut(&MethodSpec, u64, &TrainOutcome) -> Result<()>,
{
    if methods.is_empty() {
        return Err(Error::Empty("method list".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Empty("seed list".into()));
    }
    let mut rows = Vec::with_capacity(methods.len() * seeds.len());
    for spec in methods {
        for &seed in seeds {
            let outcome = train(ds, &spec.config(base, seed))?;
            let last = outcome.log.last();
            rows.push(SuiteRow {
                method: spec.method,
                seed,
                acc_tgt_mean: last.acc_tgt_mean,
                acc_tgt_per_domain: last.acc_tgt_per_domain.clone(),
                bound: evaluate_bound(&outcome.bundle, ds)?,
            });
            on_run(spec, seed, &outcome)?;
        }
    }
    Ok(SuiteResult { rows })
}
