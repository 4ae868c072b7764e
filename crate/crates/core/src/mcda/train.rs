use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::metrics::pseudo_label_stats;
use crate::nnet::tensor::argmax;
use crate::nnet::{block, features_and_probs, init_model, input_rows, Arch, ModelBundle, Sgd};
use crate::rng::{mix, rng_for, stream, Rng};

use super::config::{Adversary, Method, Sampling, StepPlan, TrainConfig};
use super::objective::{evaluate, Batch, GradMode, Losses, ObjectiveSpec};
use super::sampling::{balanced_source_batch, uniform_batch, ClassPools};

/// One optimizer step's diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub progress: f64,
    pub lr: f64,
    pub grl: f64,
    pub losses: Losses,
    pub gated: usize,
}

/// Per-epoch training curve point. `epoch = 0` is the untrained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub acc_src: f64,
    pub acc_tgt_mean: f64,
    pub acc_tgt_per_domain: Vec<f64>,
    pub pl_acc: Option<f64>,
    pub gated_frac: f64,
    pub loss_cls: f64,
    pub loss_aug: f64,
    pub loss_adv: f64,
    pub lr: f64,
    pub grl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub method: Method,
    pub seed: u64,
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn last(&self) -> &EpochRecord {
        self.records.last().expect("log holds the initial record")
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(method: Method, seed: u64, text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Config {
                    line: i + 1,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<EpochRecord>>>()?;
        if records.is_empty() {
            return Err(Error::Empty("training log".into()));
        }
        Ok(TrainLog { method, seed, records })
    }

    pub fn summary(&self) -> serde_json::Value {
        let last = self.last();
        serde_json::json!({
            "method": self.method,
            "seed": self.seed,
            "epochs": last.epoch,
            "acc_src": last.acc_src,
            "acc_tgt_mean": last.acc_tgt_mean,
            "acc_tgt_per_domain": last.acc_tgt_per_domain,
            "pl_acc": last.pl_acc,
            "gated_frac": last.gated_frac,
        })
    }
}

/// Model, optimizer state and the resolved method switches.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub bundle: ModelBundle,
    optimizer: Sgd,
    config: TrainConfig,
    plan: StepPlan,
    spec: ObjectiveSpec,
}

impl Trainer {
    /// Fresh model for `arch`, with a binary discriminator for DANN.
    pub fn new(arch: Arch, config: TrainConfig) -> Result<Self> {
        let arch = match config.method {
            Method::Dann => arch.with_binary_discriminator(),
            _ => arch,
        };
        let bundle = init_model(&arch, mix(config.seed, stream::INIT))?;
        Trainer::from_bundle(bundle, config)
    }

    pub fn from_bundle(bundle: ModelBundle, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let plan = config.plan();
        let wanted = match plan.adversary {
            Adversary::Binary => 1,
            _ => bundle.arch.classes,
        };
        if bundle.arch.disc_outputs != wanted {
            return Err(Error::BadArch(format!(
                "{} needs {wanted} discriminator outputs, model has {}",
                config.method, bundle.arch.disc_outputs
            )));
        }
        Ok(Trainer {
            optimizer: Sgd::new(&bundle, config.momentum, config.weight_decay)
                .with_block_scale(block::DISCRIMINATOR, config.disc_lr_mult),
            spec: ObjectiveSpec::from_plan(&plan, config.epsilon),
            bundle,
            config,
            plan,
        })
    }

    pub fn plan(&self) -> &StepPlan {
        &self.plan
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// One min-max update at training progress `progress ∈ [0, 1]`.
    pub fn step(
        &mut self,
        source: &Batch,
        target: &Batch,
        pairing: Option<&[usize]>,
        progress: f64,
    ) -> Result<StepRecord> {
        let lr = self.config.lr(progress);
        let grl = if self.plan.grl_max == 0.0 {
            0.0
        } else {
            self.config.grl_coeff(progress)
        };
        let eval = evaluate(
            &self.bundle,
            source,
            target,
            pairing,
            &self.spec,
            None,
            GradMode::Train { lambda: grl },
        )?;
        let grads = eval.grads.as_ref().expect("train mode yields gradients");
        self.optimizer.step(&mut self.bundle, grads, lr);
        if !self.bundle.all_finite() {
            return Err(Error::NonFinite(format!("parameters after step at p={progress}")));
        }
        Ok(StepRecord {
            progress,
            lr,
            grl,
            losses: eval.losses,
            gated: eval.detached.target_labels.iter().filter(|m| m.is_onehot).count(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub log: TrainLog,
}

/// Features and class probabilities for every dataset row.
pub fn predict_dataset(bundle: &ModelBundle, ds: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows: Vec<usize> = (0..ds.len()).collect();
    features_and_probs(bundle, &input_rows(ds, &rows), ds.len())
}

pub fn argmax_rows(probs: &[f64], k: usize) -> Vec<usize> {
    probs.chunks_exact(k).map(argmax).collect()
}

fn epoch_record(bundle: &ModelBundle, ds: &Dataset, gamma: f64, epoch: usize) -> Result<EpochRecord> {
    let (_, probs) = predict_dataset(bundle, ds)?;
    let preds = argmax_rows(&probs, ds.k);
    let mut right = vec![0usize; ds.num_domains];
    let mut total = vec![0usize; ds.num_domains];
    for ((&p, &y), &d) in preds.iter().zip(&ds.labels).zip(&ds.domain_ids) {
        total[d as usize] += 1;
        right[d as usize] += (p == y as usize) as usize;
    }
    let acc: Vec<f64> = right.iter().zip(&total).map(|(&r, &t)| r as f64 / t as f64).collect();
    let target_rows = ds.target_rows();
    let target_probs: Vec<f64> = target_rows
        .iter()
        .flat_map(|&r| probs[r * ds.k..(r + 1) * ds.k].iter().copied())
        .collect();
    let target_labels: Vec<usize> = target_rows.iter().map(|&r| ds.labels[r] as usize).collect();
    let pl = pseudo_label_stats(&target_probs, ds.k, &target_labels, gamma)?;
    let acc_tgt_per_domain = acc[1..].to_vec();
    Ok(EpochRecord {
        epoch,
        acc_src: acc[0],
        acc_tgt_mean: acc_tgt_per_domain.iter().sum::<f64>() / acc_tgt_per_domain.len() as f64,
        acc_tgt_per_domain,
        pl_acc: pl.gated_accuracy,
        gated_frac: pl.gated_fraction,
        loss_cls: 0.0,
        loss_aug: 0.0,
        loss_adv: 0.0,
        lr: 0.0,
        grl: 0.0,
    })
}

fn check_domains(ds: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
    let source = ds.domain_rows(0);
    if source.is_empty() {
        return Err(Error::EmptyDomain(0));
    }
    for d in 1..ds.num_domains.max(2) {
        if !ds.domain_ids.iter().any(|&x| x as usize == d) {
            return Err(Error::EmptyDomain(d));
        }
    }
    Ok((source, ds.target_rows()))
}

pub fn train(ds: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(ds, config, |_, _| Ok(()))
}

/// Trains and calls `on_epoch` after every epoch (including epoch 0).
pub fn train_with<F>(ds: &Dataset, config: &TrainConfig, mut on_epoch: F) -> Result<TrainOutcome>
where
    F: FnMut(&EpochRecord, &ModelBundle) -> Result<()>,
{
    let (source_rows, target_rows) = check_domains(ds)?;
    let mut trainer = Trainer::new(Arch::for_dataset(ds), config.clone())?;
    let plan = *trainer.plan();
    let pools = ClassPools::from_rows(ds, &source_rows);
    if plan.sampling == Sampling::Balanced {
        if let Some(empty) = (0..ds.k).find(|&c| pools.pool(c).is_empty()) {
            return Err(Error::EmptyClass(empty));
        }
        if config.batch_size < ds.k {
            return Err(Error::Invalid(format!(
                "balanced batches need batch_size >= {} classes",
                ds.k
            )));
        }
    }

    let mut rng: Rng = rng_for(config.seed, stream::TRAIN);
    let steps_per_epoch = source_rows.len().div_ceil(config.batch_size);
    let total = (steps_per_epoch * config.epochs) as f64;
    let mut records = Vec::with_capacity(config.epochs + 1);
    let mut first = epoch_record(&trainer.bundle, ds, config.gamma, 0)?;
    first.lr = config.lr(0.0);
    first.grl = if plan.grl_max == 0.0 {
        0.0
    } else {
        config.grl_coeff(0.0)
    };
    on_epoch(&first, &trainer.bundle)?;
    records.push(first);

    for epoch in 1..=config.epochs {
        let mut sums = Losses::default();
        let mut last = None;
        for s in 0..steps_per_epoch {
            let progress = ((epoch - 1) * steps_per_epoch + s) as f64 / total;
            let src_idx = match plan.sampling {
                Sampling::Balanced => balanced_source_batch(&pools, &mut rng, config.batch_size)?,
                Sampling::Uniform => uniform_batch(&source_rows, &mut rng, config.batch_size),
            };
            let tgt_idx = uniform_batch(&target_rows, &mut rng, config.batch_size);
            let pairing: Option<Vec<usize>> = plan
                .augment
                .then(|| (0..src_idx.len()).map(|_| rng.random_range(0..tgt_idx.len())).collect());
            let source = Batch::from_rows(ds, &src_idx);
            let target = if plan.reads_target_labels() {
                Batch::from_rows(ds, &tgt_idx)
            } else {
                Batch::from_rows_unlabeled(ds, &tgt_idx)
            };
            let rec = trainer
                .step(&source, &target, pairing.as_deref(), progress)
                .map_err(|e| match e {
                    Error::NonFinite(msg) => Error::NonFinite(format!("epoch {epoch} step {s}: {msg}")),
                    other => other,
                })?;
            sums.cls += rec.losses.cls + rec.losses.target_ce;
            sums.aug += rec.losses.aug;
            sums.adv += rec.losses.adv;
            last = Some(rec);
        }
        let last = last.expect("at least one step per epoch");
        let n = steps_per_epoch as f64;
        let mut record = epoch_record(&trainer.bundle, ds, config.gamma, epoch)?;
        record.loss_cls = sums.cls / n;
        record.loss_aug = sums.aug / n;
        record.loss_adv = sums.adv / n;
        record.lr = last.lr;
        record.grl = last.grl;
        on_epoch(&record, &trainer.bundle)?;
        records.push(record);
    }
    Ok(TrainOutcome {
        bundle: trainer.bundle,
        log: TrainLog {
            method: config.method,
            seed: config.seed,
            records,
        },
    })
}
