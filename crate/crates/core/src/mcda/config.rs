use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training recipes sharing one network and one loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Source cross-entropy only. The discriminator still trains as a
    /// passive probe, with reversal coefficient fixed at 0.
    SourceOnly,
    /// Marginal binary discriminator, uniform source sampling.
    Dann,
    /// Categorical discriminator, gated pseudo-labels, balanced source
    /// batches and style augmentation.
    Mcda,
    /// As `Mcda`, but the discriminator sees true target labels.
    McdaOracle,
    /// Cross-entropy on source and on true-labeled targets.
    SupervisedSt,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::SourceOnly,
        Method::Dann,
        Method::Mcda,
        Method::McdaOracle,
        Method::SupervisedSt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SourceOnly => "source_only",
            Method::Dann => "dann",
            Method::Mcda => "mcda",
            Method::McdaOracle => "mcda_oracle",
            Method::SupervisedSt => "supervised_st",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::BadMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub eta0: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Entropy threshold in nats below which a pseudo-label turns one-hot.
    pub gamma: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Per domain side: each step draws this many source and target rows.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub method: Method,
    pub grl_max: f64,
    /// Learning-rate multiplier for the discriminator.
    pub disc_lr_mult: f64,
    /// Class-balanced source batches (MCDA variants only).
    pub balanced: bool,
    /// AdaIN style augmentation of source features (MCDA variants only).
    pub augment: bool,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta0: 0.01,
            alpha: 10.0,
            beta: 0.75,
            gamma: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            method: Method::Mcda,
            grl_max: 1.0,
            disc_lr_mult: 1.0,
            balanced: true,
            augment: true,
            epsilon: 1e-5,
        }
    }
}

/// How source rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Uniform,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    None,
    /// One sigmoid output per class, label-gated.
    Categorical,
    /// Single sigmoid output, class-agnostic.
    Binary,
}

/// Which labels supervise the discriminator on the target side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetSupervision {
    /// Online pseudo-labels from the current classifier, entropy-gated.
    Pseudo { gamma: f64 },
    /// True target labels, one-hot.
    Truth,
}

/// A method's configuration resolved into the switches the loop uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub sampling: Sampling,
    pub augment: bool,
    pub adversary: Adversary,
    pub supervision: TargetSupervision,
    pub target_ce: bool,
    pub grl_max: f64,
}

impl StepPlan {
    /// Whether training consumes target ground truth.
    pub fn reads_target_labels(&self) -> bool {
        self.target_ce || self.supervision == TargetSupervision::Truth
    }
}

impl TrainConfig {
    pub fn for_method(method: Method) -> Self {
        TrainConfig {
            method,
            ..TrainConfig::default()
        }
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) {
            return Err(Error::Invalid(format!("eta0 = {} must be > 0", self.eta0)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Invalid(format!("gamma = {} must be >= 0", self.gamma)));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Invalid("batch_size and epochs must be positive".into()));
        }
        if !(self.disc_lr_mult > 0.0) {
            return Err(Error::Invalid("disc_lr_mult must be positive".into()));
        }
        if !(self.grl_max >= 0.0 && self.epsilon > 0.0 && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::Invalid(
                "grl_max >= 0, epsilon > 0, momentum in [0,1) required".into(),
            ));
        }
        Ok(())
    }

    pub fn plan(&self) -> StepPlan {
        let pseudo = TargetSupervision::Pseudo { gamma: self.gamma };
        let mcda_sampling = if self.balanced {
            Sampling::Balanced
        } else {
            Sampling::Uniform
        };
        match self.method {
            Method::SourceOnly => StepPlan {
                sampling: Sampling::Uniform,
                augment: false,
                adversary: Adversary::Categorical,
                supervision: pseudo,
                target_ce: false,
                grl_max: 0.0,
            },
            Method::Dann => StepPlan {
                sampling: Sampling::Uniform,
                augment: false,
                adversary: Adversary::Binary,
                supervision: pseudo,
                target_ce: false,
                grl_max: self.grl_max,
            },
            Method::Mcda => StepPlan {
                sampling: mcda_sampling,
                augment: self.augment,
                adversary: Adversary::Categorical,
                supervision: pseudo,
                target_ce: false,
                grl_max: self.grl_max,
            },
            Method::McdaOracle => StepPlan {
                sampling: mcda_sampling,
                augment: self.augment,
                adversary: Adversary::Categorical,
                supervision: TargetSupervision::Truth,
                target_ce: false,
                grl_max: self.grl_max,
            },
            Method::SupervisedSt => StepPlan {
                sampling: Sampling::Uniform,
                augment: false,
                adversary: Adversary::None,
                supervision: TargetSupervision::Truth,
                target_ce: true,
                grl_max: 0.0,
            },
        }
    }

    /// η(p) = η₀·(1 + α·p)^(−β)
    pub fn lr(&self, progress: f64) -> f64 {
        lr_schedule(self.eta0, self.alpha, self.beta, progress)
    }

    /// λ(p) = λ_max·(2/(1 + e^(−10p)) − 1)
    pub fn grl_coeff(&self, progress: f64) -> f64 {
        grl_coeff(self.grl_max, progress)
    }
}

pub fn lr_schedule(eta0: f64, alpha: f64, beta: f64, progress: f64) -> f64 {
    eta0 * (1.0 + alpha * progress).powf(-beta)
}

pub fn grl_coeff(grl_max: f64, progress: f64) -> f64 {
    grl_max * (2.0 / (1.0 + (-10.0 * progress).exp()) - 1.0)
}
