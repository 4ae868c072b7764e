//! The joint objective `L = L_cls + L_adv` and its gradients.
//!
//! One forward pass serves every method: g1 runs on `[source; target]`,
//! the style-augmented source rows are appended before g2, h scores all
//! rows, and the discriminator sees `[z_source; z_target]`.

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::nnet::tensor::{sigmoid, softmax_rows};
use crate::nnet::{
    adain_batch, adain_batch_backward, classifier_backward, classifier_forward, disc_backward, disc_forward,
    g1_backward, g1_forward, g2_backward, g2_forward, input_rows, Grads, Grl, ModelBundle,
};

use super::config::{Adversary, StepPlan, TargetSupervision};
use super::labels::{mix_label_unchecked, MixedLabel};

const CLAMP: f64 = 1e-12;

/// Network inputs, with class labels when the caller may see them.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Vec<f64>,
    rows: usize,
    labels: Option<Vec<usize>>,
}

impl Batch {
    pub fn labeled(x: Vec<f64>, labels: Vec<usize>) -> Self {
        Batch {
            x,
            rows: labels.len(),
            labels: Some(labels),
        }
    }

    pub fn unlabeled(x: Vec<f64>, rows: usize) -> Self {
        Batch { x, rows, labels: None }
    }

    pub fn from_rows(ds: &Dataset, rows: &[usize]) -> Self {
        Batch::labeled(
            input_rows(ds, rows),
            rows.iter().map(|&r| ds.labels[r] as usize).collect(),
        )
    }

    pub fn from_rows_unlabeled(ds: &Dataset, rows: &[usize]) -> Self {
        Batch::unlabeled(input_rows(ds, rows), rows.len())
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    fn require_labels(&self, what: &str) -> Result<&[usize]> {
        self.labels()
            .ok_or_else(|| Error::Invalid(format!("{what} batch needs labels")))
    }
}

/// Which parts of the network participate in one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub augment: bool,
    pub adversary: Adversary,
    pub supervision: TargetSupervision,
    pub target_ce: bool,
    pub epsilon: f64,
}

impl ObjectiveSpec {
    pub fn from_plan(plan: &StepPlan, epsilon: f64) -> Self {
        ObjectiveSpec {
            augment: plan.augment,
            adversary: plan.adversary,
            supervision: plan.supervision,
            target_ce: plan.target_ce,
            epsilon,
        }
    }
}

/// Quantities treated as constants by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Detached {
    /// Discriminator labels for the target rows.
    pub target_labels: Vec<MixedLabel>,
    /// g1 maps of the paired target rows supplying AdaIN statistics.
    pub style: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Cls,
    Adv,
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradMode {
    Skip,
    /// True gradient of one term, as checked against finite differences.
    Exact(Term),
    /// Min-max update: D descends `−L_adv`, features receive the reversed
    /// discriminator gradient scaled by `lambda`.
    Train {
        lambda: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct Losses {
    pub cls: f64,
    pub aug: f64,
    pub target_ce: f64,
    pub adv: f64,
}

impl Losses {
    pub fn classification(&self) -> f64 {
        self.cls + self.aug + self.target_ce
    }

    pub fn total(&self) -> f64 {
        self.classification() + self.adv
    }

    pub fn all_finite(&self) -> bool {
        [self.cls, self.aug, self.target_ce, self.adv]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub losses: Losses,
    pub grads: Option<Grads>,
    pub detached: Detached,
    /// Softmax predictions on the target rows, row-major.
    pub target_probs: Vec<f64>,
}

/// Mean cross-entropy of `logits` rows; writes `scale·(p − onehot)` into
/// `dlogits`.
fn cross_entropy(logits: &[f64], labels: &[usize], k: usize, dlogits: &mut [f64]) -> f64 {
    let n = labels.len() as f64;
    let probs = softmax_rows(logits, k);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = &logits[i * k..(i + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        for c in 0..k {
            let target = if c == y { 1.0 } else { 0.0 };
            dlogits[i * k + c] = (probs[i * k + c] - target) / n;
        }
    }
    loss / n
}

/// Log-likelihood term `Σ w·ln D` (or `Σ w·ln(1 − D)` when `negative`)
/// with its gradient w.r.t. the logits. Clamped outputs get zero gradient.
fn weighted_log_sigmoid(logits: &[f64], weights: &[f64], negative: bool, scale: f64, dlogits: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for ((&l, &w), d) in logits.iter().zip(weights).zip(dlogits.iter_mut()) {
        if w == 0.0 {
            *d = 0.0;
            continue;
        }
        let p = sigmoid(l);
        let clamped = p.clamp(CLAMP, 1.0 - CLAMP);
        let interior = clamped == p;
        if negative {
            // ln(1 − σ(l)) = ln σ(−l)
            let value = if interior {
                sigmoid(-l).ln()
            } else {
                (1.0 - clamped).ln()
            };
            total += w * value;
            *d = if interior { -scale * w * p } else { 0.0 };
        } else {
            let value = if interior { p.ln() } else { clamped.ln() };
            total += w * value;
            *d = if interior { scale * w * sigmoid(-l) } else { 0.0 };
        }
    }
    total * scale
}

/// `L_adv` from discriminator logits and its gradient w.r.t. the logits.
/// Rows `0..source.len()` are source, the rest target.
pub fn adversarial_from_logits(
    logits: &[f64],
    outputs: usize,
    source_weights: &[f64],
    target_weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let ns = source_weights.len() / outputs;
    let nt = target_weights.len() / outputs;
    if ns == 0 || nt == 0 || logits.len() != (ns + nt) * outputs {
        return Err(Error::Shape(format!(
            "{} logits for {ns}+{nt} rows of width {outputs}",
            logits.len()
        )));
    }
    let split = ns * outputs;
    let mut grad = vec![0.0; logits.len()];
    let (gs, gt) = grad.split_at_mut(split);
    let src = weighted_log_sigmoid(&logits[..split], source_weights, false, 1.0 / ns as f64, gs);
    let tgt = weighted_log_sigmoid(&logits[split..], target_weights, true, 1.0 / nt as f64, gt);
    Ok((src + tgt, grad))
}

fn check_batch(bundle: &ModelBundle, b: &Batch, what: &str) -> Result<()> {
    let a = &bundle.arch;
    if b.is_empty() {
        return Err(Error::Empty(format!("{what} batch")));
    }
    if b.x.len() != b.len() * a.input_len() {
        return Err(Error::Shape(format!(
            "{what} batch has {} values for {} rows of {}",
            b.x.len(),
            b.len(),
            a.input_len()
        )));
    }
    if let Some(labels) = b.labels() {
        if labels.len() != b.len() {
            return Err(Error::Shape(format!(
                "{what} batch has {} labels for {} rows",
                labels.len(),
                b.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= a.classes) {
            return Err(Error::Shape(format!("{what} label {y} with {} classes", a.classes)));
        }
    }
    Ok(())
}

/// Evaluates the objective on one source/target batch pair.
///
/// `pairing[i]` names the target row whose style augments source row `i`.
/// When `detached` is given, its labels and style maps are used instead of
/// being recomputed from the current parameters.
pub fn evaluate(
    bundle: &ModelBundle,
    source: &Batch,
    target: &Batch,
    pairing: Option<&[usize]>,
    spec: &ObjectiveSpec,
    detached: Option<&Detached>,
    mode: GradMode,
) -> Result<Evaluation> {
    check_batch(bundle, source, "source")?;
    check_batch(bundle, target, "target")?;
    let a = &bundle.arch;
    let (k, f) = (a.classes, a.feature_dim);
    let (bs, bt) = (source.len(), target.len());
    let source_labels = source.require_labels("source")?;
    let nb = bs + bt;
    let low = a.low_len();
    let (channels, positions) = a.low_layout();

    let mut x = Vec::with_capacity(nb * a.input_len());
    x.extend_from_slice(&source.x);
    x.extend_from_slice(&target.x);
    let (zlow, g1_cache) = g1_forward(bundle, &x, nb);

    let mut g2_in = zlow.clone();
    let mut n2 = nb;
    let mut style_used = None;
    let mut adain_cache = None;
    if spec.augment {
        let style = match detached.and_then(|d| d.style.clone()) {
            Some(s) => s,
            None => {
                let pairing = pairing.ok_or_else(|| Error::Invalid("augmentation needs a pairing".into()))?;
                if pairing.len() != bs || pairing.iter().any(|&j| j >= bt) {
                    return Err(Error::Shape(format!(
                        "pairing of length {} for {bs}x{bt}",
                        pairing.len()
                    )));
                }
                let mut s = Vec::with_capacity(bs * low);
                for &j in pairing {
                    s.extend_from_slice(&zlow[(bs + j) * low..(bs + j + 1) * low]);
                }
                s
            }
        };
        if style.len() != bs * low {
            return Err(Error::Shape(format!("style maps of length {}", style.len())));
        }
        let (zst, cache) = adain_batch(&zlow[..bs * low], &style, bs, positions, channels, spec.epsilon);
        g2_in.extend(zst);
        n2 += bs;
        adain_cache = Some(cache);
        style_used = Some(style);
    }

    let (z, g2_cache) = g2_forward(bundle, &g2_in, n2);
    let logits = classifier_forward(bundle, &z, n2);
    let target_probs = softmax_rows(&logits[bs * k..nb * k], k);

    let mut losses = Losses::default();
    let mut dlogits = vec![0.0; n2 * k];
    losses.cls = cross_entropy(&logits[..bs * k], source_labels, k, &mut dlogits[..bs * k]);
    if spec.augment {
        losses.aug = cross_entropy(&logits[nb * k..], source_labels, k, &mut dlogits[nb * k..]);
    }
    if spec.target_ce {
        let labels = target.require_labels("target")?;
        losses.target_ce = cross_entropy(&logits[bs * k..nb * k], labels, k, &mut dlogits[bs * k..nb * k]);
    }

    let target_labels = match detached {
        Some(d) => {
            if d.target_labels.len() != bt {
                return Err(Error::Shape(format!(
                    "{} detached labels for {bt} rows",
                    d.target_labels.len()
                )));
            }
            d.target_labels.clone()
        }
        None => match spec.supervision {
            TargetSupervision::Pseudo { gamma } => target_probs
                .chunks_exact(k)
                .map(|p| mix_label_unchecked(p, gamma))
                .collect(),
            TargetSupervision::Truth if spec.adversary == Adversary::None => Vec::new(),
            TargetSupervision::Truth => target
                .require_labels("target")?
                .iter()
                .map(|&y| MixedLabel::onehot(k, y))
                .collect(),
        },
    };

    let mut adv_parts = None;
    if spec.adversary != Adversary::None {
        let outputs = a.disc_outputs;
        let (d_logits, d_cache) = disc_forward(bundle, &z[..nb * f], nb);
        let (source_w, target_w): (Vec<f64>, Vec<f64>) = match spec.adversary {
            Adversary::Binary => (vec![1.0; bs], vec![1.0; bt]),
            _ => (
                source_labels
                    .iter()
                    .flat_map(|&y| MixedLabel::onehot(k, y).vector)
                    .collect(),
                target_labels.iter().flat_map(|m| m.vector.iter().copied()).collect(),
            ),
        };
        let (adv, d_grad) = adversarial_from_logits(&d_logits, outputs, &source_w, &target_w)?;
        losses.adv = adv;
        adv_parts = Some((d_grad, d_cache));
    }

    let detached = Detached {
        target_labels,
        style: style_used,
    };
    if !losses.all_finite() {
        return Err(Error::NonFinite(format!("losses {losses:?}")));
    }
    let (cls_on, adv_on, adv_sign, lambda) = match mode {
        GradMode::Skip => {
            return Ok(Evaluation {
                losses,
                grads: None,
                detached,
                target_probs,
            })
        }
        GradMode::Exact(Term::Cls) => (true, false, 1.0, None),
        GradMode::Exact(Term::Adv) => (false, true, 1.0, None),
        GradMode::Exact(Term::Total) => (true, true, 1.0, None),
        GradMode::Train { lambda } => (true, true, -1.0, Some(Grl::new(lambda)?)),
    };

    let mut grads = Grads::zeros_like(bundle);
    if !cls_on {
        dlogits.iter_mut().for_each(|d| *d = 0.0);
    }
    let mut dz = classifier_backward(bundle, &z, &dlogits, n2, &mut grads);
    if let (true, Some((d_grad, d_cache))) = (adv_on, adv_parts.as_ref()) {
        let seed: Vec<f64> = d_grad.iter().map(|g| adv_sign * g).collect();
        let dz_d = disc_backward(bundle, d_cache, &seed, &mut grads);
        let into_features = match &lambda {
            Some(grl) if grl.lambda() == 0.0 => None,
            Some(grl) => Some(grl.backward(&dz_d)),
            None => Some(dz_d),
        };
        if let Some(extra) = into_features {
            for (acc, v) in dz[..nb * f].iter_mut().zip(extra) {
                *acc += v;
            }
        }
    }
    let dg2_in = g2_backward(bundle, &g2_cache, &dz, &mut grads);
    let mut dzlow = dg2_in[..nb * low].to_vec();
    if let Some(cache) = &adain_cache {
        let dcontent = adain_batch_backward(cache, &dg2_in[nb * low..]);
        for (acc, v) in dzlow[..bs * low].iter_mut().zip(dcontent) {
            *acc += v;
        }
    }
    g1_backward(bundle, &g1_cache, &dzlow, &mut grads);
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(Evaluation {
        losses,
        grads: Some(grads),
        detached,
        target_probs,
    })
}

fn adversarial_spec(bundle: &ModelBundle) -> ObjectiveSpec {
    ObjectiveSpec {
        augment: false,
        adversary: if bundle.arch.disc_outputs == 1 {
            Adversary::Binary
        } else {
            Adversary::Categorical
        },
        supervision: TargetSupervision::Truth,
        target_ce: false,
        epsilon: crate::nnet::DEFAULT_EPSILON,
    }
}

/// Categorical adversarial loss with one-hot source labels and the given
/// target labels. The value does not depend on `lambda`, which only scales
/// the reversed gradient.
pub fn adversarial_loss(
    bundle: &ModelBundle,
    source: &Batch,
    target: &Batch,
    target_labels: &[MixedLabel],
    lambda: f64,
) -> Result<f64> {
    Grl::new(lambda)?;
    if bundle.arch.disc_outputs != bundle.arch.classes {
        return Err(Error::BadArch("categorical loss needs one output per class".into()));
    }
    let detached = Detached {
        target_labels: target_labels.to_vec(),
        style: None,
    };
    let spec = adversarial_spec(bundle);
    Ok(
        evaluate(bundle, source, target, None, &spec, Some(&detached), GradMode::Skip)?
            .losses
            .adv,
    )
}

/// `CE(h(g(x_s)), y_s) + CE(h(g2(adain(g1(x_s), g1(x_t[π])))), y_s)`.
pub fn classification_loss(
    bundle: &ModelBundle,
    source: &Batch,
    target: &Batch,
    pairing: &[usize],
    epsilon: f64,
) -> Result<f64> {
    let spec = ObjectiveSpec {
        augment: true,
        adversary: Adversary::None,
        supervision: TargetSupervision::Truth,
        target_ce: false,
        epsilon,
    };
    Ok(
        evaluate(bundle, source, target, Some(pairing), &spec, None, GradMode::Skip)?
            .losses
            .classification(),
    )
}
