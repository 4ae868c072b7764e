//! Synthetic multi-domain datasets with controllable style and label priors.
//!
//! Domain 0 is always the labeled source; every other domain is a target.
//! Domain ids are carried for evaluation only, training code never groups
//! targets by them.

mod format;
mod gaussian;
mod shapes;
mod shift;

pub use format::{load_dataset, read_dataset, save_dataset, write_dataset, MAGIC, VERSION};
pub use gaussian::make_gaussian_domains;
pub use shapes::{make_blended_shapes, render_shape, SHAPE_NAMES};
pub use shift::{resample_label_shift, LabelShift};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IMAGE_SIDE: usize = 16;
pub const IMAGE_CHANNELS: usize = 3;
pub const MIN_CLASSES: usize = 2;
pub const MAX_CLASSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Image,
    Vector,
}

impl Mode {
    pub fn tag(self) -> u8 {
        match self {
            Mode::Image => 0,
            Mode::Vector => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Mode::Image),
            1 => Some(Mode::Vector),
            _ => None,
        }
    }
}

/// Appearance of one domain.
///
/// In image mode the palettes color background and shape, `noise` is the
/// standard deviation of per-pixel Gaussian noise and `gradient` the peak
/// amplitude of a linear brightness ramp. In vector mode the same record is
/// read as an affine map, see [`make_gaussian_domains`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Style {
    pub background: [f64; 3],
    pub foreground: [f64; 3],
    pub noise: f64,
    pub gradient: f64,
}

impl Style {
    /// Identity style for vector mode: no rotation, translation or scaling.
    pub fn neutral() -> Self {
        Style {
            background: [0.0; 3],
            foreground: [0.0; 3],
            noise: 0.0,
            gradient: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if !self.background.iter().all(in_unit) || !self.foreground.iter().all(in_unit) {
            return Err(Error::Invalid("palette entries must lie in [0,1]".into()));
        }
        if !(self.noise >= 0.0 && self.gradient >= 0.0) {
            return Err(Error::Invalid("noise and gradient must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain_id: usize,
    pub style: Style,
    pub n_samples: usize,
    pub label_prior: Vec<f64>,
}

impl DomainSpec {
    pub fn new(domain_id: usize, style: Style, n_samples: usize, label_prior: Vec<f64>) -> Self {
        DomainSpec {
            domain_id,
            style,
            n_samples,
            label_prior,
        }
    }
}

/// Checks that `p` is a probability vector: non-negative, summing to one
/// within `tol`.
pub fn check_prob(p: &[f64], tol: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::BadProb("empty vector".into()));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::BadProb(format!("negative or non-finite entry in {p:?}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(Error::BadProb(format!("entries sum to {sum}")));
    }
    Ok(())
}

pub(crate) fn validate_specs(specs: &[DomainSpec], k: usize) -> Result<()> {
    if !(MIN_CLASSES..=MAX_CLASSES).contains(&k) {
        return Err(Error::BadK(k));
    }
    if specs.is_empty() {
        return Err(Error::EmptySpecs);
    }
    for (i, spec) in specs.iter().enumerate() {
        if spec.domain_id != i {
            return Err(Error::Invalid(format!(
                "domain spec at position {i} has domain_id {}",
                spec.domain_id
            )));
        }
        if spec.n_samples == 0 {
            return Err(Error::Invalid(format!("domain {i} has n_samples = 0")));
        }
        if spec.label_prior.len() != k {
            return Err(Error::Shape(format!(
                "domain {i} prior has {} entries, expected {k}",
                spec.label_prior.len()
            )));
        }
        check_prob(&spec.label_prior, 1e-9)?;
        spec.style.validate()?;
    }
    Ok(())
}

/// Dense sample-major dataset. Image rows are stored channel-major
/// (`c·h·w` values per sample), matching the on-disk layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub mode: Mode,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub num_domains: usize,
    pub data: Vec<f32>,
    pub labels: Vec<u16>,
    pub domain_ids: Vec<u16>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let d = self.row_len();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn num_targets(&self) -> usize {
        self.num_domains.saturating_sub(1)
    }

    /// Row indices belonging to `domain`, in storage order.
    pub fn domain_rows(&self, domain: usize) -> Vec<usize> {
        self.domain_ids
            .iter()
            .enumerate()
            .filter(|(_, &d)| d as usize == domain)
            .map(|(i, _)| i)
            .collect()
    }

    /// All target rows (domain id ≥ 1), i.e. the blended target.
    pub fn target_rows(&self) -> Vec<usize> {
        self.domain_ids
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.domain_ids.len() != n || self.data.len() != n * self.row_len() {
            return Err(Error::Shape("array lengths disagree with header".into()));
        }
        if self.row_len() == 0 || self.k == 0 || self.num_domains == 0 {
            return Err(Error::Shape("zero dimension in header".into()));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset entry".into()));
        }
        if self.mode == Mode::Image && self.data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid("image entries must lie in [0,1]".into()));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l as usize >= self.k) {
            return Err(Error::Invalid(format!("class label {l} >= k = {}", self.k)));
        }
        if let Some(d) = self.domain_ids.iter().find(|&&d| d as usize >= self.num_domains) {
            return Err(Error::Invalid(format!(
                "domain id {d} >= domain count {}",
                self.num_domains
            )));
        }
        Ok(())
    }

    /// Bitwise equality, including the float payload.
    pub fn bit_eq(&self, other: &Dataset) -> bool {
        self.mode == other.mode
            && (self.c, self.h, self.w, self.k, self.num_domains)
                == (other.c, other.h, other.w, other.k, other.num_domains)
            && self.labels == other.labels
            && self.domain_ids == other.domain_ids
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Empirical class frequencies of one domain.
pub fn label_distribution(ds: &Dataset, domain_id: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; ds.k];
    let mut total = 0usize;
    for (&l, &d) in ds.labels.iter().zip(&ds.domain_ids) {
        if d as usize == domain_id {
            counts[l as usize] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyDomain(domain_id));
    }
    Ok(counts.into_iter().map(|c| c as f64 / total as f64).collect())
}

/// L1 distance between two distributions given as floats.
pub fn l1_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// Per-class counts of one domain.
pub fn label_counts(ds: &Dataset, domain_id: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; ds.k];
    for (&l, &d) in ds.labels.iter().zip(&ds.domain_ids) {
        if d as usize == domain_id {
            counts[l as usize] += 1;
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::EmptyDomain(domain_id));
    }
    Ok(counts)
}

/// L1 distance between the empirical distributions of two count vectors,
/// evaluated as one exact rational `Σ|a_i·m − b_i·n| / (n·m)` and rounded
/// once, so e.g. counts (1,1) vs (4,1) give exactly `0.6`.
pub fn l1_from_counts(a: &[u64], b: &[u64]) -> f64 {
    let n: u64 = a.iter().sum();
    let m: u64 = b.iter().sum();
    let num: u128 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as u128 * m as u128).abs_diff(y as u128 * n as u128))
        .sum();
    let den = n as u128 * m as u128;
    ratio_to_f64(num, den)
}

/// Correctly rounded `num / den` for operands beyond 2^53.
fn ratio_to_f64(num: u128, den: u128) -> f64 {
    let g = gcd(num, den);
    let (num, den) = (num / g, den / g);
    if num < (1 << 53) && den < (1 << 53) {
        return num as f64 / den as f64;
    }
    // Wide operands: scale into 64-bit range, accepting one extra rounding.
    let shift = (128 - den.leading_zeros()).saturating_sub(53);
    (num >> shift) as f64 / (den >> shift) as f64
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Recipe for a blended-target benchmark: a source and several targets,
/// each with its own style and label prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub mode: Mode,
    pub samples_per_domain: usize,
    pub classes: usize,
    /// Input dimension in vector mode; ignored for images.
    pub dim: usize,
    pub source_shift: LabelShift,
    pub target_shifts: Vec<LabelShift>,
    /// Source style first, then one per target.
    pub styles: Vec<Style>,
}

impl BenchmarkSpec {
    /// The standard blended-shapes benchmark: a long-tailed source and three
    /// targets, two reverse long-tailed and one with a Gaussian prior over
    /// class indices.
    pub fn standard(samples_per_domain: usize) -> Self {
        BenchmarkSpec {
            mode: Mode::Image,
            samples_per_domain,
            classes: 4,
            dim: 0,
            source_shift: LabelShift::LongTailed { ratio: STANDARD_RATIO },
            target_shifts: standard_target_shifts(),
            styles: benchmark_styles().to_vec(),
        }
    }

    /// Two-dimensional Gaussian clusters with the same label shifts, for
    /// quick runs.
    pub fn standard_vector(samples_per_domain: usize) -> Self {
        BenchmarkSpec {
            mode: Mode::Vector,
            samples_per_domain,
            classes: 4,
            dim: 2,
            source_shift: LabelShift::LongTailed { ratio: STANDARD_RATIO },
            target_shifts: standard_target_shifts(),
            styles: vector_styles().to_vec(),
        }
    }

    pub fn build(&self, seed: u64) -> Result<Dataset> {
        if self.styles.len() != self.target_shifts.len() + 1 {
            return Err(Error::Invalid(format!(
                "{} styles for {} domains",
                self.styles.len(),
                self.target_shifts.len() + 1
            )));
        }
        let k = self.classes;
        let uniform = vec![1.0 / k as f64; k];
        let specs: Vec<DomainSpec> = self
            .styles
            .iter()
            .enumerate()
            .map(|(d, style)| {
                let prior = if d == 0 {
                    self.source_shift.prior(k)?
                } else {
                    uniform.clone()
                };
                Ok(DomainSpec::new(d, style.clone(), self.samples_per_domain, prior))
            })
            .collect::<Result<_>>()?;
        let mut ds = match self.mode {
            Mode::Image => make_blended_shapes(&specs, k, seed)?,
            Mode::Vector => make_gaussian_domains(&specs, k, self.dim, seed)?,
        };
        for (j, shift) in self.target_shifts.iter().enumerate() {
            ds = resample_label_shift(&ds, j + 1, shift, seed)?;
        }
        Ok(ds)
    }
}

const STANDARD_RATIO: f64 = 0.7;

fn standard_target_shifts() -> Vec<LabelShift> {
    vec![
        LabelShift::ReverseLongTailed { ratio: STANDARD_RATIO },
        LabelShift::ReverseLongTailed { ratio: STANDARD_RATIO },
        LabelShift::Gaussian {
            center: 2.0,
            width: 1.0,
        },
    ]
}

/// [`BenchmarkSpec::standard`] built with `seed`.
pub fn standard_benchmark(samples_per_domain: usize, seed: u64) -> Result<Dataset> {
    BenchmarkSpec::standard(samples_per_domain).build(seed)
}

/// Styles of the standard benchmark, source first. Targets keep the
/// source's contrast polarity in every channel and differ in palette.
pub fn benchmark_styles() -> [Style; 4] {
    let style = |background, foreground| Style {
        background,
        foreground,
        noise: 0.06,
        gradient: 0.0,
    };
    [
        style([0.10, 0.10, 0.12], [0.90, 0.90, 0.85]),
        style([0.35, 0.30, 0.25], [0.65, 0.60, 0.55]),
        style([0.05, 0.25, 0.45], [0.55, 0.95, 0.75]),
        style([0.40, 0.10, 0.30], [0.80, 0.50, 0.50]),
    ]
}

/// Vector-mode styles: rotation, scale and translation per domain.
pub fn vector_styles() -> [Style; 4] {
    let style = |background, foreground, noise, gradient| Style {
        background,
        foreground,
        noise,
        gradient,
    };
    [
        Style::neutral(),
        style([0.0; 3], [0.5, 0.2, 0.0], 0.2, 0.10),
        style([0.0; 3], [0.1, 0.6, 0.0], 0.1, 0.15),
        style([0.2; 3], [0.0, 0.0, 0.2], 0.3, 0.05),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(labels: Vec<u16>, domains: Vec<u16>) -> Dataset {
        let n = labels.len();
        Dataset {
            mode: Mode::Vector,
            c: 1,
            h: 1,
            w: 2,
            k: 2,
            num_domains: 2,
            data: vec![0.0; n * 2],
            labels,
            domain_ids: domains,
        }
    }

    #[test]
    fn label_distribution_counts() {
        let ds = tiny(vec![0, 0, 1, 1, 0, 0, 0, 1], vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(label_distribution(&ds, 0).unwrap(), vec![0.5, 0.5]);
        assert_eq!(label_distribution(&ds, 1).unwrap(), vec![0.75, 0.25]);
    }

    #[test]
    fn label_distribution_empty_domain() {
        let ds = tiny(vec![0, 1], vec![0, 0]);
        let err = label_distribution(&ds, 1).unwrap_err();
        assert_eq!(err.code(), "E_EMPTY_DOMAIN");
    }

    #[test]
    fn l1_distance_example() {
        assert!((l1_distance(&[0.5, 0.5], &[0.8, 0.2]) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn l1_from_counts_is_exact() {
        assert_eq!(l1_from_counts(&[1, 1], &[4, 1]), 0.6);
        assert_eq!(l1_from_counts(&[3, 0], &[0, 7]), 2.0);
        assert_eq!(l1_from_counts(&[2, 2], &[5, 5]), 0.0);
    }

    #[test]
    fn validate_catches_bad_label() {
        let mut ds = tiny(vec![0, 1], vec![0, 1]);
        ds.labels[1] = 5;
        assert!(ds.validate().is_err());
    }

    #[test]
    fn benchmark_spec_checks_style_count() {
        let mut spec = BenchmarkSpec::standard_vector(10);
        spec.styles.pop();
        assert_eq!(spec.build(0).unwrap_err().code(), "E_INVALID");
    }

    #[test]
    fn vector_benchmark_follows_priors() {
        let ds = BenchmarkSpec::standard_vector(4000).build(3).unwrap();
        assert_eq!((ds.mode, ds.num_domains, ds.len()), (Mode::Vector, 4, 16_000));
        let spec = BenchmarkSpec::standard_vector(0);
        let priors = std::iter::once(&spec.source_shift).chain(&spec.target_shifts);
        for (d, shift) in priors.enumerate() {
            let emp = label_distribution(&ds, d).unwrap();
            assert!(
                l1_distance(&emp, &shift.prior(4).unwrap()) < 0.05,
                "domain {d}: {emp:?}"
            );
        }
    }
}
