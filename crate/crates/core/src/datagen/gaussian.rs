use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{validate_specs, Dataset, DomainSpec, Mode, Style};
use crate::error::{Error, Result};
use crate::rng;

pub const CENTER_RADIUS: f64 = 3.0;
pub const CLUSTER_STD: f64 = 0.5;

/// Canonical class centers: evenly spaced on a circle of radius
/// [`CENTER_RADIUS`] in the first two coordinates.
pub fn canonical_center(class: usize, k: usize, dim: usize) -> Vec<f64> {
    let angle = 2.0 * PI * class as f64 / k as f64;
    let mut c = vec![0.0; dim];
    c[0] = CENTER_RADIUS * angle.cos();
    c[1] = CENTER_RADIUS * angle.sin();
    c
}

/// Affine map a vector-mode domain applies to canonical samples:
/// `x ↦ scale · R(angle) · x + shift`, where `R` rotates the first two
/// coordinates. Derived from the style record as
/// angle = π·gradient, scale = 1 + noise, shift_i = 2·(fg_i − bg_i) for i < 3.
pub fn style_affine(style: &Style, dim: usize) -> (f64, f64, Vec<f64>) {
    let angle = PI * style.gradient;
    let scale = 1.0 + style.noise;
    let mut shift = vec![0.0; dim];
    for (i, s) in shift.iter_mut().enumerate().take(3) {
        *s = 2.0 * (style.foreground[i] - style.background[i]);
    }
    (angle, scale, shift)
}

pub fn apply_affine(x: &mut [f64], angle: f64, scale: f64, shift: &[f64]) {
    let (s, c) = angle.sin_cos();
    let (a, b) = (x[0], x[1]);
    x[0] = c * a - s * b;
    x[1] = s * a + c * b;
    for (v, t) in x.iter_mut().zip(shift) {
        *v = scale * *v + t;
    }
}

/// Vector-mode analog of the shapes benchmark: `k` isotropic Gaussian
/// clusters per domain, moved by each domain's affine style.
pub fn make_gaussian_domains(specs: &[DomainSpec], k: usize, dim: usize, seed: u64) -> Result<Dataset> {
    validate_specs(specs, k)?;
    if !(2..=64).contains(&dim) {
        return Err(Error::Invalid(format!("vector dimension {dim} outside 2..=64")));
    }
    let n: usize = specs.iter().map(|s| s.n_samples).sum();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut domain_ids = Vec::with_capacity(n);
    let centers: Vec<Vec<f64>> = (0..k).map(|c| canonical_center(c, k, dim)).collect();

    for spec in specs {
        let mut rng = rng::rng_for(seed, rng::stream::DOMAIN + spec.domain_id as u64);
        let classes = WeightedIndex::new(&spec.label_prior).map_err(|e| Error::BadProb(e.to_string()))?;
        let (angle, scale, shift) = style_affine(&spec.style, dim);
        let mut x = vec![0.0; dim];
        for _ in 0..spec.n_samples {
            let class = classes.sample(&mut rng);
            for (xi, ci) in x.iter_mut().zip(&centers[class]) {
                let z: f64 = rng.sample(StandardNormal);
                *xi = ci + CLUSTER_STD * z;
            }
            apply_affine(&mut x, angle, scale, &shift);
            data.extend(x.iter().map(|&v| v as f32));
            labels.push(class as u16);
            domain_ids.push(spec.domain_id as u16);
        }
    }

    Ok(Dataset {
        mode: Mode::Vector,
        c: 1,
        h: 1,
        w: dim,
        k,
        num_domains: specs.len(),
        data,
        labels,
        domain_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class_means(ds: &Dataset, domain: usize) -> Vec<Vec<f64>> {
        let d = ds.row_len();
        let mut sums = vec![vec![0.0; d]; ds.k];
        let mut counts = vec![0usize; ds.k];
        for r in ds.domain_rows(domain) {
            let l = ds.labels[r] as usize;
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(ds.row(r)) {
                *s += v as f64;
            }
        }
        sums.into_iter()
            .zip(counts)
            .map(|(s, c)| s.into_iter().map(|v| v / c as f64).collect())
            .collect()
    }

    #[test]
    fn identity_style_keeps_canonical_centers() {
        let spec = DomainSpec::new(0, Style::neutral(), 4000, vec![0.5, 0.5]);
        let ds = make_gaussian_domains(&[spec], 2, 2, 3).unwrap();
        let means = class_means(&ds, 0);
        for (c, m) in means.iter().enumerate() {
            let want = canonical_center(c, 2, 2);
            for (a, b) in m.iter().zip(&want) {
                assert!((a - b).abs() < 0.05, "class {c}: {m:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn same_seed_same_arrays() {
        let spec = DomainSpec::new(0, Style::neutral(), 50, vec![0.5, 0.5]);
        let a = make_gaussian_domains(std::slice::from_ref(&spec), 2, 5, 9).unwrap();
        let b = make_gaussian_domains(&[spec], 2, 5, 9).unwrap();
        assert!(a.bit_eq(&b));
    }

    #[test]
    fn half_turn_negates_centers() {
        let mut rotated = Style::neutral();
        rotated.gradient = 1.0;
        let (angle, scale, shift) = style_affine(&rotated, 2);
        for c in 0..3 {
            let mut x = canonical_center(c, 3, 2);
            let want: Vec<f64> = x.iter().map(|v| -v).collect();
            apply_affine(&mut x, angle, scale, &shift);
            for (a, b) in x.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // Same statement on generated data, up to sampling noise.
        let specs = vec![
            DomainSpec::new(0, Style::neutral(), 3000, vec![0.5, 0.5]),
            DomainSpec::new(1, rotated, 3000, vec![0.5, 0.5]),
        ];
        let ds = make_gaussian_domains(&specs, 2, 2, 4).unwrap();
        let m1 = class_means(&ds, 1);
        for (c, m) in m1.iter().enumerate() {
            let want = canonical_center(c, 2, 2);
            assert!((m[0] + want[0]).abs() < 0.06 && (m[1] + want[1]).abs() < 0.06);
        }
    }

    #[test]
    fn rejects_bad_dimension() {
        let spec = DomainSpec::new(0, Style::neutral(), 5, vec![0.5, 0.5]);
        assert!(make_gaussian_domains(&[spec], 2, 1, 0).is_err());
    }
}
