use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{validate_specs, Dataset, DomainSpec, Mode, Style, IMAGE_CHANNELS, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const SHAPE_NAMES: [&str; 8] = ["disk", "square", "cross", "triangle", "ring", "diamond", "x", "frame"];

const SUPERSAMPLE: usize = 3;
const PALETTE_JITTER: f64 = 0.05;

/// Renders procedural 16×16×3 shape images, one domain at a time, with each
/// domain drawn from its own derived seed. Rows are ordered by domain id,
/// then by draw order.
pub fn make_blended_shapes(specs: &[DomainSpec], k: usize, seed: u64) -> Result<Dataset> {
    validate_specs(specs, k)?;
    let n: usize = specs.iter().map(|s| s.n_samples).sum();
    let row = IMAGE_CHANNELS * IMAGE_SIDE * IMAGE_SIDE;
    let mut data = Vec::with_capacity(n * row);
    let mut labels = Vec::with_capacity(n);
    let mut domain_ids = Vec::with_capacity(n);

    for spec in specs {
        let mut rng = rng::rng_for(seed, rng::stream::DOMAIN + spec.domain_id as u64);
        let classes = WeightedIndex::new(&spec.label_prior).map_err(|e| Error::BadProb(e.to_string()))?;
        for _ in 0..spec.n_samples {
            let class = classes.sample(&mut rng);
            data.extend(render_shape(class, &spec.style, &mut rng));
            labels.push(class as u16);
            domain_ids.push(spec.domain_id as u16);
        }
    }

    Ok(Dataset {
        mode: Mode::Image,
        c: IMAGE_CHANNELS,
        h: IMAGE_SIDE,
        w: IMAGE_SIDE,
        k,
        num_domains: specs.len(),
        data,
        labels,
        domain_ids,
    })
}

/// Coverage test in the shape's local frame, where the shape spans roughly
/// the unit disk.
fn inside(class: usize, u: f64, v: f64) -> bool {
    let cheb = u.abs().max(v.abs());
    match class {
        0 => u * u + v * v <= 1.0,
        1 => cheb <= 0.8,
        2 => (u.abs() <= 0.3 && v.abs() <= 1.0) || (v.abs() <= 0.3 && u.abs() <= 1.0),
        3 => v <= 0.75 && v >= -1.0 + 1.75 * u.abs() / 0.95,
        4 => {
            let r2 = u * u + v * v;
            (0.3025..=1.0).contains(&r2)
        }
        5 => u.abs() + v.abs() <= 1.0,
        6 => ((u - v).abs() <= 0.4 || (u + v).abs() <= 0.4) && cheb <= 0.9,
        _ => (0.5..=0.85).contains(&cheb),
    }
}

/// Renders one sample in channel-major order. Position, size, orientation,
/// palette and ramp direction are jittered per sample.
pub fn render_shape(class: usize, style: &Style, rng: &mut Rng) -> Vec<f32> {
    let side = IMAGE_SIDE as f64;
    let mid = (side - 1.0) / 2.0;
    let cx = mid + rng.random_range(-1.5..=1.5);
    let cy = mid + rng.random_range(-1.5..=1.5);
    let radius = rng.random_range(3.8..=5.5);
    let theta: f64 = rng.random_range(-0.35..=0.35);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let (sin_t, cos_t) = theta.sin_cos();
    let (sin_p, cos_p) = phi.sin_cos();

    let mut bg = [0.0; 3];
    let mut fg = [0.0; 3];
    for ch in 0..3 {
        bg[ch] = style.background[ch] + rng.random_range(-PALETTE_JITTER..=PALETTE_JITTER);
        fg[ch] = style.foreground[ch] + rng.random_range(-PALETTE_JITTER..=PALETTE_JITTER);
    }

    let plane = IMAGE_SIDE * IMAGE_SIDE;
    let mut out = vec![0f32; IMAGE_CHANNELS * plane];
    let sub = 1.0 / SUPERSAMPLE as f64;
    for y in 0..IMAGE_SIDE {
        for x in 0..IMAGE_SIDE {
            let mut hits = 0usize;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let px = x as f64 - 0.5 + (sx as f64 + 0.5) * sub - cx;
                    let py = y as f64 - 0.5 + (sy as f64 + 0.5) * sub - cy;
                    let u = (cos_t * px + sin_t * py) / radius;
                    let v = (-sin_t * px + cos_t * py) / radius;
                    hits += inside(class, u, v) as usize;
                }
            }
            let cover = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
            let ramp = 0.5 * style.gradient * ((x as f64 - mid) * cos_p + (y as f64 - mid) * sin_p) / mid;
            for ch in 0..3 {
                let noise: f64 = rng.sample(StandardNormal);
                let value = bg[ch] * (1.0 - cover) + fg[ch] * cover + ramp + style.noise * noise;
                out[ch * plane + y * IMAGE_SIDE + x] = value.clamp(0.0, 1.0) as f32;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::label_distribution;

    fn spec(id: usize, style: Style, n: usize, k: usize) -> DomainSpec {
        DomainSpec::new(id, style, n, vec![1.0 / k as f64; k])
    }

    fn styles() -> [Style; 4] {
        crate::datagen::benchmark_styles()
    }

    #[test]
    fn deterministic_bytes() {
        let s = styles();
        let specs: Vec<_> = (0..3).map(|i| spec(i, s[i].clone(), 100, 4)).collect();
        let a = make_blended_shapes(&specs, 4, 7).unwrap();
        let b = make_blended_shapes(&specs, 4, 7).unwrap();
        assert_eq!(a.len(), 300);
        assert!(a.bit_eq(&b));
        a.validate().unwrap();
    }

    #[test]
    fn bad_k_and_empty_specs() {
        let s = styles();
        assert_eq!(
            make_blended_shapes(&[spec(0, s[0].clone(), 10, 4)], 0, 1)
                .unwrap_err()
                .code(),
            "E_BAD_K"
        );
        assert_eq!(make_blended_shapes(&[], 4, 1).unwrap_err().code(), "E_EMPTY_SPECS");
    }

    #[test]
    fn domain_streams_are_independent() {
        // Domain 1 renders identically whether or not domain 0 is larger.
        let s = styles();
        let a = make_blended_shapes(&[spec(0, s[0].clone(), 5, 4), spec(1, s[1].clone(), 20, 4)], 4, 3).unwrap();
        let b = make_blended_shapes(&[spec(0, s[0].clone(), 9, 4), spec(1, s[1].clone(), 20, 4)], 4, 3).unwrap();
        let rows_a = a.domain_rows(1);
        let rows_b = b.domain_rows(1);
        for (&i, &j) in rows_a.iter().zip(&rows_b) {
            assert_eq!(a.row(i), b.row(j));
        }
    }

    #[test]
    fn label_prior_fidelity() {
        let s = styles();
        let prior = vec![0.4, 0.3, 0.2, 0.1];
        let ds = make_blended_shapes(&[DomainSpec::new(0, s[0].clone(), 10_000, prior.clone())], 4, 11).unwrap();
        let emp = label_distribution(&ds, 0).unwrap();
        assert!(crate::datagen::l1_distance(&emp, &prior) < 0.05, "{emp:?}");
    }

    #[test]
    fn style_separation() {
        let s = styles();
        let specs: Vec<_> = (0..4).map(|i| spec(i, s[i].clone(), 200, 4)).collect();
        let ds = make_blended_shapes(&specs, 4, 5).unwrap();
        let plane = 256;
        let means: Vec<[f64; 3]> = (0..4)
            .map(|d| {
                let rows = ds.domain_rows(d);
                let mut m = [0.0; 3];
                for &r in &rows {
                    for (ch, acc) in m.iter_mut().enumerate() {
                        *acc += ds.row(r)[ch * plane..(ch + 1) * plane]
                            .iter()
                            .map(|&v| v as f64)
                            .sum::<f64>()
                            / plane as f64;
                    }
                }
                m.map(|v| v / rows.len() as f64)
            })
            .collect();
        for a in 0..4 {
            for b in a + 1..4 {
                let gap = (0..3).map(|ch| (means[a][ch] - means[b][ch]).abs()).fold(0.0, f64::max);
                let noise = s[a].noise.max(s[b].noise);
                assert!(gap > noise, "domains {a},{b}: gap {gap} <= noise {noise}");
            }
        }
    }

    #[test]
    fn every_class_renders_distinct_mask() {
        let flat = Style {
            background: [0.0; 3],
            foreground: [1.0; 3],
            noise: 0.0,
            gradient: 0.0,
        };
        let masks: Vec<Vec<f32>> = (0..8)
            .map(|c| render_shape(c, &flat, &mut rng::rng_for(1, 1)))
            .collect();
        for a in 0..8 {
            assert!(masks[a].iter().any(|&v| v > 0.5), "class {a} empty");
            for b in a + 1..8 {
                assert_ne!(masks[a], masks[b], "classes {a} and {b} coincide");
            }
        }
    }
}
