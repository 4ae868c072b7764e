//! Error rates, bound terms and feature-space diagnostics.

use serde::{Deserialize, Serialize};

use crate::datagen::{l1_from_counts, label_counts, Dataset};
use crate::error::{Error, Result};
use crate::mcda::labels::{entropy, entropy_unchecked};
use crate::nnet::tensor::argmax;

fn check_aligned(preds: &[usize], ds: &Dataset) -> Result<()> {
    if preds.len() != ds.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} rows",
            preds.len(),
            ds.len()
        )));
    }
    Ok(())
}

/// 0/1 error rate of every domain, source first.
fn domain_errors(preds: &[usize], ds: &Dataset) -> Result<Vec<f64>> {
    check_aligned(preds, ds)?;
    let mut wrong = vec![0u64; ds.num_domains];
    let mut total = vec![0u64; ds.num_domains];
    for ((&p, &y), &d) in preds.iter().zip(&ds.labels).zip(&ds.domain_ids) {
        total[d as usize] += 1;
        wrong[d as usize] += (p != y as usize) as u64;
    }
    total
        .iter()
        .zip(&wrong)
        .enumerate()
        .map(|(d, (&t, &w))| {
            if t == 0 {
                Err(Error::EmptyDomain(d))
            } else {
                Ok(w as f64 / t as f64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainErrors {
    pub eps_src: f64,
    pub eps_tgt: Vec<f64>,
    /// Unweighted mean over target domains.
    pub eps_mean: f64,
}

pub fn per_target_errors(preds: &[usize], ds: &Dataset) -> Result<DomainErrors> {
    let errs = domain_errors(preds, ds)?;
    if errs.len() < 2 {
        return Err(Error::EmptyDomain(1));
    }
    let eps_tgt = errs[1..].to_vec();
    Ok(DomainErrors {
        eps_src: errs[0],
        eps_mean: eps_tgt.iter().sum::<f64>() / eps_tgt.len() as f64,
        eps_tgt,
    })
}

/// Per-class error rates `P(Ŷ ≠ Y | Y = y)` over the given rows.
fn class_errors<'a>(pairs: impl Iterator<Item = (usize, usize)> + 'a, k: usize, domain: usize) -> Result<Vec<f64>> {
    let mut wrong = vec![0u64; k];
    let mut total = vec![0u64; k];
    for (p, y) in pairs {
        if y >= k {
            return Err(Error::Shape(format!("label {y} with {k} classes")));
        }
        total[y] += 1;
        wrong[y] += (p != y) as u64;
    }
    (0..k)
        .map(|c| {
            if total[c] == 0 {
                Err(Error::NoSupport { domain, class: c })
            } else {
                Ok(wrong[c] as f64 / total[c] as f64)
            }
        })
        .collect()
}

fn domain_class_errors(preds: &[usize], ds: &Dataset, domain: usize) -> Result<Vec<f64>> {
    let pairs = preds
        .iter()
        .zip(&ds.labels)
        .zip(&ds.domain_ids)
        .filter(move |(_, &d)| d as usize == domain)
        .map(|((&p, &y), _)| (p, y as usize));
    class_errors(pairs, ds.k, domain)
}

/// Balanced error rate: the worst per-class error. Labels index `0..k`.
pub fn ber(preds: &[usize], labels: &[usize], k: usize) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let rates = class_errors(preds.iter().copied().zip(labels.iter().copied()), k, 0)?;
    Ok(rates.into_iter().fold(0.0, f64::max))
}

/// `(1/K)·Σ_j max_y |P_S(err | y) − P_Tj(err | y)|`.
pub fn delta_btce(preds: &[usize], ds: &Dataset) -> Result<f64> {
    check_aligned(preds, ds)?;
    let src = domain_class_errors(preds, ds, 0)?;
    let targets = ds.num_targets();
    if targets == 0 {
        return Err(Error::EmptyDomain(1));
    }
    let mut sum = 0.0;
    for j in 1..=targets {
        let tgt = domain_class_errors(preds, ds, j)?;
        sum += src.iter().zip(&tgt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    }
    Ok(sum / targets as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub eps_src: f64,
    pub eps_tgt_per_domain: Vec<f64>,
    pub eps_tgt_mean: f64,
    pub l1_per_domain: Vec<f64>,
    pub ber: f64,
    pub delta_btce: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Two binomial standard errors of `ε_S − mean_j ε_Tj`, treating domains
/// as independent samples.
pub fn two_standard_errors(preds: &[usize], ds: &Dataset) -> Result<f64> {
    let errs = per_target_errors(preds, ds)?;
    let n = |d: usize| ds.domain_ids.iter().filter(|&&x| x as usize == d).count() as f64;
    let big_k = errs.eps_tgt.len() as f64;
    let var_src = errs.eps_src * (1.0 - errs.eps_src) / n(0);
    let var_tgt: f64 = errs
        .eps_tgt
        .iter()
        .enumerate()
        .map(|(j, &e)| e * (1.0 - e) / n(j + 1))
        .sum::<f64>()
        / (big_k * big_k);
    Ok(2.0 * (var_src + var_tgt).sqrt())
}

/// Checks `|ε_S − ε_T| ≤ (1/K)·Σ_j ‖P_S(Y) − P_Tj(Y)‖₁·BER + 2(c−1)·Δ_BTCE`
/// on the empirical sample, with `c` the class count.
pub fn bound_check(preds: &[usize], ds: &Dataset, tol: f64) -> Result<BoundReport> {
    let errs = per_target_errors(preds, ds)?;
    let src_rows = ds.domain_rows(0);
    let src_preds: Vec<usize> = src_rows.iter().map(|&r| preds[r]).collect();
    let src_labels: Vec<usize> = src_rows.iter().map(|&r| ds.labels[r] as usize).collect();
    let ber_value = ber(&src_preds, &src_labels, ds.k)?;
    let delta = delta_btce(preds, ds)?;
    let src_counts = label_counts(ds, 0)?;
    let l1_per_domain = (1..ds.num_domains)
        .map(|j| Ok(l1_from_counts(&src_counts, &label_counts(ds, j)?)))
        .collect::<Result<Vec<f64>>>()?;
    let big_k = l1_per_domain.len() as f64;
    let lhs = (errs.eps_src - errs.eps_mean).abs();
    let rhs = l1_per_domain.iter().map(|l| l * ber_value).sum::<f64>() / big_k + 2.0 * (ds.k as f64 - 1.0) * delta;
    Ok(BoundReport {
        eps_src: errs.eps_src,
        eps_tgt_per_domain: errs.eps_tgt,
        eps_tgt_mean: errs.eps_mean,
        l1_per_domain,
        ber: ber_value,
        delta_btce: delta,
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnProbe {
    pub rates: Vec<f64>,
    pub mean: f64,
}

impl KnnProbe {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class_id,rate\n");
        for (c, r) in self.rates.iter().enumerate() {
            out.push_str(&format!("{c},{r}\n"));
        }
        out
    }
}

/// For each class center (mean feature), the fraction of its
/// `k_neighbors` Euclidean nearest samples that belong to the class.
pub fn knn_same_class_rate(
    features: &[f64],
    dim: usize,
    labels: &[usize],
    classes: usize,
    k_neighbors: usize,
) -> Result<KnnProbe> {
    let n = labels.len();
    if dim == 0 || features.len() != n * dim {
        return Err(Error::Shape(format!(
            "{} feature values for {n} rows of {dim}",
            features.len()
        )));
    }
    if k_neighbors == 0 || k_neighbors >= n {
        return Err(Error::BadK(k_neighbors));
    }
    let mut centers = vec![0.0; classes * dim];
    let mut counts = vec![0usize; classes];
    for (row, &y) in features.chunks_exact(dim).zip(labels) {
        if y >= classes {
            return Err(Error::Shape(format!("label {y} with {classes} classes")));
        }
        counts[y] += 1;
        for (c, v) in centers[y * dim..(y + 1) * dim].iter_mut().zip(row) {
            *c += v;
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass(empty));
    }
    let mut rates = Vec::with_capacity(classes);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for c in 0..classes {
        let center: Vec<f64> = centers[c * dim..(c + 1) * dim]
            .iter()
            .map(|v| v / counts[c] as f64)
            .collect();
        order.clear();
        order.extend(features.chunks_exact(dim).enumerate().map(|(i, row)| {
            let d2: f64 = row.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
            (d2, i)
        }));
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let same = order[..k_neighbors].iter().filter(|&&(_, i)| labels[i] == c).count();
        rates.push(same as f64 / k_neighbors as f64);
    }
    let mean = rates.iter().sum::<f64>() / classes as f64;
    Ok(KnnProbe { rates, mean })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelStats {
    pub gated_fraction: f64,
    /// Absent when no sample passes the gate.
    pub gated_accuracy: Option<f64>,
}

/// Fraction of predictions with entropy below `gamma`, and the argmax
/// accuracy among them.
pub fn pseudo_label_stats(probs: &[f64], k: usize, true_labels: &[usize], gamma: f64) -> Result<PseudoLabelStats> {
    if k == 0 || probs.len() != true_labels.len() * k || true_labels.is_empty() {
        return Err(Error::Shape(format!(
            "{} probabilities for {} labels",
            probs.len(),
            true_labels.len()
        )));
    }
    let (mut gated, mut correct) = (0usize, 0usize);
    for (p, &y) in probs.chunks_exact(k).zip(true_labels) {
        entropy(p)?;
        if entropy_unchecked(p) < gamma {
            gated += 1;
            correct += (argmax(p) == y) as usize;
        }
    }
    Ok(PseudoLabelStats {
        gated_fraction: gated as f64 / true_labels.len() as f64,
        gated_accuracy: (gated > 0).then(|| correct as f64 / gated as f64),
    })
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either input is constant or the lengths differ or are below 2.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = avg;
        }
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Mode;
    use crate::rng::rng_for;
    use rand::Rng as _;

    fn table(labels: &[u16], domains: &[u16], k: usize) -> Dataset {
        let n = labels.len();
        Dataset {
            mode: Mode::Vector,
            c: 1,
            h: 1,
            w: 1,
            k,
            num_domains: *domains.iter().max().unwrap() as usize + 1,
            data: vec![0.0; n],
            labels: labels.to_vec(),
            domain_ids: domains.to_vec(),
        }
    }

    #[test]
    fn per_target_error_mean() {
        let ds = table(
            &[0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
            &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2],
            2,
        );
        let preds = [0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0];
        let e = per_target_errors(&preds, &ds).unwrap();
        assert_eq!(e.eps_src, 0.0);
        assert!((e.eps_mean - 0.3).abs() < 1e-15);
        let all_right: Vec<usize> = ds.labels.iter().map(|&y| y as usize).collect();
        let z = per_target_errors(&all_right, &ds).unwrap();
        assert!(z.eps_src == 0.0 && z.eps_mean == 0.0);
    }

    #[test]
    fn empty_target_is_an_error() {
        let ds = table(&[0, 1, 0], &[0, 0, 2], 2);
        assert_eq!(per_target_errors(&[0, 1, 0], &ds).unwrap_err().code(), "E_EMPTY_DOMAIN");
    }

    #[test]
    fn ber_examples() {
        let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
        let mut preds = labels.clone();
        assert_eq!(ber(&preds, &labels, 2).unwrap(), 0.0);
        preds[0] = 1;
        for p in &mut preds[10..13] {
            *p = 0;
        }
        assert!((ber(&preds, &labels, 2).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(ber(&[0, 0], &[0, 0], 2).unwrap_err().code(), "E_NO_SUPPORT");
    }

    #[test]
    fn delta_btce_example() {
        // Source per-class errors (0, 0); target 1 (0.1, 0.2); target 2 (0.3, 0).
        let mut labels = Vec::new();
        let mut domains = Vec::new();
        let mut preds = Vec::new();
        for (d, errs) in [(0u16, [0usize, 0]), (1, [1, 2]), (2, [3, 0])] {
            for y in 0..2u16 {
                for i in 0..10 {
                    labels.push(y);
                    domains.push(d);
                    preds.push(if i < errs[y as usize] {
                        1 - y as usize
                    } else {
                        y as usize
                    });
                }
            }
        }
        let ds = table(&labels, &domains, 2);
        assert!((delta_btce(&preds, &ds).unwrap() - 0.25).abs() < 1e-15);
        let missing = table(&[0, 1, 0, 0], &[0, 0, 1, 1], 2);
        assert_eq!(delta_btce(&[0, 1, 0, 0], &missing).unwrap_err().code(), "E_NO_SUPPORT");
    }

    #[test]
    fn bound_is_tight_for_a_perfect_classifier() {
        let ds = table(&[0, 1, 1, 0, 1, 1, 1], &[0, 0, 0, 1, 1, 2, 2], 2);
        let preds: Vec<usize> = vec![0, 1, 1, 0, 1, 1, 1];
        let missing = bound_check(&preds, &ds, 0.0).unwrap_err();
        assert_eq!(missing.code(), "E_NO_SUPPORT");
        let ds = table(&[0, 1, 1, 0, 1, 0, 1], &[0, 0, 0, 1, 1, 2, 2], 2);
        let preds: Vec<usize> = ds.labels.iter().map(|&y| y as usize).collect();
        let r = bound_check(&preds, &ds, 0.0).unwrap();
        assert_eq!((r.lhs, r.rhs, r.holds), (0.0, 0.0, true));
    }

    #[test]
    fn bound_holds_on_random_instances() {
        let mut rng = rng_for(17, 0);
        for _ in 0..200 {
            let k = rng.random_range(2..5);
            let domains = rng.random_range(2..5) as u16;
            let n = 200;
            let labels: Vec<u16> = (0..n).map(|i| (i % k) as u16).collect();
            let ids: Vec<u16> = (0..n).map(|i| ((i / k) % domains as usize) as u16).collect();
            let ds = table(&labels, &ids, k);
            let preds: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let r = bound_check(&preds, &ds, 0.0).unwrap();
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn knn_examples() {
        let features = [
            0.0, 0.0, 0.1, 0.0, 0.0, 0.1, 0.1, 0.1, 10.0, 10.0, 10.1, 10.0, 10.0, 10.1, 10.1, 10.1,
        ];
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let p = knn_same_class_rate(&features, 2, &labels, 2, 3).unwrap();
        assert_eq!(p.rates, vec![1.0, 1.0]);
        assert_eq!(p.to_csv(), "class_id,rate\n0,1\n1,1\n");
        assert_eq!(
            knn_same_class_rate(&features, 2, &labels, 2, 8).unwrap_err().code(),
            "E_BAD_K"
        );
    }

    #[test]
    fn knn_random_labels_near_half() {
        let mut rng = rng_for(5, 0);
        let n = 2000;
        let features: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let p = knn_same_class_rate(&features, 2, &labels, 2, 50).unwrap();
        assert!((p.mean - 0.5).abs() < 0.05, "{p:?}");
    }

    #[test]
    fn pseudo_label_examples() {
        let uniform = [0.5, 0.5, 0.5, 0.5];
        let s = pseudo_label_stats(&uniform, 2, &[0, 1], 0.05).unwrap();
        assert_eq!((s.gated_fraction, s.gated_accuracy), (0.0, None));
        let s = pseudo_label_stats(&[1.0, 0.0, 0.0, 1.0], 2, &[0, 1], 0.05).unwrap();
        assert_eq!((s.gated_fraction, s.gated_accuracy), (1.0, Some(1.0)));
        // Entropies: 0.0315 (gated, right), 0.0315 (gated, wrong), 0.673, 0.
        let probs = [0.995, 0.005, 0.005, 0.995, 0.6, 0.4, 0.0, 1.0];
        let s = pseudo_label_stats(&probs, 2, &[0, 0, 0, 1], 0.05).unwrap();
        assert_eq!(s.gated_fraction, 0.75);
        assert!((s.gated_accuracy.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            pseudo_label_stats(&[0.7, 0.7], 2, &[0], 0.05).unwrap_err().code(),
            "E_BAD_PROB"
        );
    }

    #[test]
    fn spearman_matches_reference_values() {
        let r = spearman(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[0.0, 0.1, 0.1, 0.3, 0.2, 0.5]).unwrap();
        assert!((r - 0.9276336570439175).abs() < 1e-12);
        let r = spearman(
            &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            &[0.0, 0.0, 0.0, 0.2, 0.2, 0.1, 0.4],
        )
        .unwrap();
        assert!((r - 0.8420413371357598).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[3.0, 3.0]), None);
        assert_eq!(spearman(&[1.0], &[3.0]), None);
    }
}
