use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Matrix};

/// Cosine-similarity distributions of intra-class and cross-class pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineStats {
    /// `bins + 1` strictly increasing edges spanning `[−1, 1]`.
    pub bin_edges: Vec<f64>,
    /// Normalized histogram of intra-class pair similarities.
    pub positive: Vec<f64>,
    /// Normalized histogram of cross-class pair similarities.
    pub negative: Vec<f64>,
    pub positive_mean: f64,
    pub negative_mean: f64,
    pub positive_pairs: usize,
    pub negative_pairs: usize,
    /// `Σ_bin min(positive, negative)`: 0 for disjoint, 1 for identical distributions.
    pub overlap: f64,
}

fn bin_of(c: f64, bins: usize) -> usize {
    let t = ((c.clamp(-1.0, 1.0) + 1.0) / 2.0 * bins as f64).floor() as usize;
    t.min(bins - 1)
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector);
    }
    Ok(dot(a, b) / (na * nb))
}

/// Histograms over all pairs within `class_a` and within `class_b`
/// (positives) and all pairs across them (negatives). `cap` limits each
/// class to its first `cap` rows.
pub fn cosine_stats(
    embeddings: &Matrix,
    labels: &[usize],
    class_a: usize,
    class_b: usize,
    bins: usize,
    cap: Option<usize>,
) -> Result<CosineStats> {
    if labels.len() != embeddings.rows() {
        return Err(Error::Shape(format!(
            "{} rows for {} labels",
            embeddings.rows(),
            labels.len()
        )));
    }
    if bins < 2 {
        return Err(Error::config("bins", "must be at least 2"));
    }
    if class_a == class_b {
        return Err(Error::config("classes", "the two classes must differ"));
    }
    let members = |c: usize| -> Result<Vec<usize>> {
        let rows: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i] == c)
            .take(cap.unwrap_or(usize::MAX))
            .collect();
        if rows.len() < 2 {
            return Err(Error::InsufficientSamples(format!(
                "class {c} has {} samples, need 2",
                rows.len()
            )));
        }
        Ok(rows)
    };
    let a = members(class_a)?;
    let b = members(class_b)?;

    let mut pos = vec![0.0; bins];
    let mut neg = vec![0.0; bins];
    let (mut pos_sum, mut neg_sum) = (0.0, 0.0);
    let (mut pos_n, mut neg_n) = (0usize, 0usize);
    for group in [&a, &b] {
        for (k, &i) in group.iter().enumerate() {
            for &j in &group[k + 1..] {
                let c = cosine(embeddings.row(i), embeddings.row(j))?;
                pos[bin_of(c, bins)] += 1.0;
                pos_sum += c;
                pos_n += 1;
            }
        }
    }
    for &i in &a {
        for &j in &b {
            let c = cosine(embeddings.row(i), embeddings.row(j))?;
            neg[bin_of(c, bins)] += 1.0;
            neg_sum += c;
            neg_n += 1;
        }
    }
    pos.iter_mut().for_each(|v| *v /= pos_n as f64);
    neg.iter_mut().for_each(|v| *v /= neg_n as f64);
    let overlap = pos.iter().zip(&neg).map(|(p, n)| p.min(*n)).sum();
    Ok(CosineStats {
        bin_edges: (0..=bins).map(|k| -1.0 + 2.0 * k as f64 / bins as f64).collect(),
        positive: pos,
        negative: neg,
        positive_mean: pos_sum / pos_n as f64,
        negative_mean: neg_sum / neg_n as f64,
        positive_pairs: pos_n,
        negative_pairs: neg_n,
        overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn orthogonal_point_masses() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]).unwrap();
        let labels = [0, 0, 0, 1, 1];
        let s = cosine_stats(&m, &labels, 0, 1, 10, None).unwrap();
        assert_eq!(s.positive[9], 1.0);
        assert_eq!(s.negative[5], 1.0);
        assert_eq!(s.overlap, 0.0);
        assert_eq!((s.positive_pairs, s.negative_pairs), (4, 6));
        assert!(s.bin_edges.windows(2).all(|w| w[0] < w[1]));
        assert!((s.positive.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_embeddings_overlap_fully() {
        let m = Matrix::from_rows(&[[0.6, 0.8]; 4]).unwrap();
        let s = cosine_stats(&m, &[0, 1, 0, 1], 0, 1, 20, None).unwrap();
        assert_eq!(s.positive[19], 1.0);
        assert_eq!(s.negative[19], 1.0);
        assert!((s.overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_high_dim_negatives_concentrate_near_zero() {
        let d = 256;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..40 * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = Matrix::new(40, d, data).unwrap();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let s = cosine_stats(&m, &labels, 0, 1, 50, None).unwrap();
        assert!(s.negative_mean.abs() < 3.0 / (d as f64).sqrt());
    }

    #[test]
    fn symmetric_in_class_order_and_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<f64> = (0..30 * 5).map(|_| StandardNormal.sample(&mut rng)).collect();
        let m = Matrix::new(30, 5, data).unwrap();
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let ab = cosine_stats(&m, &labels, 0, 2, 16, None).unwrap();
        let ba = cosine_stats(&m, &labels, 2, 0, 16, None).unwrap();
        assert_eq!(ab.negative, ba.negative);
        assert_eq!(ab.positive_pairs, ba.positive_pairs);
        for (x, y) in ab.positive.iter().zip(&ba.positive) {
            assert!((x - y).abs() < 1e-12);
        }
        let capped = cosine_stats(&m, &labels, 0, 2, 16, Some(4)).unwrap();
        assert_eq!((capped.positive_pairs, capped.negative_pairs), (12, 16));
    }

    #[test]
    fn errors() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            cosine_stats(&m, &[0, 1, 1], 0, 1, 4, None),
            Err(Error::InsufficientSamples(_))
        ));
        assert!(matches!(
            cosine_stats(&m, &[0, 1, 1], 0, 1, 1, None),
            Err(Error::Config { .. })
        ));
    }
}
