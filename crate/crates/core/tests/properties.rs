//! Property tests for the hard-negative weights, the losses and the geometry metrics.

use proptest::prelude::*;
use schane::metrics::isotropy_score;
use schane::numerics::{l2_normalize, symmetric_eigen, Matrix};
use schane::objectives::{beta_weights, schane_loss, supcon_loss, EmbeddingBatch};

fn unit_rows(raw: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    raw.iter().map(|r| l2_normalize(r).ok()).collect()
}

/// Batch of `samples` two-view samples in `dim` dimensions with labels cycling over `classes`.
fn batch_strategy() -> impl Strategy<Value = EmbeddingBatch> {
    (2usize..=6, 2usize..=8, 2usize..=4)
        .prop_flat_map(|(samples, dim, classes)| {
            let classes = classes.min(samples);
            (
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), 2 * samples),
                Just(classes),
            )
        })
        .prop_filter_map("degenerate row", |(raw, classes)| {
            let rows = unit_rows(&raw)?;
            let n = rows.len();
            let labels = (0..n).map(|r| (r / 2) % classes).collect();
            let view_of = (0..n).map(|r| r / 2).collect();
            EmbeddingBatch::new(Matrix::from_rows(&rows).ok()?, labels, view_of).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn beta_sums_to_negative_count(batch in batch_strategy(), tau in 0.05f64..2.0) {
        for anchor in 0..batch.len() {
            let beta = beta_weights(&batch, anchor, tau).unwrap();
            let negatives = batch.labels().iter().filter(|&&l| l != batch.labels()[anchor]).count();
            prop_assert_eq!(beta.len(), negatives);
            prop_assert!((beta.iter().sum::<f64>() - negatives as f64).abs() < 1e-9);
            prop_assert!(beta.iter().all(|&b| b > 0.0));
        }
    }

    #[test]
    fn equal_similarity_gives_unit_beta(
        anchor in prop::collection::vec(-1.0f64..1.0, 4),
        negative in prop::collection::vec(-1.0f64..1.0, 4),
        copies in 1usize..6,
        tau in 0.05f64..2.0,
    ) {
        let (Ok(a), Ok(n)) = (l2_normalize(&anchor), l2_normalize(&negative)) else { return Ok(()) };
        let mut rows = vec![a.clone(), a];
        let mut labels = vec![0, 0];
        let mut view_of = vec![0, 0];
        for c in 0..copies {
            rows.extend([n.clone(), n.clone()]);
            labels.extend([1, 1]);
            view_of.extend([c + 1, c + 1]);
        }
        let batch = EmbeddingBatch::new(Matrix::from_rows(&rows).unwrap(), labels, view_of).unwrap();
        let beta = beta_weights(&batch, 0, tau).unwrap();
        prop_assert!(beta.iter().all(|b| (b - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_negative_reduces_to_supcon(
        raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 3..8),
        tau in 0.05f64..2.0,
    ) {
        // every class-0 anchor sees exactly one negative: the last row
        let Some(rows) = unit_rows(&raw) else { return Ok(()) };
        let n = rows.len();
        let labels: Vec<usize> = (0..n).map(|r| usize::from(r == n - 1)).collect();
        let view_of: Vec<usize> = (0..n).map(|r| if r == n - 1 { n } else { r / 2 }).collect();
        let batch = EmbeddingBatch::new(Matrix::from_rows(&rows).unwrap(), labels, view_of).unwrap();
        let s = schane_loss(&batch, tau).unwrap();
        let c = supcon_loss(&batch, tau).unwrap();
        prop_assert!((s.value - c.value).abs() < 1e-12);
    }

    #[test]
    fn losses_are_permutation_equivariant(batch in batch_strategy(), shift in 0usize..16) {
        let n = batch.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let permuted = EmbeddingBatch::new(
            batch.embeddings().select_rows(&perm),
            perm.iter().map(|&i| batch.labels()[i]).collect(),
            perm.iter().map(|&i| batch.view_of()[i]).collect(),
        ).unwrap();
        let a = schane_loss(&batch, 0.5).unwrap();
        let b = schane_loss(&permuted, 0.5).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-12);
        let ga = a.grad_embeddings.unwrap();
        let gb = b.grad_embeddings.unwrap();
        for (k, &i) in perm.iter().enumerate() {
            for (x, y) in ga.row(i).iter().zip(gb.row(k)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn schane_is_finite_and_non_negative(batch in batch_strategy(), tau in 0.01f64..5.0) {
        let r = schane_loss(&batch, tau).unwrap();
        prop_assert!(r.value.is_finite());
        prop_assert!(r.grad_embeddings.unwrap().is_finite());
    }
}

fn rotation(dim: usize, angles: &[f64]) -> Matrix {
    // product of Givens rotations in consecutive planes
    let mut q = Matrix::identity(dim);
    for (k, &t) in angles.iter().enumerate() {
        let (i, j) = (k % (dim - 1), k % (dim - 1) + 1);
        let mut g = Matrix::identity(dim);
        g[(i, i)] = t.cos();
        g[(j, j)] = t.cos();
        g[(i, j)] = -t.sin();
        g[(j, i)] = t.sin();
        q = q.matmul(&g).unwrap();
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn isotropy_in_unit_interval_and_rotation_invariant(
        raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 3..20),
        angles in prop::collection::vec(-3.1f64..3.1, 1..6),
    ) {
        let Some(rows) = unit_rows(&raw) else { return Ok(()) };
        let v = Matrix::from_rows(&rows).unwrap();
        // a nearly repeated spectrum makes the eigenvectors ill-defined
        let eig = symmetric_eigen(&v.t_matmul(&v).unwrap()).unwrap();
        prop_assume!(eig.values.windows(2).all(|w| w[0] - w[1] > 1e-3));
        let is = isotropy_score(&v).unwrap();
        prop_assert!(is > 0.0 && is <= 1.0);
        let rotated = v.matmul(&rotation(4, &angles)).unwrap();
        prop_assert!((isotropy_score(&rotated).unwrap() - is).abs() < 1e-8);
    }
}
