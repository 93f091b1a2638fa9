use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::{norm, Matrix};

/// Embedded views with labels and the source sample each view came from.
///
/// Training batches carry exactly two views per sample. Hand-built batches may
/// hold a single view of a sample; such rows simply have no sibling.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    embeddings: Matrix,
    labels: Vec<usize>,
    view_of: Vec<usize>,
}

impl EmbeddingBatch {
    /// Validates shapes, view pairing and unit norms (within 1e-9).
    pub fn new(embeddings: Matrix, labels: Vec<usize>, view_of: Vec<usize>) -> Result<Self> {
        let batch = Self::without_norm_check(embeddings, labels, view_of)?;
        for (i, row) in batch.embeddings.row_iter().enumerate() {
            if (norm(row) - 1.0).abs() > 1e-9 {
                return Err(Error::Shape(format!("embedding row {i} is not unit-norm")));
            }
        }
        Ok(batch)
    }

    /// Same checks as [`EmbeddingBatch::new`] except the unit-norm one, for
    /// probing the losses away from the sphere (finite differences).
    pub fn without_norm_check(embeddings: Matrix, labels: Vec<usize>, view_of: Vec<usize>) -> Result<Self> {
        let n = embeddings.rows();
        if labels.len() != n || view_of.len() != n {
            return Err(Error::Shape(format!(
                "{n} embeddings with {} labels and {} view ids",
                labels.len(),
                view_of.len()
            )));
        }
        let mut views: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (row, &v) in view_of.iter().enumerate() {
            views.entry(v).or_default().push(row);
        }
        for (sample, rows) in &views {
            if rows.len() > 2 {
                return Err(Error::ViewPairing(format!(
                    "sample {sample} has {} views, expected at most 2",
                    rows.len()
                )));
            }
            if rows.len() == 2 && labels[rows[0]] != labels[rows[1]] {
                return Err(Error::ViewPairing(format!(
                    "views of sample {sample} disagree on the label"
                )));
            }
        }
        Ok(Self {
            embeddings,
            labels,
            view_of,
        })
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn view_of(&self) -> &[usize] {
        &self.view_of
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Row holding the other view of `row`'s sample.
    pub fn sibling(&self, row: usize) -> Option<usize> {
        let v = self.view_of[row];
        (0..self.len()).find(|&j| j != row && self.view_of[j] == v)
    }
}
