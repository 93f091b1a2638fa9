//! Datasets, loaders, splits and few-shot episode sampling.

mod csv_io;
mod episode;
mod idx;
mod split;
mod synthetic;

pub use csv_io::{load_csv, save_csv};
pub use episode::{sample_episode, Episode};
pub use idx::load_idx;
pub use split::{split, split_classes, SplitFractions};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Labelled feature vectors with dense class ids `0..class_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
    /// External label of each dense class id (identity unless remapped).
    original_labels: Vec<u64>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let original_labels = (0..class_count as u64).collect();
        Self::with_original_labels(features, labels, class_count, original_labels)
    }

    pub fn with_original_labels(
        features: Matrix,
        labels: Vec<usize>,
        class_count: usize,
        original_labels: Vec<u64>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::Shape(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if original_labels.len() != class_count {
            return Err(Error::Shape(format!(
                "{} original labels for {class_count} classes",
                original_labels.len()
            )));
        }
        let mut counts = vec![0usize; class_count];
        for &l in &labels {
            if l >= class_count {
                return Err(Error::Label {
                    label: l,
                    classes: class_count,
                });
            }
            counts[l] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InsufficientSamples(format!("class {empty} has no samples")));
        }
        Ok(Self {
            features,
            labels,
            class_count,
            original_labels,
        })
    }

    /// Builds a dataset from raw external labels, remapping them to dense ids
    /// in ascending order of the external label.
    pub fn from_external_labels(features: Matrix, external: &[u64]) -> Result<Self> {
        let distinct: BTreeMap<u64, usize> = external
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(dense, ext)| (ext, dense))
            .collect();
        let original: Vec<u64> = distinct.keys().copied().collect();
        let contiguous = original.iter().enumerate().all(|(i, &l)| l == i as u64);
        if !contiguous {
            log::info!(
                "remapping sparse labels to dense ids: {original:?} -> 0..{}",
                original.len()
            );
        }
        let labels = external.iter().map(|l| distinct[l]).collect();
        Self::with_original_labels(features, labels, original.len(), original)
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn original_labels(&self) -> &[u64] {
        &self.original_labels
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        (self.features.row(i), self.labels[i])
    }

    /// Sample indices grouped by class, each group in ascending order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.indices_by_class().iter().map(Vec::len).collect()
    }

    /// Keeps the given samples and relabels the surviving classes contiguously.
    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        if idx.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let features = self.features.select_rows(idx);
        let external: Vec<u64> = idx.iter().map(|&i| self.labels[i] as u64).collect();
        let remapped = Dataset::from_external_labels(features, &external)?;
        let original = remapped
            .original_labels
            .iter()
            .map(|&c| self.original_labels[c as usize])
            .collect();
        Ok(Dataset {
            original_labels: original,
            ..remapped
        })
    }
}
