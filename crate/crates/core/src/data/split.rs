use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| f.is_nan() || *f <= 0.0) {
            return Err(Error::config("split", "every fraction must be positive"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split", "fractions must sum to 1"));
        }
        Ok(())
    }

    /// Per-class partition sizes via largest remainder, each part at least one.
    fn sizes(&self, n: usize) -> Result<[usize; 3]> {
        if n < 3 {
            return Err(Error::InsufficientSamples(format!(
                "a class with {n} samples cannot fill 3 partitions"
            )));
        }
        let exact = [self.train, self.val, self.test].map(|f| f * n as f64);
        let mut sizes = exact.map(|x| x.floor() as usize);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| {
            (exact[b] - exact[b].floor())
                .total_cmp(&(exact[a] - exact[a].floor()))
                .then(a.cmp(&b))
        });
        let mut k = 0;
        while sizes.iter().sum::<usize>() < n {
            sizes[order[k % 3]] += 1;
            k += 1;
        }
        for i in 0..3 {
            if sizes[i] == 0 {
                let largest = (0..3).max_by_key(|&j| (sizes[j], usize::MAX - j)).unwrap();
                sizes[largest] -= 1;
                sizes[i] = 1;
            }
        }
        Ok(sizes)
    }
}

/// Stratified train/val/test split: every class is shuffled and cut with the
/// same fractions, so class proportions are preserved in each part.
pub fn split(ds: &Dataset, fractions: SplitFractions, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    fractions.validate()?;
    let mut rng = seed::rng(seed::derive(seed, seed::stream::SPLIT));
    let mut parts: [Vec<usize>; 3] = Default::default();
    for mut idx in ds.indices_by_class() {
        let sizes = fractions.sizes(idx.len())?;
        idx.shuffle(&mut rng);
        let mut rest = idx.as_slice();
        for (part, size) in parts.iter_mut().zip(sizes) {
            let (head, tail) = rest.split_at(size);
            part.extend_from_slice(head);
            rest = tail;
        }
    }
    let [train, val, test] = parts;
    Ok((ds.subset(&train)?, ds.subset(&val)?, ds.subset(&test)?))
}

/// Class-disjoint split into base and novel classes, each relabelled `0..k`.
pub fn split_classes(ds: &Dataset, base_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(base_fraction > 0.0 && base_fraction < 1.0) {
        return Err(Error::config("base_fraction", "must lie strictly between 0 and 1"));
    }
    let c = ds.class_count();
    let n_base = (base_fraction * c as f64).round() as usize;
    if c < 2 || n_base == 0 || n_base >= c {
        return Err(Error::InsufficientClasses(format!(
            "{c} classes with base fraction {base_fraction} leaves an empty side"
        )));
    }
    let mut classes: Vec<usize> = (0..c).collect();
    classes.shuffle(&mut seed::rng(seed::derive(seed, seed::stream::CLASS_SPLIT)));
    let mut base = classes[..n_base].to_vec();
    let mut novel = classes[n_base..].to_vec();
    base.sort_unstable();
    novel.sort_unstable();

    let members = |set: &[usize]| -> Vec<usize> {
        (0..ds.len())
            .filter(|&i| set.binary_search(&ds.labels()[i]).is_ok())
            .collect()
    };
    Ok((ds.subset(&members(&base))?, ds.subset(&members(&novel))?))
}
