use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::seed;

/// Stochastic feature-space augmentation: a per-view scale factor drawn from
/// `scale_jitter`, random coordinate masking, then additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentPolicy {
    pub noise_sigma: f64,
    pub scale_jitter: (f64, f64),
    pub mask_fraction: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            noise_sigma: 0.5,
            scale_jitter: (0.8, 1.2),
            mask_fraction: 0.1,
        }
    }
}

impl AugmentPolicy {
    pub fn identity() -> Self {
        Self {
            noise_sigma: 0.0,
            scale_jitter: (1.0, 1.0),
            mask_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("augment.noise_sigma", "must be non-negative"));
        }
        let (lo, hi) = self.scale_jitter;
        if !(lo > 0.0 && lo <= hi && hi <= 2.0) {
            return Err(Error::config("augment.scale_jitter", "must satisfy 0 < lo <= hi <= 2"));
        }
        if !(0.0..1.0).contains(&self.mask_fraction) {
            return Err(Error::config("augment.mask_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }

    fn view(&self, x: &[f64], rng: &mut seed::Rng) -> Vec<f64> {
        let (lo, hi) = self.scale_jitter;
        let scale = if lo < hi { rng.random_range(lo..=hi) } else { lo };
        let noise = (self.noise_sigma > 0.0).then(|| Normal::new(0.0, self.noise_sigma).expect("validated sigma"));
        x.iter()
            .map(|&v| {
                let kept = if self.mask_fraction > 0.0 && rng.random_bool(self.mask_fraction) {
                    0.0
                } else {
                    v * scale
                };
                kept + noise.map_or(0.0, |n| n.sample(rng))
            })
            .collect()
    }
}

/// Two independently augmented views of `x`.
pub fn make_views(x: &[f64], policy: &AugmentPolicy, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    policy.validate()?;
    let mut rng = seed::rng(seed);
    let a = policy.view(x, &mut rng);
    let b = policy.view(x, &mut rng);
    Ok((a, b))
}

/// Two views per input row, interleaved: rows `2i` and `2i+1` come from sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewBatch {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub view_of: Vec<usize>,
}

/// Views for every row of `inputs`. Row `i` draws from `derive(seed, i)`, so a
/// sample's views do not depend on which other samples share its batch.
pub fn make_view_batch(inputs: &Matrix, labels: &[usize], policy: &AugmentPolicy, seed: u64) -> Result<ViewBatch> {
    if labels.len() != inputs.rows() {
        return Err(Error::Shape(format!(
            "{} rows but {} labels",
            inputs.rows(),
            labels.len()
        )));
    }
    let n = inputs.rows();
    let d = inputs.cols();
    let mut data = Vec::with_capacity(2 * n * d);
    let mut out_labels = Vec::with_capacity(2 * n);
    let mut view_of = Vec::with_capacity(2 * n);
    for (i, (row, &label)) in inputs.row_iter().zip(labels).enumerate() {
        let (a, b) = make_views(row, policy, seed::derive(seed, i as u64))?;
        data.extend(a);
        data.extend(b);
        out_labels.extend([label, label]);
        view_of.extend([i, i]);
    }
    Ok(ViewBatch {
        inputs: Matrix::new(2 * n, d, data)?,
        labels: out_labels,
        view_of,
    })
}
