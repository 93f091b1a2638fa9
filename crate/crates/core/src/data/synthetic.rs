use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{l2_normalize, Matrix};
use crate::seed;

/// Gaussian-cluster dataset description: class means on a sphere of radius
/// `mean_radius`, isotropic noise of standard deviation `noise_sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub feature_dim: usize,
    pub samples_per_class: usize,
    pub mean_radius: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            class_count: 20,
            feature_dim: 64,
            samples_per_class: 100,
            mean_radius: 4.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count == 0 {
            return Err(Error::config("class_count", "must be at least 1"));
        }
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim", "must be at least 1"));
        }
        if self.samples_per_class == 0 {
            return Err(Error::config("samples_per_class", "must be at least 1"));
        }
        if !(self.mean_radius > 0.0 && self.mean_radius.is_finite()) {
            return Err(Error::config("mean_radius", "must be positive and finite"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma", "must be non-negative and finite"));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let d = spec.feature_dim;

    let mut means = Vec::with_capacity(spec.class_count);
    while means.len() < spec.class_count {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        // a zero draw has probability zero, but retrying keeps the sphere uniform
        if let Ok(u) = l2_normalize(&g) {
            means.push(u.into_iter().map(|x| x * spec.mean_radius).collect::<Vec<f64>>());
        }
    }

    let n = spec.class_count * spec.samples_per_class;
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            for &m in mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(m + spec.noise_sigma * z);
            }
            labels.push(c);
        }
    }
    Dataset::new(Matrix::new(n, d, data)?, labels, spec.class_count)
}
