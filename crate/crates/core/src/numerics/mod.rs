//! Deterministic numeric primitives shared by the losses, trainer and analyses.
//!
//! Everything here is 64-bit and pure. The eigen-solver is a cyclic Jacobi
//! sweep, adequate for the embedding-sized matrices used in this crate.

mod eigen;
pub mod gradcheck;
mod matrix;
mod pca;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use matrix::{dot, norm, Matrix};
pub use pca::pca_project;

use crate::error::{Error, Result};

/// Scales `v` to unit Euclidean norm.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// `log Σ exp(x)`, shifted by the maximum so large inputs do not overflow.
pub fn log_sum_exp(xs: &[f64]) -> Result<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    Ok(max + sum.ln())
}

pub fn softmax(xs: &[f64]) -> Result<Vec<f64>> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    Ok(out)
}
