use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, symmetric_eigen, Matrix};

/// Isotropy score `min_c Z(c) / max_c Z(c)` with `Z(c) = Σ_v exp(c·v)`,
/// where `c` ranges over the unit eigenvectors of `VᵀV`.
///
/// Each eigenvector is oriented toward the side with the larger `Z`, so the
/// score does not depend on the solver's sign convention and is invariant
/// under rotations of the embedding space. Lies in `(0, 1]`; 1 means the
/// partition function is the same in every principal direction.
pub fn isotropy_score(v: &Matrix) -> Result<f64> {
    if v.rows() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "isotropy needs 2 rows, got {}",
            v.rows()
        )));
    }
    if v.cols() < 2 {
        return Err(Error::Shape("isotropy needs at least 2 feature dimensions".into()));
    }
    if v.max_abs() == 0.0 {
        return Err(Error::DegenerateInput("all embeddings are zero".into()));
    }
    let eig = symmetric_eigen(&v.t_matmul(v)?)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..v.cols() {
        let c = eig.vector(j);
        let proj = v.matmul(&Matrix::new(c.len(), 1, c)?)?;
        let flipped: Vec<f64> = proj.as_slice().iter().map(|x| -x).collect();
        let log_z = log_sum_exp(proj.as_slice())?.max(log_sum_exp(&flipped)?);
        lo = lo.min(log_z);
        hi = hi.max(log_z);
    }
    Ok((lo - hi).exp())
}
