//! Central finite differences for checking analytic gradients.

use crate::error::Result;

/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h`.
pub fn partial_difference<F>(f: &mut F, x: &[f64], i: usize, h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    probe[i] = x[i] + h;
    let plus = f(&probe)?;
    probe[i] = x[i] - h;
    let minus = f(&probe)?;
    Ok((plus - minus) / (2.0 * h))
}

/// Numerical gradient of `f` at `x`, one central difference per coordinate.
pub fn central_difference<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    (0..x.len()).map(|i| partial_difference(&mut f, x, i, h)).collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or 0 when both vectors are zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = super::norm(a).max(super::norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let g = central_difference(|x: &[f64]| Ok(x[0] * x[0] + 3.0 * x[0] * x[1]), &[1.0, 2.0], 1e-5).unwrap();
        assert!(relative_error(&g, &[8.0, 3.0]) < 1e-9);
    }

    #[test]
    fn relative_error_edge_cases() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(relative_error(&[1.0, 0.0], &[-1.0, 0.0]), 2.0);
    }
}
