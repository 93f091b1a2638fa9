use super::{Diagnostics, LossResult};
use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, Matrix};

/// Mean multi-class cross-entropy of `softmax(logits)` against integer labels.
///
/// `grad_logits = (softmax − onehot) / N`.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<LossResult> {
    let (n, classes) = logits.shape();
    if labels.len() != n {
        return Err(Error::Shape(format!("{n} logit rows but {} labels", labels.len())));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut grad = Matrix::zeros(n, classes);
    let mut total = 0.0;
    for (i, (row, &label)) in logits.row_iter().zip(labels).enumerate() {
        if label >= classes {
            return Err(Error::Label { label, classes });
        }
        let lse = log_sum_exp(row)?;
        total += nll(row, label);
        for (g, &x) in grad.row_mut(i).iter_mut().zip(row) {
            *g = (x - lse).exp() / n as f64;
        }
        grad[(i, label)] -= 1.0 / n as f64;
    }
    let value = total / n as f64;
    if !value.is_finite() {
        return Err(Error::NonFinite("cross-entropy".into()));
    }
    Ok(LossResult {
        value,
        grad_embeddings: None,
        grad_logits: Some(grad),
        diagnostics: Diagnostics::default(),
    })
}

/// `−log softmax(x)[y]` computed as `log Σ_c exp(x_c − x_y)`, which keeps
/// full relative precision when the label already dominates.
fn nll(row: &[f64], label: usize) -> f64 {
    let xy = row[label];
    let max = row.iter().map(|x| x - xy).fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|&(c, _)| c != label)
            .map(|(_, x)| (x - xy).exp())
            .sum();
        rest.ln_1p()
    } else {
        max + row.iter().map(|x| (x - xy - max).exp()).sum::<f64>().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let logits = Matrix::zeros(3, 4);
        let r = cross_entropy(&logits, &[0, 1, 3]).unwrap();
        assert!((r.value - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_binary() {
        let logits = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let r = cross_entropy(&logits, &[0]).unwrap();
        assert!((r.value - 0.31326168751822286).abs() < 1e-15);
        let g = r.grad_logits.unwrap();
        assert!((g[(0, 0)] + 0.2689414213699951).abs() < 1e-15);
        assert!((g[(0, 1)] - 0.2689414213699951).abs() < 1e-15);
    }

    #[test]
    fn confident_logits_drive_loss_to_zero() {
        let mut prev = f64::INFINITY;
        for margin in [1.0, 10.0, 100.0, 700.0] {
            let logits = Matrix::from_rows(&[[margin, 0.0, 0.0]]).unwrap();
            let v = cross_entropy(&logits, &[0]).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-300);
    }

    #[test]
    fn label_out_of_range() {
        let logits = Matrix::zeros(1, 2);
        assert!(matches!(
            cross_entropy(&logits, &[2]),
            Err(Error::Label { label: 2, classes: 2 })
        ));
    }
}
