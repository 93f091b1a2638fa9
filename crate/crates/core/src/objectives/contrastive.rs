//! Supervised and self-supervised contrastive terms.
//!
//! All three losses share one shape: each anchor row `i` produces a loss that
//! depends on the scaled similarities `s_ij = z_i·z_j / τ`. Each anchor writes
//! `∂L_i/∂s_ij` into row `i` of a coupling matrix `G`; the embedding gradient
//! is then `(G + Gᵀ)·Z / τ` averaged over anchors.
//!
//! Supervised anchors without any positive contribute nothing and are left
//! out of the mean; every anchor must still have at least one negative.

use super::{BetaGradient, BetaStats, Diagnostics, EmbeddingBatch, LossResult};
use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, Matrix};

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::config("tau", "must be positive"))
    }
}

/// Positive and negative rows of `anchor`, each in ascending row order.
fn partition(batch: &EmbeddingBatch, anchor: usize) -> (Vec<usize>, Vec<usize>) {
    let y = batch.labels()[anchor];
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (j, &l) in batch.labels().iter().enumerate() {
        if j == anchor {
            continue;
        }
        if l == y {
            pos.push(j);
        } else {
            neg.push(j);
        }
    }
    (pos, neg)
}

/// Shifted exponentials of the negative similarities, `exp(s_k − max_k s_k)`.
struct NegativeMass {
    shift: f64,
    e: Vec<f64>,
    sum: f64,
    sum_sq: f64,
}

impl NegativeMass {
    fn new(sims: &[f64]) -> Self {
        let shift = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = sims.iter().map(|s| (s - shift).exp()).collect();
        let sum = e.iter().sum();
        let sum_sq = e.iter().map(|x| x * x).sum();
        Self { shift, e, sum, sum_sq }
    }

    fn betas(&self) -> Vec<f64> {
        let n = self.e.len() as f64;
        self.e.iter().map(|x| n * x / self.sum).collect()
    }

    /// `log Σ_k β_k·exp(s_k)`
    fn log_weighted(&self) -> f64 {
        2.0 * self.shift + (self.e.len() as f64).ln() + self.sum_sq.ln() - (self.sum.ln() + self.shift)
    }
}

/// Hard-negative weights of `anchor`'s negatives, in ascending row order:
/// `β_k = |Neg|·exp(z_i·z_k/τ) / Σ_{k'} exp(z_i·z_k'/τ)`, so they average to one.
pub fn beta_weights(batch: &EmbeddingBatch, anchor: usize, tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    if anchor >= batch.len() {
        return Err(Error::Shape(format!(
            "anchor {anchor} outside batch of {}",
            batch.len()
        )));
    }
    let (_, neg) = partition(batch, anchor);
    if neg.is_empty() {
        return Err(Error::NoNegatives { anchor });
    }
    let z = batch.embeddings();
    let sims: Vec<f64> = neg
        .iter()
        .map(|&k| crate::numerics::dot(z.row(anchor), z.row(k)) / tau)
        .collect();
    Ok(NegativeMass::new(&sims).betas())
}

#[derive(Clone, Copy)]
enum Weighting {
    Uniform,
    Hard(BetaGradient),
}

fn supervised(batch: &EmbeddingBatch, tau: f64, weighting: Weighting) -> Result<LossResult> {
    check_tau(tau)?;
    let n = batch.len();
    let z = batch.embeddings();
    let gram = z.matmul_t(z)?;
    let mut coupling = Matrix::zeros(n, n);
    let mut positive_counts = Vec::with_capacity(n);
    let mut betas_seen: Vec<f64> = Vec::new();
    let mut total = 0.0;
    let mut anchors = 0usize;

    for i in 0..n {
        let (pos, neg) = partition(batch, i);
        if neg.is_empty() {
            return Err(Error::NoNegatives { anchor: i });
        }
        positive_counts.push(pos.len());
        if pos.is_empty() {
            continue;
        }
        anchors += 1;
        let s = |j: usize| gram[(i, j)] / tau;
        let pos_sims: Vec<f64> = pos.iter().map(|&p| s(p)).collect();
        let neg_sims: Vec<f64> = neg.iter().map(|&k| s(k)).collect();
        let inv_p = 1.0 / pos.len() as f64;
        let mean_pos = pos_sims.iter().sum::<f64>() * inv_p;

        match weighting {
            Weighting::Uniform => {
                let all: Vec<f64> = pos_sims.iter().chain(&neg_sims).copied().collect();
                let log_d = log_sum_exp(&all)?;
                total += log_d - mean_pos;
                for (&p, &sp) in pos.iter().zip(&pos_sims) {
                    coupling[(i, p)] = (sp - log_d).exp() - inv_p;
                }
                for (&k, &sk) in neg.iter().zip(&neg_sims) {
                    coupling[(i, k)] = (sk - log_d).exp();
                }
            }
            Weighting::Hard(mode) => {
                let mass = NegativeMass::new(&neg_sims);
                let log_q = mass.log_weighted();
                let mut terms = pos_sims.clone();
                terms.push(log_q);
                let log_d = log_sum_exp(&terms)?;
                total += log_d - mean_pos;
                for (&p, &sp) in pos.iter().zip(&pos_sims) {
                    coupling[(i, p)] = (sp - log_d).exp() - inv_p;
                }
                // q = Q / D, the share of the denominator held by weighted negatives
                let q = (log_q - log_d).exp();
                for (&k, &e) in neg.iter().zip(&mass.e) {
                    let a = e * e / mass.sum_sq;
                    coupling[(i, k)] = match mode {
                        BetaGradient::Full => q * (2.0 * a - e / mass.sum),
                        BetaGradient::Stop => q * a,
                    };
                }
                betas_seen.extend(mass.betas());
            }
        }
    }

    if anchors == 0 {
        return Err(Error::ViewPairing("no anchor has a positive".into()));
    }
    let value = total / anchors as f64;
    if !value.is_finite() {
        return Err(Error::NonFinite("contrastive loss".into()));
    }
    let beta = (!betas_seen.is_empty()).then(|| BetaStats {
        min: betas_seen.iter().copied().fold(f64::INFINITY, f64::min),
        max: betas_seen.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: betas_seen.iter().sum::<f64>() / betas_seen.len() as f64,
    });
    Ok(LossResult {
        value,
        grad_embeddings: Some(embedding_gradient(&coupling, z, tau, anchors)?),
        grad_logits: None,
        diagnostics: Diagnostics { positive_counts, beta },
    })
}

/// `(G + Gᵀ)·Z / (τ·anchors)`
fn embedding_gradient(coupling: &Matrix, z: &Matrix, tau: f64, anchors: usize) -> Result<Matrix> {
    let mut sym = coupling.clone();
    sym.add_scaled(&coupling.transpose(), 1.0)?;
    let mut grad = sym.matmul(z)?;
    grad.scale(1.0 / (tau * anchors as f64));
    Ok(grad)
}

/// Supervised contrastive loss with hard-negative weighting, differentiating
/// through the weights.
///
/// For anchor `i` with positives `P` (same label, excluding `i`) and negatives `N`:
///
/// `L_i = −(1/|P|) Σ_{p∈P} log[ e^{s_ip} / (Σ_{p'∈P} e^{s_ip'} + Σ_{k∈N} β_k e^{s_ik}) ]`
///
/// averaged over anchors.
pub fn schane_loss(batch: &EmbeddingBatch, tau: f64) -> Result<LossResult> {
    schane_loss_with(batch, tau, BetaGradient::Full)
}

pub fn schane_loss_with(batch: &EmbeddingBatch, tau: f64, mode: BetaGradient) -> Result<LossResult> {
    supervised(batch, tau, Weighting::Hard(mode))
}

/// The same loss with every negative weight fixed to one.
pub fn supcon_loss(batch: &EmbeddingBatch, tau: f64) -> Result<LossResult> {
    supervised(batch, tau, Weighting::Uniform)
}

/// Instance-discrimination loss: the only positive is the anchor's sibling
/// view; every other row is a negative regardless of label.
pub fn simclr_loss(batch: &EmbeddingBatch, tau: f64) -> Result<LossResult> {
    check_tau(tau)?;
    let n = batch.len();
    if n < 4 {
        return Err(Error::ViewPairing(format!(
            "instance discrimination needs at least 2 samples (4 views), got {n} views"
        )));
    }
    let z = batch.embeddings();
    let gram = z.matmul_t(z)?;
    let mut coupling = Matrix::zeros(n, n);
    let mut total = 0.0;
    for i in 0..n {
        let sibling = batch
            .sibling(i)
            .ok_or_else(|| Error::ViewPairing(format!("row {i} has no sibling view")))?;
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let sims: Vec<f64> = others.iter().map(|&j| gram[(i, j)] / tau).collect();
        let lse = log_sum_exp(&sims)?;
        total += lse - gram[(i, sibling)] / tau;
        for (&j, &s) in others.iter().zip(&sims) {
            coupling[(i, j)] = (s - lse).exp();
        }
        coupling[(i, sibling)] -= 1.0;
    }
    let value = total / n as f64;
    if !value.is_finite() {
        return Err(Error::NonFinite("simclr loss".into()));
    }
    Ok(LossResult {
        value,
        grad_embeddings: Some(embedding_gradient(&coupling, z, tau, n)?),
        grad_logits: None,
        diagnostics: Diagnostics {
            positive_counts: vec![1; n],
            beta: None,
        },
    })
}
