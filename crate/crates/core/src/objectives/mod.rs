//! Loss functions with analytic gradients.
//!
//! Every loss returns a [`LossResult`] carrying the scalar value and the
//! gradient with respect to its input: logits for cross-entropy, embeddings
//! for the contrastive terms. The training objective mixes the two as
//! `(1 − λ)·CE + λ·contrastive`.

mod batch;
mod contrastive;
mod cross_entropy;

pub use batch::EmbeddingBatch;
pub use contrastive::{beta_weights, schane_loss, schane_loss_with, simclr_loss, supcon_loss};
pub use cross_entropy::cross_entropy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Which contrastive term accompanies cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// Cross-entropy alone; `lambda` is ignored.
    Ce,
    SimClr,
    SupCon,
    Schane,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 4] = [Self::Ce, Self::SimClr, Self::SupCon, Self::Schane];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ce => "ce",
            Self::SimClr => "simclr",
            Self::SupCon => "supcon",
            Self::Schane => "schane",
        }
    }

    /// Label used in reports, e.g. `CE+SupCon`.
    pub fn display(self) -> &'static str {
        match self {
            Self::Ce => "CE",
            Self::SimClr => "CE+SimCLR",
            Self::SupCon => "CE+SupCon",
            Self::Schane => "CE+SCHaNe",
        }
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ce" => Ok(Self::Ce),
            "simclr" => Ok(Self::SimClr),
            "supcon" => Ok(Self::SupCon),
            "schane" => Ok(Self::Schane),
            other => Err(Error::config("objective", format!("unknown objective `{other}`"))),
        }
    }
}

/// How the hard-negative weights enter the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaGradient {
    /// Differentiate through the weights (exact gradient of the loss).
    #[default]
    Full,
    /// Treat the weights as constants.
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    pub tau: f64,
    pub lambda: f64,
    #[serde(default)]
    pub beta_gradient: BetaGradient,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            kind: ObjectiveKind::Schane,
            tau: 0.5,
            lambda: 0.9,
            beta_gradient: BetaGradient::Full,
        }
    }
}

impl ObjectiveConfig {
    pub fn ce() -> Self {
        Self {
            kind: ObjectiveKind::Ce,
            lambda: 0.0,
            ..Default::default()
        }
    }

    pub fn with_kind(self, kind: ObjectiveKind) -> Self {
        Self { kind, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config("tau", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config("lambda", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Weight on the contrastive term; zero for plain cross-entropy.
    pub fn effective_lambda(&self) -> f64 {
        match self.kind {
            ObjectiveKind::Ce => 0.0,
            _ => self.lambda,
        }
    }

    /// Contrastive term alone, ignoring `lambda`.
    pub fn contrastive(&self, batch: &EmbeddingBatch) -> Result<Option<LossResult>> {
        Ok(match self.kind {
            ObjectiveKind::Ce => None,
            ObjectiveKind::SimClr => Some(simclr_loss(batch, self.tau)?),
            ObjectiveKind::SupCon => Some(supcon_loss(batch, self.tau)?),
            ObjectiveKind::Schane => Some(schane_loss_with(batch, self.tau, self.beta_gradient)?),
        })
    }

    /// Full objective on head logits and embeddings of the same rows.
    pub fn evaluate(&self, logits: &Matrix, batch: &EmbeddingBatch) -> Result<LossResult> {
        self.validate()?;
        let lambda = self.effective_lambda();
        let ce = cross_entropy(logits, batch.labels())?;
        if lambda == 0.0 {
            return combined_loss(&ce, None, 0.0);
        }
        let con = self.contrastive(batch)?;
        combined_loss(&ce, con.as_ref(), lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BetaStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Positives per anchor row (empty for cross-entropy).
    pub positive_counts: Vec<usize>,
    pub beta: Option<BetaStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// Gradient with respect to the embedding rows, when the loss reads them.
    pub grad_embeddings: Option<Matrix>,
    /// Gradient with respect to the head logits, when the loss reads them.
    pub grad_logits: Option<Matrix>,
    pub diagnostics: Diagnostics,
}

/// `(1 − λ)·ce + λ·con`, applied to values and gradients alike.
pub fn combined_loss(ce: &LossResult, con: Option<&LossResult>, lambda: f64) -> Result<LossResult> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config("lambda", "must lie in [0, 1]"));
    }
    let scaled = |m: &Option<Matrix>, s: f64| {
        m.as_ref().map(|m| {
            let mut m = m.clone();
            m.scale(s);
            m
        })
    };
    let mut value = (1.0 - lambda) * ce.value;
    let mut grad_embeddings = None;
    let mut diagnostics = Diagnostics::default();
    if let Some(con) = con {
        value += lambda * con.value;
        grad_embeddings = scaled(&con.grad_embeddings, lambda);
        diagnostics = con.diagnostics.clone();
    } else if lambda != 0.0 {
        return Err(Error::config("lambda", "non-zero weight without a contrastive term"));
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("combined loss".into()));
    }
    Ok(LossResult {
        value,
        grad_embeddings,
        grad_logits: scaled(&ce.grad_logits, 1.0 - lambda),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(value: f64) -> LossResult {
        LossResult {
            value,
            grad_embeddings: Some(Matrix::from_rows(&[[value, -value]]).unwrap()),
            grad_logits: Some(Matrix::from_rows(&[[value]]).unwrap()),
            diagnostics: Diagnostics::default(),
        }
    }

    #[test]
    fn combined_arithmetic() {
        let c = combined_loss(&result(1.0), Some(&result(2.0)), 0.9).unwrap();
        assert!((c.value - 1.9).abs() < 1e-15);
        assert!((c.grad_logits.unwrap()[(0, 0)] - 0.1).abs() < 1e-15);
        assert_eq!(c.grad_embeddings.unwrap().row(0), &[1.8, -1.8]);
    }

    #[test]
    fn combined_endpoints() {
        let ce = result(1.25);
        let con = result(3.5);
        let zero = combined_loss(&ce, Some(&con), 0.0).unwrap();
        assert_eq!(zero.value, ce.value);
        assert_eq!(zero.grad_logits, ce.grad_logits);
        let one = combined_loss(&ce, Some(&con), 1.0).unwrap();
        assert_eq!(one.value, con.value);
        assert_eq!(one.grad_embeddings, con.grad_embeddings);
        assert!(one.grad_logits.unwrap().as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn lambda_out_of_range() {
        assert!(matches!(
            combined_loss(&result(1.0), Some(&result(1.0)), 1.5),
            Err(Error::Config { .. })
        ));
        assert!(ObjectiveConfig::default().with_lambda(-0.1).validate().is_err());
        let bad_tau = ObjectiveConfig {
            tau: 0.0,
            ..Default::default()
        };
        assert!(bad_tau.validate().is_err());
    }

    #[test]
    fn kind_parsing() {
        for k in ObjectiveKind::ALL {
            assert_eq!(k.name().parse::<ObjectiveKind>().unwrap(), k);
        }
        assert!("supcon2".parse::<ObjectiveKind>().is_err());
    }
}
