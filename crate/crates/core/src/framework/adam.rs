use serde::{Deserialize, Serialize};

use super::encoder::{EncoderParams, ParamGrads};
use crate::error::{Error, Result};

/// Adam moments and hyperparameters, one flat accumulator per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &EncoderParams, learning_rate: f64, weight_decay: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and non-negative"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay", "must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return Err(Error::config(
                "adam",
                "betas must lie in [0, 1) and eps must be positive",
            ));
        }
        Ok(())
    }

    fn matches(&self, params: &EncoderParams) -> bool {
        let tensors = params.tensors();
        self.m.len() == tensors.len()
            && self.v.len() == tensors.len()
            && tensors
                .iter()
                .zip(&self.m)
                .zip(&self.v)
                .all(|((t, m), v)| t.len() == m.len() && t.len() == v.len())
    }
}

/// One Adam update with decoupled weight decay, applied in place.
pub fn adam_step(state: &mut AdamState, params: &mut EncoderParams, grads: &ParamGrads) -> Result<()> {
    if !state.matches(params) {
        return Err(Error::Shape("optimizer state does not match parameters".into()));
    }
    let grad_tensors = grads.tensors();
    if grad_tensors.len() != state.m.len() || grad_tensors.iter().zip(&state.m).any(|(g, m)| g.len() != m.len()) {
        return Err(Error::Shape("gradients do not match parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    let decay = lr * state.weight_decay;

    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grad_tensors)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + state.eps) + decay * p[k];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::encoder::EncoderShape;

    fn params() -> EncoderParams {
        let shape = EncoderShape {
            input: 3,
            hidden: vec![4],
            embedding: 2,
            classes: 2,
        };
        EncoderParams::init(&shape, 0.0, 7).unwrap()
    }

    #[test]
    fn zero_grad_no_decay_is_noop() {
        let mut p = params();
        let before = p.clone();
        let mut s = AdamState::new(&p, 1e-3, 0.0);
        adam_step(&mut s, &mut p, &ParamGrads::zeros_like(&before)).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = params();
        let before = p.flatten();
        let mut g = ParamGrads::zeros_like(&p);
        g.head.weight.as_mut_slice()[0] = 3.0;
        g.head.bias[1] = -0.25;
        let mut s = AdamState::new(&p, 1e-3, 0.0);
        adam_step(&mut s, &mut p, &g).unwrap();
        let after = p.flatten();
        let gf = g.flatten();
        for k in 0..before.len() {
            // m̂ = g, v̂ = g², so the step is lr·g/(|g|+ε)
            let expected = if gf[k] == 0.0 {
                0.0
            } else {
                -1e-3 * gf[k] / (gf[k].abs() + 1e-8)
            };
            assert!((after[k] - before[k] - expected).abs() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn weight_decay_only() {
        let mut p = params();
        let before = p.flatten();
        let g = ParamGrads::zeros_like(&p);
        let mut s = AdamState::new(&p, 1e-2, 0.05);
        adam_step(&mut s, &mut p, &g).unwrap();
        for (a, b) in p.flatten().iter().zip(&before) {
            assert!((a - b * (1.0 - 1e-2 * 0.05)).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = params();
        let g = ParamGrads::zeros_like(&p);
        let mut s = AdamState::new(&p, 1e-3, 0.0);
        s.m.pop();
        assert!(adam_step(&mut s, &mut p, &g).is_err());
    }
}
