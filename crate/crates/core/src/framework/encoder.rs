use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Matrix};
use crate::seed;

/// Norms below this are left unnormalized and flagged.
pub const NORM_GUARD: f64 = 1e-12;

/// Affine layer `y = x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(input, output),
            bias: vec![0.0; output],
        }
    }

    /// Uniform in `±√(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut seed::Rng) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let mut layer = Self::zeros(input, output);
        for w in layer.weight.as_mut_slice() {
            *w = rng.random_range(-limit..=limit);
        }
        layer
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul(&self.weight)?;
        for i in 0..y.rows() {
            for (v, b) in y.row_mut(i).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }
}

/// Layer widths of an encoder: `input → hidden… → embedding`, plus head classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderShape {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub embedding: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// Encoder layers; ReLU (and dropout in training) follows every layer but the last.
    pub layers: Vec<Dense>,
    pub head: Dense,
    pub dropout_rate: f64,
}

/// Gradients laid out exactly like [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<Dense>,
    pub head: Dense,
}

impl EncoderParams {
    pub fn init(shape: &EncoderShape, dropout_rate: f64, seed: u64) -> Result<Self> {
        if shape.input == 0 || shape.embedding == 0 || shape.classes == 0 || shape.hidden.contains(&0) {
            return Err(Error::config("model", "layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::config("dropout", "must lie in [0, 1)"));
        }
        let mut rng = seed::rng(seed::derive(seed, seed::stream::INIT));
        let mut widths = vec![shape.input];
        widths.extend(&shape.hidden);
        widths.push(shape.embedding);
        let layers = widths.windows(2).map(|w| Dense::glorot(w[0], w[1], &mut rng)).collect();
        let head = Dense::glorot(shape.embedding, shape.classes, &mut rng);
        Ok(Self {
            layers,
            head,
            dropout_rate,
        })
    }

    pub fn shape(&self) -> EncoderShape {
        EncoderShape {
            input: self.layers[0].input_dim(),
            hidden: self.layers[..self.layers.len() - 1]
                .iter()
                .map(Dense::output_dim)
                .collect(),
            embedding: self.embedding_dim(),
            classes: self.head.output_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().expect("encoder has layers").output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("encoder has no layers".into()));
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].output_dim(),
                    i + 1,
                    w[1].input_dim()
                )));
            }
        }
        if self.head.input_dim() != self.embedding_dim() {
            return Err(Error::Shape("head input does not match embedding width".into()));
        }
        for l in self.layers.iter().chain(std::iter::once(&self.head)) {
            if l.bias.len() != l.output_dim() {
                return Err(Error::Shape("bias length does not match layer width".into()));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout", "must lie in [0, 1)"));
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("parameters".into()));
        }
        Ok(())
    }

    /// Same encoder with a new head for `classes` outputs.
    pub fn with_head(&self, head: Dense) -> Result<Self> {
        if head.input_dim() != self.embedding_dim() {
            return Err(Error::Shape("head input does not match embedding width".into()));
        }
        Ok(Self { head, ..self.clone() })
    }

    /// Parameter tensors in a fixed order: each layer's weight then bias, then the head.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in self.layers.iter().chain(std::iter::once(&self.head)) {
            out.push(l.weight.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in self.layers.iter_mut().chain(std::iter::once(&mut self.head)) {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.tensors().iter().map(|t| t.len()).sum();
        if flat.len() != total {
            return Err(Error::Shape(format!("{} values for {total} parameters", flat.len())));
        }
        let mut rest = flat;
        for t in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl ParamGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
            head: Dense::zeros(params.head.input_dim(), params.head.output_dim()),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in self.layers.iter().chain(std::iter::once(&self.head)) {
            out.push(l.weight.as_slice());
            out.push(l.bias.as_slice());
        }
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each encoder layer.
    inputs: Vec<Matrix>,
    /// Pre-activation output of each encoder layer (the last one is the raw embedding).
    pre: Vec<Matrix>,
    /// Inverted-dropout multipliers for each hidden layer, when training.
    masks: Vec<Option<Matrix>>,
    norms: Vec<f64>,
    embeddings: Matrix,
    guard_fired: bool,
    layer_shapes: Vec<(usize, usize)>,
}

impl ForwardCache {
    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn raw_embeddings(&self) -> &Matrix {
        self.pre.last().expect("cache has layers")
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// True when some row had (near-)zero norm and was passed through unnormalized.
    pub fn guard_fired(&self) -> bool {
        self.guard_fired
    }

    /// Sign pattern of every hidden pre-activation, used to detect ReLU kinks.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre[..self.pre.len() - 1]
            .iter()
            .flat_map(|m| m.as_slice().iter().map(|&v| v > 0.0))
            .collect()
    }

    pub fn rows(&self) -> usize {
        self.embeddings.rows()
    }
}

fn layer_shapes(params: &EncoderParams) -> Vec<(usize, usize)> {
    params
        .layers
        .iter()
        .chain(std::iter::once(&params.head))
        .map(|l| (l.input_dim(), l.output_dim()))
        .collect()
}

/// MLP forward pass followed by row-wise L2 normalization.
///
/// Dropout is active only in `train_mode`; `seed` drives its masks and is
/// otherwise unused.
pub fn encode(params: &EncoderParams, batch: &Matrix, train_mode: bool, seed: u64) -> Result<(Matrix, ForwardCache)> {
    if batch.cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {} columns, encoder expects {}",
            batch.cols(),
            params.input_dim()
        )));
    }
    let rate = params.dropout_rate;
    let mut rng = seed::rng(seed::derive(seed, seed::stream::DROPOUT));
    let last = params.layers.len() - 1;
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut masks = Vec::with_capacity(last);
    let mut h = batch.clone();

    for (l, layer) in params.layers.iter().enumerate() {
        let z = layer.forward(&h)?;
        inputs.push(h);
        if l == last {
            h = z.clone();
        } else {
            let mut act = z.clone();
            act.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            if train_mode && rate > 0.0 {
                let keep = 1.0 / (1.0 - rate);
                let mut mask = Matrix::zeros(act.rows(), act.cols());
                for (m, a) in mask.as_mut_slice().iter_mut().zip(act.as_mut_slice()) {
                    *m = if rng.random_bool(rate) { 0.0 } else { keep };
                    *a *= *m;
                }
                masks.push(Some(mask));
            } else {
                masks.push(None);
            }
            h = act;
        }
        pre.push(z);
    }

    let mut guard_fired = false;
    let mut norms = Vec::with_capacity(h.rows());
    for i in 0..h.rows() {
        let n = norm(h.row(i));
        norms.push(n);
        if n < NORM_GUARD {
            guard_fired = true;
        } else {
            h.row_mut(i).iter_mut().for_each(|v| *v /= n);
        }
    }
    let cache = ForwardCache {
        inputs,
        pre,
        masks,
        norms,
        embeddings: h.clone(),
        guard_fired,
        layer_shapes: layer_shapes(params),
    };
    Ok((h, cache))
}

pub fn head_logits(params: &EncoderParams, embeddings: &Matrix) -> Result<Matrix> {
    if embeddings.cols() != params.head.input_dim() {
        return Err(Error::Shape(format!(
            "embeddings have {} columns, head expects {}",
            embeddings.cols(),
            params.head.input_dim()
        )));
    }
    params.head.forward(embeddings)
}

fn accumulate(layer: &mut Dense, input: &Matrix, grad_out: &Matrix) -> Result<()> {
    layer.weight = input.t_matmul(grad_out)?;
    for row in grad_out.row_iter() {
        for (b, g) in layer.bias.iter_mut().zip(row) {
            *b += g;
        }
    }
    Ok(())
}

/// Chain rule from embedding and logit gradients back to every parameter.
///
/// Through the normalization `z = u/‖u‖` the gradient is projected:
/// `∂L/∂u = (g − z·(z·g)) / ‖u‖`.
pub fn backprop(
    params: &EncoderParams,
    cache: &ForwardCache,
    grad_embeddings: Option<&Matrix>,
    grad_logits: Option<&Matrix>,
) -> Result<ParamGrads> {
    if cache.layer_shapes != layer_shapes(params) {
        return Err(Error::CacheMismatch("layer shapes differ from the parameters".into()));
    }
    let rows = cache.rows();
    let embed = params.embedding_dim();
    if let Some(g) = grad_embeddings {
        if g.shape() != (rows, embed) {
            return Err(Error::CacheMismatch(format!(
                "embedding gradient is {:?}, expected {:?}",
                g.shape(),
                (rows, embed)
            )));
        }
    }
    if let Some(g) = grad_logits {
        if g.shape() != (rows, params.head.output_dim()) {
            return Err(Error::CacheMismatch(format!(
                "logit gradient is {:?}, expected {:?}",
                g.shape(),
                (rows, params.head.output_dim())
            )));
        }
    }

    let mut grads = ParamGrads::zeros_like(params);
    let mut g_z = grad_embeddings.cloned().unwrap_or_else(|| Matrix::zeros(rows, embed));
    if let Some(gl) = grad_logits {
        accumulate(&mut grads.head, &cache.embeddings, gl)?;
        g_z.add_scaled(&gl.matmul_t(&params.head.weight)?, 1.0)?;
    }

    // through the normalization
    let mut g = Matrix::zeros(rows, embed);
    for i in 0..rows {
        let n = cache.norms[i];
        let gz = g_z.row(i);
        if n < NORM_GUARD {
            g.row_mut(i).copy_from_slice(gz);
            continue;
        }
        let z = cache.embeddings.row(i);
        let proj = dot(z, gz);
        for ((o, &gi), &zi) in g.row_mut(i).iter_mut().zip(gz).zip(z) {
            *o = (gi - zi * proj) / n;
        }
    }

    for l in (0..params.layers.len()).rev() {
        accumulate(&mut grads.layers[l], &cache.inputs[l], &g)?;
        if l == 0 {
            break;
        }
        let mut g_in = g.matmul_t(&params.layers[l].weight)?;
        let pre = &cache.pre[l - 1];
        let mask = cache.masks[l - 1].as_ref();
        for (k, v) in g_in.as_mut_slice().iter_mut().enumerate() {
            let active = pre.as_slice()[k] > 0.0;
            let m = mask.map_or(1.0, |m| m.as_slice()[k]);
            *v = if active { *v * m } else { 0.0 };
        }
        g = g_in;
    }
    Ok(grads)
}
