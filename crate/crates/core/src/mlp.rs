//! Two-hidden-layer ReLU networks with hand-written backpropagation.
//!
//! Parameters live in one flat buffer laid out as `W1, b1, W2, b2, W3, b3`
//! with each weight matrix stored row-major as `out x in`. Gradients and the
//! Adam moment buffers share that layout, so clipping and optimizer updates
//! are plain loops over slices.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub const HIDDEN: usize = 64;

/// Gain for hidden layers at orthogonal initialization.
pub const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
pub const ACTOR_OUTPUT_GAIN: f64 = 0.01;
pub const CRITIC_OUTPUT_GAIN: f64 = 1.0;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("input has length {got}, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("forward cache does not belong to the current parameters")]
    StaleCache,
    #[error("gradient layout {got:?} does not match network {expected:?}")]
    ShapeMismatch {
        expected: [usize; 4],
        got: [usize; 4],
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error("snapshot i/o on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Offsets of each layer's weights and bias inside the flat buffer.
#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
}

fn spans(sizes: [usize; 4]) -> [LayerSpan; 3] {
    let mut offset = 0;
    std::array::from_fn(|l| {
        let (inputs, outputs) = (sizes[l], sizes[l + 1]);
        let span = LayerSpan {
            inputs,
            outputs,
            weights: offset,
            bias: offset + inputs * outputs,
        };
        offset += inputs * outputs + outputs;
        span
    })
}

fn param_count(sizes: [usize; 4]) -> usize {
    (0..3).map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Feed-forward network `in -> h1 -> h2 -> out` with ReLU hidden layers.
#[derive(Debug, Clone)]
pub struct Mlp {
    sizes: [usize; 4],
    params: Vec<f64>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
    version: u64,
}

/// Activations recorded by [`Mlp::forward`] for a later backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    input: Vec<f64>,
    pre1: Vec<f64>,
    hidden1: Vec<f64>,
    pre2: Vec<f64>,
    hidden2: Vec<f64>,
    pub output: Vec<f64>,
}

impl ForwardCache {
    pub fn hidden1(&self) -> &[f64] {
        &self.hidden1
    }

    pub fn hidden2(&self) -> &[f64] {
        &self.hidden2
    }
}

/// Loss gradient with the same flat layout as [`Mlp`] parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    sizes: [usize; 4],
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros(sizes: [usize; 4]) -> Self {
        Self {
            sizes,
            values: vec![0.0; param_count(sizes)],
        }
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.sizes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|g| g.is_finite())
    }

    /// Weight gradient of `layer` (0-based) as a row-major `out x in` slice.
    pub fn weights(&self, layer: usize) -> &[f64] {
        let s = spans(self.sizes)[layer];
        &self.values[s.weights..s.bias]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let s = spans(self.sizes)[layer];
        &self.values[s.bias..s.bias + s.outputs]
    }
}

/// Scales `grads` so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm(mut grads: Gradients, max_norm: f64) -> Gradients {
    debug_assert!(max_norm > 0.0);
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    grads
}

/// Numerically stable softmax. Fails on non-finite logits.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, MlpError> {
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(MlpError::NonFinite("logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

/// `log softmax(logits)`, computed without forming the probabilities first.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>, MlpError> {
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(MlpError::NonFinite("logits"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|z| z - max - log_total).collect())
}

/// Matrix with orthonormal columns (tall) or rows (wide), scaled by `gain`.
/// Returned row-major.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (tall_rows, tall_cols) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let samples: Vec<f64> = (0..tall_rows * tall_cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let gaussian = DMatrix::from_row_slice(tall_rows, tall_cols, &samples);
    let qr = gaussian.qr();
    let mut q = qr.q();
    let r = qr.r();
    // sign fix makes the draw uniform over the orthogonal group
    for j in 0..tall_cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let q = if rows >= cols { q } else { q.transpose() };
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(gain * q[(i, j)]);
        }
    }
    out
}

impl Mlp {
    /// All-zero network of the given layer sizes.
    pub fn zeros(sizes: [usize; 4]) -> Self {
        let n = param_count(sizes);
        Self {
            sizes,
            params: vec![0.0; n],
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step: 0,
            version: fresh_version(),
        }
    }

    /// Orthogonal weights (hidden gain `sqrt(2)`, output gain `output_gain`),
    /// zero biases, 64-unit hidden layers.
    pub fn init_orthogonal<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        output_gain: f64,
        rng: &mut R,
    ) -> Self {
        Self::init_orthogonal_with_hidden(inputs, [HIDDEN, HIDDEN], outputs, output_gain, rng)
    }

    pub fn init_orthogonal_with_hidden<R: Rng + ?Sized>(
        inputs: usize,
        hidden: [usize; 2],
        outputs: usize,
        output_gain: f64,
        rng: &mut R,
    ) -> Self {
        let sizes = [inputs, hidden[0], hidden[1], outputs];
        let mut net = Self::zeros(sizes);
        for (l, span) in spans(sizes).into_iter().enumerate() {
            let gain = if l == 2 { output_gain } else { HIDDEN_GAIN };
            let w = orthogonal_matrix(span.outputs, span.inputs, gain, rng);
            net.params[span.weights..span.bias].copy_from_slice(&w);
        }
        net
    }

    /// Zero weights with the given output bias, so the output is `bias`
    /// for every input. Used for fixed reference policies.
    pub fn constant(inputs: usize, bias: &[f64]) -> Self {
        let sizes = [inputs, 1, 1, bias.len()];
        let mut net = Self::zeros(sizes);
        let span = spans(sizes)[2];
        net.params[span.bias..span.bias + bias.len()].copy_from_slice(bias);
        net
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[3]
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Overwrites all parameters. Adam state is kept.
    pub fn set_params(&mut self, params: &[f64]) -> Result<(), MlpError> {
        if params.len() != self.params.len() {
            return Err(MlpError::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        self.version = fresh_version();
        Ok(())
    }

    /// Mutates the parameters in place and invalidates outstanding caches.
    pub fn update_params(&mut self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.params);
        self.version = fresh_version();
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let s = spans(self.sizes)[layer];
        &self.params[s.weights..s.bias]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let s = spans(self.sizes)[layer];
        &self.params[s.bias..s.bias + s.outputs]
    }

    pub fn adam_step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    fn affine(&self, span: LayerSpan, input: &[f64]) -> Vec<f64> {
        let w = &self.params[span.weights..span.bias];
        let b = &self.params[span.bias..span.bias + span.outputs];
        w.chunks_exact(span.inputs)
            .zip(b)
            .map(|(row, bias)| bias + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    /// Output only, without keeping activations.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        Ok(self.forward(input)?.output)
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardCache, MlpError> {
        if input.len() != self.sizes[0] {
            return Err(MlpError::DimensionMismatch {
                expected: self.sizes[0],
                got: input.len(),
            });
        }
        let [s1, s2, s3] = spans(self.sizes);
        let pre1 = self.affine(s1, input);
        let hidden1: Vec<f64> = pre1.iter().map(|z| z.max(0.0)).collect();
        let pre2 = self.affine(s2, &hidden1);
        let hidden2: Vec<f64> = pre2.iter().map(|z| z.max(0.0)).collect();
        let output = self.affine(s3, &hidden2);
        Ok(ForwardCache {
            version: self.version,
            input: input.to_vec(),
            pre1,
            hidden1,
            pre2,
            hidden2,
            output,
        })
    }

    /// Gradient of a loss whose derivative with respect to the output is
    /// `d_output`.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64]) -> Result<Gradients, MlpError> {
        let mut grads = Gradients::zeros(self.sizes);
        self.backward_into(cache, d_output, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Mlp::backward`] but adds into an existing accumulator.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        d_output: &[f64],
        grads: &mut Gradients,
    ) -> Result<(), MlpError> {
        if cache.version != self.version {
            return Err(MlpError::StaleCache);
        }
        if grads.sizes != self.sizes {
            return Err(MlpError::ShapeMismatch {
                expected: self.sizes,
                got: grads.sizes,
            });
        }
        if d_output.len() != self.sizes[3] {
            return Err(MlpError::DimensionMismatch {
                expected: self.sizes[3],
                got: d_output.len(),
            });
        }
        let [s1, s2, s3] = spans(self.sizes);

        let d_hidden2 = self.accumulate_layer(s3, &cache.hidden2, d_output, grads);
        let d_pre2: Vec<f64> = relu_mask(&d_hidden2, &cache.pre2);
        let d_hidden1 = self.accumulate_layer(s2, &cache.hidden1, &d_pre2, grads);
        let d_pre1: Vec<f64> = relu_mask(&d_hidden1, &cache.pre1);
        self.accumulate_layer(s1, &cache.input, &d_pre1, grads);
        Ok(())
    }

    /// Adds this layer's weight/bias gradients and returns the gradient with
    /// respect to its input.
    fn accumulate_layer(
        &self,
        span: LayerSpan,
        input: &[f64],
        d_out: &[f64],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let w = &self.params[span.weights..span.bias];
        let mut d_input = vec![0.0; span.inputs];
        let (gw, gb) = grads.values[span.weights..span.bias + span.outputs].split_at_mut(span.bias - span.weights);
        for (o, &d) in d_out.iter().enumerate() {
            gb[o] += d;
            if d == 0.0 {
                continue;
            }
            let row = o * span.inputs;
            for i in 0..span.inputs {
                gw[row + i] += d * input[i];
                d_input[i] += d * w[row + i];
            }
        }
        d_input
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &Gradients, cfg: &AdamConfig) -> Result<(), MlpError> {
        if grads.sizes != self.sizes {
            return Err(MlpError::ShapeMismatch {
                expected: self.sizes,
                got: grads.sizes,
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - cfg.beta1.powi(t);
        let correction2 = 1.0 - cfg.beta2.powi(t);
        for (((p, m), v), g) in self
            .params
            .iter_mut()
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
            .zip(&grads.values)
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        self.version = fresh_version();
        Ok(())
    }

    /// Text snapshot: a header line `mlp <in> <h1> <h2> <out>` followed by one
    /// parameter per line in `W1, b1, W2, b2, W3, b3` order.
    pub fn to_snapshot(&self) -> String {
        let mut out = format!(
            "mlp {} {} {} {}\n",
            self.sizes[0], self.sizes[1], self.sizes[2], self.sizes[3]
        );
        for p in &self.params {
            let _ = writeln!(out, "{p:?}");
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self, MlpError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| MlpError::Snapshot("empty snapshot".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("mlp") {
            return Err(MlpError::Snapshot(format!("bad header `{header}`")));
        }
        let dims: Vec<usize> = fields
            .map(|f| f.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| MlpError::Snapshot(format!("bad layer size: {e}")))?;
        let sizes: [usize; 4] = dims
            .try_into()
            .map_err(|_| MlpError::Snapshot("header needs four layer sizes".into()))?;
        let params: Vec<f64> = lines
            .enumerate()
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| MlpError::Snapshot(format!("line {}: {e}", i + 2)))
            })
            .collect::<Result<_, _>>()?;
        let mut net = Self::zeros(sizes);
        if params.len() != net.num_params() {
            return Err(MlpError::Snapshot(format!(
                "expected {} parameters, found {}",
                net.num_params(),
                params.len()
            )));
        }
        net.set_params(&params)?;
        Ok(net)
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), MlpError> {
        std::fs::write(path, self.to_snapshot()).map_err(|source| MlpError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_snapshot(path: &Path) -> Result<Self, MlpError> {
        let text = std::fs::read_to_string(path).map_err(|source| MlpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_snapshot(&text)
    }
}

fn relu_mask(d_act: &[f64], pre: &[f64]) -> Vec<f64> {
    d_act
        .iter()
        .zip(pre)
        .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
        .collect()
}
