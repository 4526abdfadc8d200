//! One-hidden-layer feedforward network used by both recognizers.
//!
//! Layout is `input -> ReLU(hidden) -> head(output)` where the head is a
//! softmax (classifier) or an element-wise sigmoid (scalar estimator). All
//! parameters live in one flat vector so training, gradient checking and
//! serialization share a single indexing scheme:
//! `[W1 (hidden x input, row per hidden unit) | b1 | W2 (output x hidden) | b2]`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    Softmax,
    Sigmoid,
}

impl fmt::Display for OutputHead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputHead::Softmax => "softmax",
            OutputHead::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for OutputHead {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "softmax" => Ok(OutputHead::Softmax),
            "sigmoid" => Ok(OutputHead::Sigmoid),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FfnError {
    #[error("input has length {got}, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid layer sizes: {0}")]
    InvalidShape(String),
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("sample {index}: target does not fit the {head} head")]
    TargetMismatch { index: usize, head: OutputHead },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("model file line {line}: {message}")]
    ModelFile { line: usize, message: String },
}

/// Training target for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Class index for the softmax head.
    Class(usize),
    /// Value in `[0, 1]` for a single-output sigmoid head.
    Score(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            lr: 0.1,
            epochs: 100,
            seed: 42,
            batch_size: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnModel {
    input: usize,
    hidden: usize,
    output: usize,
    head: OutputHead,
    params: Vec<f64>,
}

/// Intermediate activations of one forward pass.
struct Activations {
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

impl FfnModel {
    pub fn zeros(input: usize, hidden: usize, output: usize, head: OutputHead) -> Result<Self, FfnError> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(FfnError::InvalidShape(format!("[{input}, {hidden}, {output}]")));
        }
        match head {
            OutputHead::Softmax if output < 2 => {
                return Err(FfnError::InvalidShape("softmax head needs at least 2 outputs".into()))
            }
            _ => {}
        }
        let len = hidden * input + hidden + output * hidden + output;
        Ok(FfnModel {
            input,
            hidden,
            output,
            head,
            params: vec![0.0; len],
        })
    }

    /// He-uniform hidden weights, Glorot-uniform output weights, small
    /// positive hidden biases. Deterministic in `seed`.
    pub fn random(input: usize, hidden: usize, output: usize, head: OutputHead, seed: u64) -> Result<Self, FfnError> {
        let mut model = Self::zeros(input, hidden, output, head)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1_limit = (6.0 / input as f64).sqrt();
        let w2_limit = (6.0 / (hidden + output) as f64).sqrt();
        let (w1, rest) = model.params.split_at_mut(hidden * input);
        let (b1, rest) = rest.split_at_mut(hidden);
        let (w2, _b2) = rest.split_at_mut(output * hidden);
        w1.iter_mut().for_each(|w| *w = rng.gen_range(-w1_limit..w1_limit));
        b1.iter_mut().for_each(|b| *b = 0.01);
        w2.iter_mut().for_each(|w| *w = rng.gen_range(-w2_limit..w2_limit));
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1(&self) -> &[f64] {
        &self.params[..self.hidden * self.input]
    }

    fn b1(&self) -> &[f64] {
        let start = self.hidden * self.input;
        &self.params[start..start + self.hidden]
    }

    fn w2(&self) -> &[f64] {
        let start = self.hidden * self.input + self.hidden;
        &self.params[start..start + self.output * self.hidden]
    }

    fn b2(&self) -> &[f64] {
        let start = self.hidden * self.input + self.hidden + self.output * self.hidden;
        &self.params[start..]
    }

    fn check_input(&self, input: &[f64]) -> Result<(), FfnError> {
        if input.len() != self.input {
            return Err(FfnError::ShapeMismatch {
                expected: self.input,
                got: input.len(),
            });
        }
        Ok(())
    }

    fn activations(&self, input: &[f64]) -> Activations {
        let mut hidden_pre = self.b1().to_vec();
        let w1 = self.w1();
        // Embeddings are sparse; walk only the non-zero inputs.
        for (i, &x) in input.iter().enumerate() {
            if x != 0.0 {
                for (j, h) in hidden_pre.iter_mut().enumerate() {
                    *h += w1[j * self.input + i] * x;
                }
            }
        }
        let hidden: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
        let w2 = self.w2();
        let logits = self
            .b2()
            .iter()
            .enumerate()
            .map(|(o, &b)| {
                b + w2[o * self.hidden..(o + 1) * self.hidden]
                    .iter()
                    .zip(&hidden)
                    .map(|(w, h)| w * h)
                    .sum::<f64>()
            })
            .collect();
        Activations {
            hidden_pre,
            hidden,
            logits,
        }
    }

    fn apply_head(&self, logits: &[f64]) -> Vec<f64> {
        match self.head {
            OutputHead::Softmax => softmax(logits),
            OutputHead::Sigmoid => logits.iter().map(|&z| sigmoid(z)).collect(),
        }
    }

    /// Softmax head outputs sum to one; sigmoid head outputs lie in (0, 1).
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, FfnError> {
        self.check_input(input)?;
        Ok(self.apply_head(&self.activations(input).logits))
    }

    fn check_target(&self, target: Target, index: usize) -> Result<(), FfnError> {
        let ok = match (self.head, target) {
            (OutputHead::Softmax, Target::Class(c)) => c < self.output,
            (OutputHead::Sigmoid, Target::Score(y)) => self.output == 1 && (0.0..=1.0).contains(&y),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(FfnError::TargetMismatch { index, head: self.head })
        }
    }

    /// Cross-entropy (softmax) or binary cross-entropy (sigmoid), computed
    /// from the logits for numerical stability.
    fn loss_from_logits(&self, logits: &[f64], target: Target) -> f64 {
        match target {
            Target::Class(c) => {
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
                log_sum - logits[c]
            }
            Target::Score(y) => {
                let z = logits[0];
                z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
            }
        }
    }

    pub fn loss(&self, input: &[f64], target: Target) -> Result<f64, FfnError> {
        self.check_input(input)?;
        self.check_target(target, 0)?;
        Ok(self.loss_from_logits(&self.activations(input).logits, target))
    }

    /// Adds the gradient of the single-sample loss into `grad` and returns
    /// the loss.
    fn accumulate_gradient(&self, input: &[f64], target: Target, grad: &mut [f64]) -> f64 {
        let act = self.activations(input);
        let probs = self.apply_head(&act.logits);
        let loss = self.loss_from_logits(&act.logits, target);

        // Both heads with their matching losses give dL/dz = p - t.
        let mut dz = probs;
        match target {
            Target::Class(c) => dz[c] -= 1.0,
            Target::Score(y) => dz[0] -= y,
        }

        let (input_dim, hidden_dim) = (self.input, self.hidden);
        let w2 = self.w2();
        let (g_w1, rest) = grad.split_at_mut(hidden_dim * input_dim);
        let (g_b1, rest) = rest.split_at_mut(hidden_dim);
        let (g_w2, g_b2) = rest.split_at_mut(self.output * hidden_dim);

        let mut d_hidden = vec![0.0; hidden_dim];
        for (o, &d) in dz.iter().enumerate() {
            g_b2[o] += d;
            for j in 0..hidden_dim {
                g_w2[o * hidden_dim + j] += d * act.hidden[j];
                d_hidden[j] += w2[o * hidden_dim + j] * d;
            }
        }
        for j in 0..hidden_dim {
            if act.hidden_pre[j] <= 0.0 {
                continue;
            }
            let d = d_hidden[j];
            g_b1[j] += d;
            let row = &mut g_w1[j * input_dim..(j + 1) * input_dim];
            for (i, &x) in input.iter().enumerate() {
                if x != 0.0 {
                    row[i] += d * x;
                }
            }
        }
        loss
    }

    /// Analytic gradient of the single-sample loss.
    pub fn gradient(&self, input: &[f64], target: Target) -> Result<(f64, Vec<f64>), FfnError> {
        self.check_input(input)?;
        self.check_target(target, 0)?;
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(input, target, &mut grad);
        Ok((loss, grad))
    }

    /// Mini-batch SGD. Returns the mean training loss of every epoch.
    /// `epochs == 0` leaves the model untouched.
    pub fn train(&mut self, data: &[(Vec<f64>, Target)], params: &TrainParams) -> Result<Vec<f64>, FfnError> {
        if data.is_empty() {
            return Err(FfnError::EmptyDataset);
        }
        if params.batch_size == 0 {
            return Err(FfnError::InvalidHyper("batch_size must be positive".into()));
        }
        if !(params.lr.is_finite() && params.lr > 0.0) {
            return Err(FfnError::InvalidHyper(format!("learning rate {}", params.lr)));
        }
        for (index, (x, t)) in data.iter().enumerate() {
            self.check_input(x)?;
            self.check_target(*t, index)?;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut history = Vec::with_capacity(params.epochs);
        for epoch in 0..params.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(params.batch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for &i in batch {
                    let (x, t) = &data[i];
                    total += self.accumulate_gradient(x, *t, &mut grad);
                }
                let step = params.lr / batch.len() as f64;
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= step * g;
                }
            }
            let mean = total / data.len() as f64;
            if !mean.is_finite() || self.params.iter().any(|p| !p.is_finite()) {
                return Err(FfnError::NonFiniteLoss { epoch });
            }
            history.push(mean);
        }
        Ok(history)
    }

    /// Writes the `ffn v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("ffn v1 {} {} {} {}\n", self.input, self.hidden, self.output, self.head);
        let mut push_row = |row: &[f64]| {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        };
        self.w1().chunks(self.input).for_each(&mut push_row);
        push_row(self.b1());
        self.w2().chunks(self.hidden).for_each(&mut push_row);
        push_row(self.b2());
        out
    }

    pub fn from_text(text: &str) -> Result<Self, FfnError> {
        let err = |line: usize, message: String| FfnError::ModelFile { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty model file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "ffn" || fields[1] != "v1" {
            return Err(err(1, format!("expected `ffn v1 <in> <hidden> <out> <head>`, got `{header}`")));
        }
        let dims: Vec<usize> = fields[2..5]
            .iter()
            .map(|f| f.parse().map_err(|_| err(1, format!("bad dimension `{f}`"))))
            .collect::<Result<_, _>>()?;
        let head: OutputHead = fields[5]
            .parse()
            .map_err(|_| err(1, format!("unknown activation `{}`", fields[5])))?;
        let mut model = FfnModel::zeros(dims[0], dims[1], dims[2], head).map_err(|e| err(1, e.to_string()))?;

        let (input, hidden, output) = (model.input, model.hidden, model.output);
        let row_widths = std::iter::repeat_n(input, hidden)
            .chain(std::iter::once(hidden))
            .chain(std::iter::repeat_n(hidden, output))
            .chain(std::iter::once(output));
        let mut cursor = 0;
        for width in row_widths {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| err(text.lines().count() + 1, "unexpected end of file".into()))?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|v| match v.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(err(idx + 1, format!("bad parameter `{v}`"))),
                })
                .collect::<Result<_, _>>()?;
            if values.len() != width {
                return Err(err(idx + 1, format!("expected {width} values, found {}", values.len())));
            }
            model.params[cursor..cursor + width].copy_from_slice(&values);
            cursor += width;
        }
        if let Some((idx, _)) = lines.next() {
            return Err(err(idx + 1, "trailing data after last parameter row".into()));
        }
        Ok(model)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Step for the central differences in [`gradient_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Relative-error denominators are floored here so that parameters whose
/// true gradient is (numerically) zero do not divide round-off by zero.
const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient against central finite differences over
/// every parameter and returns the largest relative error
/// `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn gradient_check(model: &FfnModel, input: &[f64], target: Target) -> Result<f64, FfnError> {
    let (_, analytic) = model.gradient(input, target)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let original = probe.params[k];
        probe.params[k] = original + GRAD_CHECK_STEP;
        let plus = probe.loss(input, target)?;
        probe.params[k] = original - GRAD_CHECK_STEP;
        let minus = probe.loss(input, target)?;
        probe.params[k] = original;
        let numeric = (plus - minus) / (2.0 * GRAD_CHECK_STEP);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}
