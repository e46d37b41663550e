//! Classical baselines with hand-written forward and backward passes: a
//! dense MLP and a small ConvNet (3×3 convolutions, 2×2 max-pooling, ReLU,
//! two dense layers). Backward produces gradients for every weight *and* for
//! the input pixels, which is what the attack code consumes.
//!
//! Feature maps are stored flat as `[channel][row][col]`; dense weights as
//! `[out][in]` row-major, biases after the weight block.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use crate::classifier::{Classifier, Trainable};
use crate::encoding::PixelVector;
use crate::error::{Error, Result};
use crate::optim::{cross_entropy, softmax, softmax_ce_cotangents};
use crate::{checkpoint, checkpoint::Checkpoint};

/// Architecture of a classical model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassicalSpec {
    /// Fully connected net: `input → hidden… → classes`, ReLU between layers.
    Mlp { input: usize, hidden: Vec<usize>, classes: usize },
    /// Three 3×3 conv blocks (each conv → ReLU → 2×2 max-pool) with the given
    /// feature-map counts, then dense `hidden` and dense `classes`.
    ConvNet { width: usize, height: usize, channels: [usize; 3], hidden: usize, classes: usize },
}

impl ClassicalSpec {
    /// Desk-scale ConvNet for w×h grayscale inputs: 8/16/32 feature maps.
    pub fn conv_default(width: usize, height: usize, classes: usize) -> Self {
        ClassicalSpec::ConvNet { width, height, channels: [8, 16, 32], hidden: 32, classes }
    }

    /// Desk-scale MLP with one hidden layer.
    pub fn mlp_default(input: usize, classes: usize) -> Self {
        ClassicalSpec::Mlp { input, hidden: vec![32], classes }
    }

    pub fn input_len(&self) -> usize {
        match self {
            ClassicalSpec::Mlp { input, .. } => *input,
            ClassicalSpec::ConvNet { width, height, .. } => width * height,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            ClassicalSpec::Mlp { classes, .. } | ClassicalSpec::ConvNet { classes, .. } => *classes,
        }
    }
}

/// One pipeline stage with parameter offsets into the flat parameter vector.
#[derive(Debug, Clone, Copy)]
enum Op {
    Conv3x3 { w_off: usize, b_off: usize, in_c: usize, out_c: usize, w: usize, h: usize },
    Relu,
    MaxPool2 { c: usize, w: usize, h: usize },
    Dense { w_off: usize, b_off: usize, in_dim: usize, out_dim: usize },
}

fn build_ops(spec: &ClassicalSpec) -> Result<(Vec<Op>, usize)> {
    let mut ops = Vec::new();
    let mut offset = 0;
    match spec {
        ClassicalSpec::Mlp { input, hidden, classes } => {
            if *input == 0 || *classes == 0 || hidden.iter().any(|&h| h == 0) {
                return Err(Error::Config("mlp layer widths must be positive".into()));
            }
            let mut dims = vec![*input];
            dims.extend_from_slice(hidden);
            dims.push(*classes);
            for i in 0..dims.len() - 1 {
                ops.push(Op::Dense {
                    w_off: offset,
                    b_off: offset + dims[i] * dims[i + 1],
                    in_dim: dims[i],
                    out_dim: dims[i + 1],
                });
                offset += dims[i] * dims[i + 1] + dims[i + 1];
                if i + 2 < dims.len() {
                    ops.push(Op::Relu);
                }
            }
        }
        ClassicalSpec::ConvNet { width, height, channels, hidden, classes } => {
            if *classes == 0 || *hidden == 0 || channels.contains(&0) {
                return Err(Error::Config("convnet widths must be positive".into()));
            }
            let (mut w, mut h, mut c) = (*width, *height, 1usize);
            for &out_c in channels {
                ops.push(Op::Conv3x3 {
                    w_off: offset,
                    b_off: offset + out_c * c * 9,
                    in_c: c,
                    out_c,
                    w,
                    h,
                });
                offset += out_c * c * 9 + out_c;
                ops.push(Op::Relu);
                if w < 2 || h < 2 {
                    return Err(Error::Config(format!(
                        "{width}x{height} input too small for three pooling stages"
                    )));
                }
                ops.push(Op::MaxPool2 { c: out_c, w, h });
                w /= 2;
                h /= 2;
                c = out_c;
            }
            let flat = c * w * h;
            ops.push(Op::Dense { w_off: offset, b_off: offset + flat * hidden, in_dim: flat, out_dim: *hidden });
            offset += flat * hidden + hidden;
            ops.push(Op::Relu);
            ops.push(Op::Dense {
                w_off: offset,
                b_off: offset + hidden * classes,
                in_dim: *hidden,
                out_dim: *classes,
            });
            offset += hidden * classes + classes;
        }
    }
    Ok((ops, offset))
}

#[derive(Debug, Clone)]
pub struct ClassicalModel {
    model_id: String,
    spec: ClassicalSpec,
    ops: Vec<Op>,
    params: Vec<f64>,
}

impl ClassicalModel {
    /// Zero-weight model; call [`init_he`](Self::init_he) before training.
    pub fn new(spec: ClassicalSpec) -> Result<Self> {
        let (ops, param_count) = build_ops(&spec)?;
        let model_id = match spec {
            ClassicalSpec::Mlp { .. } => "mlp".to_string(),
            ClassicalSpec::ConvNet { .. } => "convnet".to_string(),
        };
        Ok(ClassicalModel { model_id, spec, ops, params: vec![0.0; param_count] })
    }

    /// He-style initialization: weights ~ N(0, 2/fan_in), biases zero.
    pub fn init_he(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for op in &self.ops {
            let (w_off, b_off, fan_in) = match *op {
                Op::Conv3x3 { w_off, b_off, in_c, .. } => (w_off, b_off, in_c * 9),
                Op::Dense { w_off, b_off, in_dim, .. } => (w_off, b_off, in_dim),
                _ => continue,
            };
            let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            for p in &mut self.params[w_off..b_off] {
                *p = dist.sample(&mut rng);
            }
        }
        self
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = id.into();
        self
    }

    pub fn spec(&self) -> &ClassicalSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &PixelVector) -> Result<()> {
        if x.len() != self.spec.input_len() {
            return Err(Error::Config(format!(
                "{}-pixel input for a model expecting {}",
                x.len(),
                self.spec.input_len()
            )));
        }
        Ok(())
    }

    /// Activations after every op; index 0 holds the raw input.
    fn forward_trace(&self, x: &PixelVector) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.ops.len() + 1);
        acts.push(x.values().to_vec());
        for op in &self.ops {
            let input = acts.last().unwrap();
            acts.push(self.apply_op(op, input));
        }
        Ok(acts)
    }

    fn apply_op(&self, op: &Op, input: &[f64]) -> Vec<f64> {
        match *op {
            Op::Relu => input.iter().map(|v| v.max(0.0)).collect(),
            Op::Dense { w_off, b_off, in_dim, out_dim } => {
                let mut out = Vec::with_capacity(out_dim);
                for o in 0..out_dim {
                    let row = &self.params[w_off + o * in_dim..w_off + (o + 1) * in_dim];
                    let mut acc = self.params[b_off + o];
                    for (w, v) in row.iter().zip(input) {
                        acc += w * v;
                    }
                    out.push(acc);
                }
                out
            }
            Op::Conv3x3 { w_off, b_off, in_c, out_c, w, h } => {
                let mut out = vec![0.0; out_c * w * h];
                for o in 0..out_c {
                    for y in 0..h {
                        for x in 0..w {
                            let mut acc = self.params[b_off + o];
                            for i in 0..in_c {
                                for dy in 0..3usize {
                                    let sy = y as isize + dy as isize - 1;
                                    if sy < 0 || sy >= h as isize {
                                        continue;
                                    }
                                    for dx in 0..3usize {
                                        let sx = x as isize + dx as isize - 1;
                                        if sx < 0 || sx >= w as isize {
                                            continue;
                                        }
                                        let wv = self.params
                                            [w_off + ((o * in_c + i) * 3 + dy) * 3 + dx];
                                        acc += wv * input[(i * h + sy as usize) * w + sx as usize];
                                    }
                                }
                            }
                            out[(o * h + y) * w + x] = acc;
                        }
                    }
                }
                out
            }
            Op::MaxPool2 { c, w, h } => {
                let (w2, h2) = (w / 2, h / 2);
                let mut out = vec![0.0; c * w2 * h2];
                for ch in 0..c {
                    for y in 0..h2 {
                        for x in 0..w2 {
                            let mut best = f64::NEG_INFINITY;
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    let v = input[(ch * h + 2 * y + dy) * w + 2 * x + dx];
                                    if v > best {
                                        best = v;
                                    }
                                }
                            }
                            out[(ch * h2 + y) * w2 + x] = best;
                        }
                    }
                }
                out
            }
        }
    }

    /// Reverse pass: fills `grads` (dL/dparam, accumulated) and returns
    /// dL/d(input pixels), starting from the logit cotangent.
    fn backward(&self, acts: &[Vec<f64>], d_logits: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let mut cot = d_logits.to_vec();
        for (idx, op) in self.ops.iter().enumerate().rev() {
            let input = &acts[idx];
            cot = match *op {
                Op::Relu => input
                    .iter()
                    .zip(&cot)
                    .map(|(v, c)| if *v > 0.0 { *c } else { 0.0 })
                    .collect(),
                Op::Dense { w_off, b_off, in_dim, out_dim } => {
                    let mut d_in = vec![0.0; in_dim];
                    for o in 0..out_dim {
                        let co = cot[o];
                        grads[b_off + o] += co;
                        let row = w_off + o * in_dim;
                        for i in 0..in_dim {
                            grads[row + i] += co * input[i];
                            d_in[i] += co * self.params[row + i];
                        }
                    }
                    d_in
                }
                Op::Conv3x3 { w_off, b_off, in_c, out_c, w, h } => {
                    let mut d_in = vec![0.0; in_c * w * h];
                    for o in 0..out_c {
                        for y in 0..h {
                            for x in 0..w {
                                let co = cot[(o * h + y) * w + x];
                                if co == 0.0 {
                                    continue;
                                }
                                grads[b_off + o] += co;
                                for i in 0..in_c {
                                    for dy in 0..3usize {
                                        let sy = y as isize + dy as isize - 1;
                                        if sy < 0 || sy >= h as isize {
                                            continue;
                                        }
                                        for dx in 0..3usize {
                                            let sx = x as isize + dx as isize - 1;
                                            if sx < 0 || sx >= w as isize {
                                                continue;
                                            }
                                            let widx = w_off + ((o * in_c + i) * 3 + dy) * 3 + dx;
                                            let iidx = (i * h + sy as usize) * w + sx as usize;
                                            grads[widx] += co * input[iidx];
                                            d_in[iidx] += co * self.params[widx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    d_in
                }
                Op::MaxPool2 { c, w, h } => {
                    let (w2, h2) = (w / 2, h / 2);
                    let mut d_in = vec![0.0; c * w * h];
                    for ch in 0..c {
                        for y in 0..h2 {
                            for x in 0..w2 {
                                // Route to the first argmax in scan order.
                                let (mut best, mut by, mut bx) = (f64::NEG_INFINITY, 0, 0);
                                for dy in 0..2 {
                                    for dx in 0..2 {
                                        let v = input[(ch * h + 2 * y + dy) * w + 2 * x + dx];
                                        if v > best {
                                            best = v;
                                            by = dy;
                                            bx = dx;
                                        }
                                    }
                                }
                                d_in[(ch * h + 2 * y + by) * w + 2 * x + bx] +=
                                    cot[(ch * h2 + y) * w2 + x];
                            }
                        }
                    }
                    d_in
                }
            };
        }
        cot
    }

    pub fn forward(&self, x: &PixelVector) -> Result<(Vec<f64>, Vec<f64>)> {
        let logits = self.forward_trace(x)?.pop().unwrap();
        let probs = softmax(&logits, 1.0);
        Ok((logits, probs))
    }

    /// Mean cross-entropy over the batch, gradients for every parameter.
    pub fn loss_and_grads(
        &self,
        images: &[PixelVector],
        labels: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        if images.is_empty() || images.len() != labels.len() {
            return Err(Error::Config(format!(
                "batch of {} images with {} labels",
                images.len(),
                labels.len()
            )));
        }
        let per_example: Vec<(f64, Vec<f64>)> = images
            .par_iter()
            .zip(labels.par_iter())
            .map(|(x, &label)| {
                let acts = self.forward_trace(x)?;
                let probs = softmax(acts.last().unwrap(), 1.0);
                let loss = cross_entropy(&probs, label)?;
                let cot = softmax_ce_cotangents(&probs, label, 1.0)?;
                let mut grads = vec![0.0; self.params.len()];
                self.backward(&acts, &cot, &mut grads);
                Ok((loss, grads))
            })
            .collect::<Result<_>>()?;
        let scale = 1.0 / images.len() as f64;
        let mut loss = 0.0;
        let mut grads = vec![0.0; self.params.len()];
        for (l, g) in &per_example {
            loss += l * scale;
            for (acc, gi) in grads.iter_mut().zip(g) {
                *acc += gi * scale;
            }
        }
        Ok((loss, grads))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut header = Map::new();
        header.insert("family".into(), json!("classical"));
        header.insert("model_id".into(), json!(self.model_id));
        header.insert(
            "spec".into(),
            serde_json::to_value(&self.spec)
                .map_err(|e| Error::Format(format!("cannot serialize model spec: {e}")))?,
        );
        checkpoint::save(path, &header, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = checkpoint::load(path)?;
        Self::from_checkpoint(&ckpt)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.field_str("family")? != "classical" {
            return Err(Error::Format(format!(
                "checkpoint holds a `{}` model, not a classical net",
                ckpt.field_str("family")?
            )));
        }
        let spec: ClassicalSpec = serde_json::from_value(ckpt.field("spec")?.clone())
            .map_err(|e| Error::Format(format!("corrupt model spec in checkpoint: {e}")))?;
        let mut model = ClassicalModel::new(spec)?.with_model_id(ckpt.field_str("model_id")?);
        if ckpt.params.len() != model.params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} parameters, model needs {}",
                ckpt.params.len(),
                model.params.len()
            )));
        }
        model.params.copy_from_slice(&ckpt.params);
        Ok(model)
    }
}

impl Classifier for ClassicalModel {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn num_classes(&self) -> usize {
        self.spec.classes()
    }

    fn scores(&self, x: &PixelVector) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.pop().unwrap())
    }

    fn input_gradient(&self, x: &PixelVector, label: usize) -> Result<Vec<f64>> {
        let acts = self.forward_trace(x)?;
        let probs = softmax(acts.last().unwrap(), 1.0);
        let cot = softmax_ce_cotangents(&probs, label, 1.0)?;
        let mut grads = vec![0.0; self.params.len()];
        Ok(self.backward(&acts, &cot, &mut grads))
    }
}

impl Trainable for ClassicalModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn batch_loss_and_grads(
        &self,
        images: &[PixelVector],
        labels: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        self.loss_and_grads(images, labels)
    }
}
