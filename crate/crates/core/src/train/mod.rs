// SPDX-License-Identifier: Apache-2.0

//! Gradient training of the ReLU-converted network on labelled frame
//! sequences, plus evaluation in either output mode.
//!
//! Training is plain minibatch SGD on softmax cross-entropy of the
//! time-mean readout. Gradients are exact (reverse mode through time) and
//! [`grad_check`] compares them with central finite differences.

mod calibrate;
mod tape;

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::FrameSequence;
use crate::network::{forward_batch, predict, Model};
use crate::neuron::Mode;

pub use calibrate::{calibrate_init, CalibrationReport, DEFAULT_TARGET_RMS};

use tape::{flatten, loss_and_grad, softmax_xent, unflatten_into, ParamLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    /// Frames per sequence; every sample must match.
    pub t: usize,
    /// Fraction of the data used for training, the rest for validation.
    pub split: f64,
    /// Rescale each batch gradient to at most this global L2 norm.
    pub clip_norm: Option<f32>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 12,
            batch_size: 16,
            rng_seed: 42,
            t: 20,
            split: 0.8,
            clip_norm: Some(1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split must lie in (0, 1), got {}", self.split)));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("clip norm must be > 0, got {c}")));
            }
        }
        if self.batch_size == 0 || self.t == 0 {
            return Err(Error::Config("batch size and T must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Parameters of the epoch with the best validation accuracy.
    pub model: Model,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: Option<usize>,
    /// Mean loss over the training split before the first update.
    pub initial_train_loss: f64,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Softmax cross-entropy of `scores` against `label`.
pub fn loss(scores: &[f32], label: usize) -> Result<f32> {
    if label >= scores.len() {
        return Err(Error::Config(format!("label {label} out of range for {} classes", scores.len())));
    }
    let wide: Vec<f64> = scores.iter().map(|&v| f64::from(v)).collect();
    Ok(softmax_xent(&wide, label).0 as f32)
}

fn label_of(seq: &FrameSequence, classes: usize) -> Result<usize> {
    match seq.label {
        Some(l) if l < classes => Ok(l),
        Some(l) => Err(Error::Config(format!("label {l} out of range for {classes} classes"))),
        None => Err(Error::Config(format!(
            "sequence {} has no label",
            seq.source.as_deref().unwrap_or("<memory>")
        ))),
    }
}

fn check_sequence(model: &Model, seq: &FrameSequence, t: usize) -> Result<()> {
    let [c, h, w] = model.spec.input_shape;
    if seq.shape() != [t, c, h, w] {
        return Err(Error::shape(
            "training sequence",
            format!("{t}x{c}x{h}x{w}"),
            format!("{:?}", seq.shape()),
        ));
    }
    Ok(())
}

/// Deterministic shuffled train/validation split.
pub fn split_indices(n: usize, split: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((n as f64 * split).round() as usize).clamp(1.min(n), n.saturating_sub(1).max(1.min(n)));
    let val = idx.split_off(cut);
    (idx, val)
}

/// Mean loss and accuracy of the flat parameters `p` over `indices`.
fn score_split(model: &Model, layout: &ParamLayout, p: &[f32], data: &[FrameSequence], indices: &[usize]) -> Result<(f64, f64)> {
    if indices.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut total = 0.0;
    let mut correct = 0usize;
    for &i in indices {
        let seq = &data[i];
        let label = label_of(seq, model.spec.num_classes)?;
        let (l, scores) = loss_and_grad(&model.spec, layout, p, &seq.data, seq.t, label, None);
        total += f64::from(l);
        if predict(&scores)? == label {
            correct += 1;
        }
    }
    Ok((total / indices.len() as f64, correct as f64 / indices.len() as f64))
}

/// Trains `model` in ReLU mode on `data` and returns the best-validation
/// parameters with per-epoch metrics. The result depends only on the inputs
/// and `config.rng_seed`.
pub fn train(model: &Model, data: &[FrameSequence], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    model.validate()?;
    if data.len() < 2 {
        return Err(Error::Config(format!("need at least 2 labelled sequences, got {}", data.len())));
    }
    for seq in data {
        check_sequence(model, seq, config.t)?;
        label_of(seq, model.spec.num_classes)?;
    }
    let (train_idx, val_idx) = split_indices(data.len(), config.split, config.rng_seed);
    let layout = ParamLayout::new(&model.spec);
    let mut params: Vec<f32> = flatten(model);
    debug_assert_eq!(params.len(), layout.total);

    let (initial_train_loss, _) = score_split(model, &layout, &params, data, &train_idx)?;
    let mut best = model.clone();
    let mut best_key: Option<(f64, f64)> = None;
    let mut best_epoch = None;
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(1));
    let mut order = train_idx.clone();
    let mut grad = vec![0.0f32; layout.total];

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            grad.fill(0.0);
            for &i in batch {
                let seq = &data[i];
                let label = seq.label.expect("checked above");
                let (l, scores) = loss_and_grad(&model.spec, &layout, &params, &seq.data, seq.t, label, Some(&mut grad));
                if !l.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        batch: batch_no,
                        detail: format!("loss {l} on sample {i}"),
                    });
                }
                loss_sum += f64::from(l);
                if predict(&scores)? == label {
                    correct += 1;
                }
            }
            let mut step = config.learning_rate / batch.len() as f32;
            if let Some(clip) = config.clip_norm {
                let norm = grad.iter().map(|g| f64::from(*g).powi(2)).sum::<f64>().sqrt() / batch.len() as f64;
                if norm > f64::from(clip) {
                    step *= (f64::from(clip) / norm) as f32;
                }
            }
            for (w, g) in params.iter_mut().zip(&grad) {
                *w -= step * g;
            }
            if params.iter().any(|w| !w.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_no,
                    detail: "non-finite parameter after update".into(),
                });
            }
        }
        let (val_loss, val_acc) = score_split(model, &layout, &params, data, &val_idx)?;
        let m = EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / order.len() as f64,
            train_acc: correct as f64 / order.len() as f64,
            val_loss,
            val_acc,
        };
        metrics.push(m);
        let key = (val_acc, -val_loss);
        if best_key.is_none_or(|b| key > b) {
            best_key = Some(key);
            best_epoch = Some(epoch + 1);
            unflatten_into(&params, &mut best);
        }
    }
    Ok(TrainReport {
        model: best,
        metrics,
        best_epoch,
        initial_train_loss,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

/// Writes `epoch,train_loss,train_acc,val_loss,val_acc` rows.
pub fn write_metrics_csv(metrics: &[EpochMetrics], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn save_metrics_csv(metrics: &[EpochMetrics], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics_csv(metrics, file)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: Mode,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub mean_loss: f64,
    /// Spiking-mode accuracy of the same weights, when `mode` is ReLU.
    pub spiking_accuracy: Option<f64>,
}

const EVAL_CHUNK: usize = 64;

fn confusion_for(model: &Model, data: &[&FrameSequence], mode: Mode) -> Result<(Vec<Vec<usize>>, usize, f64)> {
    let k = model.spec.num_classes;
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0;
    let mut loss_sum = 0.0;
    for chunk in data.chunks(EVAL_CHUNK) {
        let scores = forward_batch(model, chunk, mode)?;
        for (r, seq) in chunk.iter().enumerate() {
            let label = label_of(seq, k)?;
            let row = scores.row(r);
            let pred = predict(row)?;
            confusion[label][pred] += 1;
            if pred == label {
                correct += 1;
            }
            loss_sum += f64::from(loss(row, label)?);
        }
    }
    Ok((confusion, correct, loss_sum))
}

/// Accuracy and confusion matrix of `model` over labelled `data`.
pub fn evaluate(model: &Model, data: &[&FrameSequence], mode: Mode) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let (confusion, correct, loss_sum) = confusion_for(model, data, mode)?;
    let spiking_accuracy = match mode {
        Mode::Relu => {
            let (_, c, _) = confusion_for(model, data, Mode::Spiking)?;
            Some(c as f64 / data.len() as f64)
        }
        Mode::Spiking => None,
    };
    Ok(EvalReport {
        mode,
        accuracy: correct as f64 / data.len() as f64,
        correct,
        total: data.len(),
        confusion,
        mean_loss: loss_sum / data.len() as f64,
        spiking_accuracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Cap on the number of parameters compared (evenly strided).
    pub max_params: usize,
    /// Gradients below this magnitude are compared absolutely.
    pub abs_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            max_params: 4096,
            abs_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<usize>,
    pub checked: usize,
    /// Parameters whose finite-difference bracket flips some unit between
    /// active and inactive, so the loss has a kink inside it.
    pub skipped_kinks: usize,
    /// Analytic gradient, flat in [`Model::tensors`] order.
    pub analytic: Vec<f64>,
}

/// Which ReLU units are active, over every layer and step.
fn active_pattern(tape: &tape::Tape<f64>) -> Vec<bool> {
    tape.layers
        .iter()
        .flat_map(|l| l.u.iter().zip(&l.theta).map(|(u, th)| u - th > 0.0))
        .collect()
}

/// Compares the reverse-mode gradient of the loss on `sample` with central
/// finite differences, both in `f64`.
pub fn grad_check(model: &Model, sample: &FrameSequence, mode: Mode, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    if mode != Mode::Relu {
        return Err(Error::UnsupportedMode { mode });
    }
    model.validate()?;
    check_sequence(model, sample, sample.t)?;
    let label = label_of(sample, model.spec.num_classes)?;
    let spec = &model.spec;
    let layout = ParamLayout::new(spec);
    let mut p: Vec<f64> = flatten(model);
    let frames: Vec<f64> = sample.data.iter().map(|&v| f64::from(v)).collect();
    let mut analytic = vec![0.0f64; layout.total];
    loss_and_grad(spec, &layout, &p, &frames, sample.t, label, Some(&mut analytic));

    let stride = layout.total.div_ceil(opts.max_params.max(1)).max(1);
    let h = opts.step;
    let eval = |p: &[f64]| {
        let tape = tape::forward(spec, &layout, p, &frames, sample.t);
        let loss = softmax_xent(&tape.scores, label).0;
        (loss, active_pattern(&tape))
    };
    let (_, base_pattern) = eval(&p);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        checked: 0,
        skipped_kinks: 0,
        analytic: Vec::new(),
    };
    for i in (0..layout.total).step_by(stride) {
        let orig = p[i];
        p[i] = orig + h;
        let (plus, plus_pattern) = eval(&p);
        p[i] = orig - h;
        let (minus, minus_pattern) = eval(&p);
        p[i] = orig;
        if plus_pattern != base_pattern || minus_pattern != base_pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let central = (plus - minus) / (2.0 * h);
        let g = analytic[i];
        let denom = g.abs().max(central.abs()).max(opts.abs_floor);
        let rel = (g - central).abs() / denom;
        report.checked += 1;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = Some(i);
        }
    }
    report.analytic = analytic;
    Ok(report)
}
