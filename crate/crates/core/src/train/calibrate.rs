// SPDX-License-Identifier: Apache-2.0

//! Data-dependent rescaling of input weights before training.
//!
//! Fan-in initialisation assumes dense inputs. Event frames are sparse, so
//! the first layer sees a drive far below threshold and every later layer
//! shrinks it further. Calibration runs a probe batch through the network
//! and rescales each layer's input weights, bottom up, until the membrane
//! potential spreads around the threshold with a chosen RMS.

use crate::error::{Error, Result};
use crate::events::FrameSequence;
use crate::network::{init_state, layer_forward, Model};
use crate::neuron::Mode;
use crate::tensor::Matrix;

/// Target RMS of `u - theta_0` in ReLU mode.
pub const DEFAULT_TARGET_RMS: f32 = 0.4;

const PASSES: usize = 2;
const MAX_GAIN: f32 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    /// Total factor applied to each layer's input weights.
    pub gains: Vec<f32>,
    /// Membrane RMS per layer before and after.
    pub rms_before: Vec<f32>,
    pub rms_after: Vec<f32>,
}

/// Membrane RMS about the resting threshold for every layer over the probe.
fn layer_rms(model: &Model, probe: &[&FrameSequence]) -> Result<Vec<f32>> {
    let spec = &model.spec;
    let batch = probe.len();
    let steps = probe[0].t;
    let mut state = init_state(spec, batch);
    let mut sums = vec![0.0f64; spec.layers.len()];
    let mut counts = vec![0usize; spec.layers.len()];
    let frame_len = spec.input_dim();
    let mut rows = Vec::with_capacity(batch * frame_len);
    for t in 0..steps {
        rows.clear();
        for seq in probe {
            rows.extend_from_slice(seq.frame(t));
        }
        let mut input = Matrix::from_vec(batch, frame_len, rows.clone())?;
        for (l, ls) in spec.layers.iter().enumerate() {
            layer_forward(ls, &model.layers[l], &mut state.layers[l], &input, Mode::Relu)?;
            let theta0 = ls.neuron_kind.initial_threshold();
            for &u in state.layers[l].u.as_slice() {
                sums[l] += f64::from(u - theta0).powi(2);
            }
            counts[l] += state.layers[l].u.as_slice().len();
            input = state.layers[l].s.clone();
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| (s / n.max(1) as f64).sqrt() as f32)
        .collect())
}

/// Rescales `model`'s input weights in place so that each layer's membrane
/// RMS on `probe` is close to `target_rms`.
pub fn calibrate_init(model: &mut Model, probe: &[&FrameSequence], target_rms: f32) -> Result<CalibrationReport> {
    if probe.is_empty() {
        return Err(Error::Config("calibration needs at least one probe sequence".into()));
    }
    if !(target_rms.is_finite() && target_rms > 0.0) {
        return Err(Error::Config(format!("calibration target must be > 0, got {target_rms}")));
    }
    let [c, h, w] = model.spec.input_shape;
    let t = probe[0].t;
    if let Some(bad) = probe.iter().find(|s| s.shape() != [t, c, h, w]) {
        return Err(Error::shape("calibration probe", format!("{t}x{c}x{h}x{w}"), format!("{:?}", bad.shape())));
    }
    let rms_before = layer_rms(model, probe)?;
    let mut gains = vec![1.0f32; model.layers.len()];
    for (l, total) in gains.iter_mut().enumerate() {
        for _ in 0..PASSES {
            let rms = layer_rms(model, probe)?[l];
            let gain = if rms > 0.0 { (target_rms / rms).clamp(1.0 / MAX_GAIN, MAX_GAIN) } else { MAX_GAIN };
            for v in model.layers[l].w_in.as_mut_slice() {
                *v *= gain;
            }
            *total *= gain;
        }
    }
    let rms_after = layer_rms(model, probe)?;
    Ok(CalibrationReport {
        gains,
        rms_before,
        rms_after,
    })
}
