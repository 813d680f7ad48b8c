// SPDX-License-Identifier: Apache-2.0

//! Stacked recurrent spiking layers with a leaky-integrator readout.
//!
//! Per timestep each layer computes its synaptic drive
//! `c_t = a_t W_in + s_{t-1} W_rec + b_in` from the layer below (`a_t`) and its
//! own previous output, then applies the neuron update with `c_t` as input.
//! The readout integrates `s_t W_out + b_out` of the last layer and the class
//! scores are its time-mean.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::FrameSequence;
use crate::neuron::{
    alif_kernel, lif_kernel, ltc_update, AlifParams, LifParams, LtcTauWeights, Mode, NeuronModel,
    THRESHOLD_BASE,
};
use crate::tensor::{accumulate_batch, broadcast_rows, Matrix};

/// Neuron model of a layer, with its scalar constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NeuronKind {
    Lif(LifParams),
    Alif(AlifParams),
    Ltc,
}

impl NeuronKind {
    pub fn name(&self) -> &'static str {
        match self {
            NeuronKind::Lif(_) => "lif",
            NeuronKind::Alif(_) => "alif",
            NeuronKind::Ltc => "ltc",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "lif" => Ok(NeuronKind::Lif(LifParams::default())),
            "alif" => Ok(NeuronKind::Alif(AlifParams::default())),
            "ltc" => Ok(NeuronKind::Ltc),
            other => Err(Error::Config(format!("unknown neuron kind '{other}' (expected lif, alif or ltc)"))),
        }
    }

    pub fn initial_threshold(&self) -> f32 {
        match self {
            NeuronKind::Lif(p) => p.theta,
            NeuronKind::Alif(p) => p.b0,
            NeuronKind::Ltc => THRESHOLD_BASE,
        }
    }

    /// Constant drive whose steady-state potential equals the resting threshold.
    pub fn steady_state_bias(&self) -> f32 {
        match self {
            NeuronKind::Lif(p) => p.theta / p.r_m,
            NeuronKind::Alif(p) => p.b0 / p.r_m,
            NeuronKind::Ltc => THRESHOLD_BASE,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            NeuronKind::Lif(p) => p.validate(),
            NeuronKind::Alif(p) => p.validate(),
            NeuronKind::Ltc => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub width: usize,
    pub neuron_kind: NeuronKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `(channels, height, width)` of one input frame.
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
    pub readout_tau: f32,
}

pub const DEFAULT_INPUT_SHAPE: [usize; 3] = [2, 32, 32];
pub const DEFAULT_LAYERS: usize = 4;
pub const DEFAULT_WIDTH: usize = 128;
pub const DEFAULT_READOUT_TAU: f32 = 2.0;

impl ModelSpec {
    /// Uniform stack of `layers` recurrent layers of `width` neurons.
    pub fn stacked(input_shape: [usize; 3], layers: usize, width: usize, kind: NeuronKind, num_classes: usize) -> Self {
        let mut in_dim = input_shape.iter().product();
        let layers = (0..layers)
            .map(|_| {
                let spec = LayerSpec {
                    in_dim,
                    width,
                    neuron_kind: kind,
                };
                in_dim = width;
                spec
            })
            .collect();
        Self {
            input_shape,
            layers,
            num_classes,
            readout_tau: DEFAULT_READOUT_TAU,
        }
    }

    /// Four LTC layers of 128 neurons over 2x32x32 frames.
    pub fn default_for(num_classes: usize) -> Self {
        Self::stacked(DEFAULT_INPUT_SHAPE, DEFAULT_LAYERS, DEFAULT_WIDTH, NeuronKind::Ltc, num_classes)
    }

    pub fn input_dim(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model needs at least one layer".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes must be >= 2, got {}", self.num_classes)));
        }
        if !(self.readout_tau.is_finite() && self.readout_tau >= 1.0) {
            return Err(Error::Config(format!("readout_tau must be >= 1, got {}", self.readout_tau)));
        }
        let mut expected_in = self.input_dim();
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_dim == 0 || layer.width == 0 {
                return Err(Error::Config(format!("layer {i} has a zero dimension")));
            }
            if layer.in_dim != expected_in {
                return Err(Error::Config(format!(
                    "layer {i} in_dim {} does not match upstream size {expected_in}",
                    layer.in_dim
                )));
            }
            layer.neuron_kind.validate()?;
            expected_in = layer.width;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// `in_dim x width`
    pub w_in: Matrix,
    /// `width x width`
    pub w_rec: Matrix,
    pub b_in: Vec<f32>,
    /// Present exactly for LTC layers.
    pub tau: Option<LtcTauWeights>,
}

impl LayerWeights {
    pub fn zeros(spec: &LayerSpec) -> Self {
        Self {
            w_in: Matrix::zeros(spec.in_dim, spec.width),
            w_rec: Matrix::zeros(spec.width, spec.width),
            b_in: vec![0.0; spec.width],
            tau: matches!(spec.neuron_kind, NeuronKind::Ltc).then(|| LtcTauWeights::zeros(spec.width)),
        }
    }

    pub fn model<'a>(&'a self, spec: &'a LayerSpec) -> NeuronModel<'a> {
        match (&spec.neuron_kind, &self.tau) {
            (NeuronKind::Lif(p), _) => NeuronModel::Lif(p),
            (NeuronKind::Alif(p), _) => NeuronModel::Alif(p),
            (NeuronKind::Ltc, Some(tw)) => NeuronModel::Ltc(tw),
            (NeuronKind::Ltc, None) => unreachable!("validated LTC layer without gate weights"),
        }
    }

    fn validate(&self, index: usize, spec: &LayerSpec) -> Result<()> {
        let context = "layer weights";
        if self.w_in.shape() != (spec.in_dim, spec.width) {
            return Err(Error::shape(
                context,
                format!("layer{index}.w_in {}x{}", spec.in_dim, spec.width),
                format!("{}x{}", self.w_in.rows(), self.w_in.cols()),
            ));
        }
        if self.w_rec.shape() != (spec.width, spec.width) {
            return Err(Error::shape(
                context,
                format!("layer{index}.w_rec {0}x{0}", spec.width),
                format!("{}x{}", self.w_rec.rows(), self.w_rec.cols()),
            ));
        }
        if self.b_in.len() != spec.width {
            return Err(Error::shape(context, format!("layer{index}.b_in of {}", spec.width), self.b_in.len()));
        }
        match (&spec.neuron_kind, &self.tau) {
            (NeuronKind::Ltc, Some(tw)) => tw.validate(spec.width)?,
            (NeuronKind::Ltc, None) => {
                return Err(Error::shape(context, format!("layer{index} gate weights"), "none"));
            }
            (_, Some(_)) => {
                return Err(Error::shape(context, format!("no gate weights on layer{index}"), "gate weights"));
            }
            (_, None) => {}
        }
        let finite = self.w_in.is_finite()
            && self.w_rec.is_finite()
            && self.b_in.iter().all(|v| v.is_finite())
            && self.tau.as_ref().is_none_or(|tw| {
                tw.w_tau_m.is_finite()
                    && tw.w_tau_adp.is_finite()
                    && tw.bias_tau_m.iter().chain(&tw.bias_tau_adp).all(|v| v.is_finite())
            });
        if !finite {
            return Err(Error::Numeric(format!("layer{index} weights")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    /// `width x num_classes`
    pub w_out: Matrix,
    pub b_out: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub layers: Vec<LayerWeights>,
    pub readout: Readout,
}

impl Model {
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec.layers.iter().map(LayerWeights::zeros).collect();
        let readout = Readout {
            w_out: Matrix::zeros(spec.output_width(), spec.num_classes),
            b_out: vec![0.0; spec.num_classes],
        };
        Ok(Self { spec, layers, readout })
    }

    /// Seeded uniform initialisation scaled by fan-in.
    ///
    /// Input biases start each unit at its resting threshold in steady state,
    /// so in ReLU mode about half the units are active from the first step.
    pub fn random(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |m: &mut [f32], bound: f32| {
            for v in m.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        };
        for (layer, spec) in model.layers.iter_mut().zip(&model.spec.layers) {
            fill(layer.w_in.as_mut_slice(), (6.0 / spec.in_dim as f32).sqrt());
            fill(layer.w_rec.as_mut_slice(), 0.5 / (spec.width as f32).sqrt());
            layer.b_in.fill(spec.neuron_kind.steady_state_bias());
            if let Some(tw) = layer.tau.as_mut() {
                let bound = 1.0 / (2.0 * spec.width as f32).sqrt();
                fill(tw.w_tau_m.as_mut_slice(), bound);
                fill(tw.w_tau_adp.as_mut_slice(), bound);
            }
        }
        let width = model.spec.output_width();
        fill(model.readout.w_out.as_mut_slice(), (3.0 / width as f32).sqrt());
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.layers.len() != self.spec.layers.len() {
            return Err(Error::shape("model layers", self.spec.layers.len(), self.layers.len()));
        }
        for (i, (w, s)) in self.layers.iter().zip(&self.spec.layers).enumerate() {
            w.validate(i, s)?;
        }
        let (width, classes) = (self.spec.output_width(), self.spec.num_classes);
        if self.readout.w_out.shape() != (width, classes) || self.readout.b_out.len() != classes {
            return Err(Error::shape(
                "readout",
                format!("w_out {width}x{classes}, b_out {classes}"),
                format!(
                    "w_out {}x{}, b_out {}",
                    self.readout.w_out.rows(),
                    self.readout.w_out.cols(),
                    self.readout.b_out.len()
                ),
            ));
        }
        if !self.readout.w_out.is_finite() || !self.readout.b_out.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("readout weights".into()));
        }
        Ok(())
    }

    /// Parameter tensors in storage order: per layer `w_in, w_rec, b_in` and,
    /// for LTC layers, `w_tau_m, w_tau_adp, b_tau_m, b_tau_adp`; then
    /// `w_out, b_out`.
    pub fn tensors(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = Vec::new();
        for l in &self.layers {
            out.push(l.w_in.as_slice());
            out.push(l.w_rec.as_slice());
            out.push(&l.b_in);
            if let Some(tw) = &l.tau {
                out.push(tw.w_tau_m.as_slice());
                out.push(tw.w_tau_adp.as_slice());
                out.push(&tw.bias_tau_m);
                out.push(&tw.bias_tau_adp);
            }
        }
        out.push(self.readout.w_out.as_slice());
        out.push(&self.readout.b_out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.w_in.as_mut_slice());
            out.push(l.w_rec.as_mut_slice());
            out.push(&mut l.b_in);
            if let Some(tw) = &mut l.tau {
                out.push(tw.w_tau_m.as_mut_slice());
                out.push(tw.w_tau_adp.as_mut_slice());
                out.push(&mut tw.bias_tau_m);
                out.push(&mut tw.bias_tau_adp);
            }
        }
        out.push(self.readout.w_out.as_mut_slice());
        out.push(&mut self.readout.b_out);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Batched state of one layer; every matrix is `batch x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub u: Matrix,
    pub b: Matrix,
    pub s: Matrix,
    pub theta: Matrix,
}

impl LayerState {
    fn new(batch: usize, width: usize, theta0: f32) -> Self {
        Self {
            u: Matrix::zeros(batch, width),
            b: Matrix::zeros(batch, width),
            s: Matrix::zeros(batch, width),
            theta: Matrix::filled(batch, width, theta0),
        }
    }

    pub fn batch(&self) -> usize {
        self.u.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub layers: Vec<LayerState>,
    /// Readout membrane, `batch x num_classes`.
    pub readout_v: Matrix,
    /// Running sum of `readout_v` over the steps taken so far.
    pub readout_sum: Matrix,
    pub steps: usize,
}

/// Resting state for `batch` parallel sequences.
pub fn init_state(spec: &ModelSpec, batch: usize) -> NetworkState {
    NetworkState {
        layers: spec
            .layers
            .iter()
            .map(|l| LayerState::new(batch, l.width, l.neuron_kind.initial_threshold()))
            .collect(),
        readout_v: Matrix::zeros(batch, spec.num_classes),
        readout_sum: Matrix::zeros(batch, spec.num_classes),
        steps: 0,
    }
}

/// Reusable buffers for one layer.
#[derive(Debug, Clone)]
struct LayerScratch {
    drive: Matrix,
    rho: Matrix,
    kappa: Matrix,
}

impl LayerScratch {
    fn new(batch: usize, width: usize) -> Self {
        Self {
            drive: Matrix::zeros(batch, width),
            rho: Matrix::zeros(batch, width),
            kappa: Matrix::zeros(batch, width),
        }
    }
}

fn layer_step(
    spec: &LayerSpec,
    weights: &LayerWeights,
    state: &mut LayerState,
    input: &Matrix,
    mode: Mode,
    scratch: &mut LayerScratch,
) {
    let LayerScratch { drive, rho, kappa } = scratch;
    broadcast_rows(&weights.b_in, drive);
    accumulate_batch(input, &weights.w_in, 0, drive);
    accumulate_batch(&state.s, &weights.w_rec, 0, drive);

    let LayerState { u, b, s, theta } = state;
    match (&spec.neuron_kind, &weights.tau) {
        (NeuronKind::Lif(p), _) => {
            for r in 0..u.rows() {
                lif_kernel(p, mode, u.row_mut(r), s.row_mut(r), theta.row_mut(r), drive.row(r));
            }
        }
        (NeuronKind::Alif(p), _) => {
            for r in 0..u.rows() {
                alif_kernel(p, mode, u.row_mut(r), b.row_mut(r), s.row_mut(r), theta.row_mut(r), drive.row(r));
            }
        }
        (NeuronKind::Ltc, Some(tw)) => {
            let n = spec.width;
            broadcast_rows(&tw.bias_tau_adp, rho);
            accumulate_batch(drive, &tw.w_tau_adp, 0, rho);
            accumulate_batch(b, &tw.w_tau_adp, n, rho);
            broadcast_rows(&tw.bias_tau_m, kappa);
            accumulate_batch(drive, &tw.w_tau_m, 0, kappa);
            accumulate_batch(u, &tw.w_tau_m, n, kappa);
            for r in 0..u.rows() {
                ltc_update(
                    mode,
                    u.row_mut(r),
                    b.row_mut(r),
                    s.row_mut(r),
                    theta.row_mut(r),
                    drive.row(r),
                    rho.row(r),
                    kappa.row(r),
                );
            }
        }
        (NeuronKind::Ltc, None) => unreachable!("validated LTC layer without gate weights"),
    }
}

/// Advances one layer by a timestep, in place. The layer output is `state.s`.
pub fn layer_forward(
    spec: &LayerSpec,
    weights: &LayerWeights,
    state: &mut LayerState,
    input: &Matrix,
    mode: Mode,
) -> Result<()> {
    weights.validate(0, spec)?;
    let batch = state.batch();
    if input.shape() != (batch, spec.in_dim) {
        return Err(Error::shape(
            "layer input",
            format!("{batch}x{}", spec.in_dim),
            format!("{}x{}", input.rows(), input.cols()),
        ));
    }
    if state.u.cols() != spec.width {
        return Err(Error::shape("layer state", spec.width, state.u.cols()));
    }
    let mut scratch = LayerScratch::new(batch, spec.width);
    layer_step(spec, weights, state, input, mode, &mut scratch);
    if !state.u.is_finite() || !state.s.is_finite() {
        return Err(Error::Numeric("layer state".into()));
    }
    Ok(())
}

/// Leaky-integrator readout step over the last layer's output `s_last`.
pub fn readout_step(readout: &Readout, readout_tau: f32, s_last: &Matrix, v: &mut Matrix, sum: &mut Matrix) -> Result<()> {
    if s_last.cols() != readout.w_out.rows() || v.shape() != (s_last.rows(), readout.w_out.cols()) || sum.shape() != v.shape() {
        return Err(Error::shape(
            "readout",
            format!("{} inputs -> {} classes", readout.w_out.rows(), readout.w_out.cols()),
            format!("{}x{} inputs, {}x{} membrane", s_last.rows(), s_last.cols(), v.rows(), v.cols()),
        ));
    }
    let mut proj = Matrix::zeros(v.rows(), v.cols());
    readout_into(readout, readout_tau, s_last, v, sum, &mut proj);
    Ok(())
}

fn readout_into(readout: &Readout, readout_tau: f32, s_last: &Matrix, v: &mut Matrix, sum: &mut Matrix, proj: &mut Matrix) {
    broadcast_rows(&readout.b_out, proj);
    accumulate_batch(s_last, &readout.w_out, 0, proj);
    let inv = 1.0 / readout_tau;
    let keep = 1.0 - inv;
    for ((vv, p), acc) in v.as_mut_slice().iter_mut().zip(proj.as_slice()).zip(sum.as_mut_slice()) {
        *vv = *vv * keep + inv * p;
        *acc += *vv;
    }
}

/// Class scores and activity statistics of a batched forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `batch x num_classes` time-mean readout membrane.
    pub scores: Matrix,
    /// Number of non-zero layer outputs per layer, summed over time and batch.
    pub spike_counts: Vec<u64>,
}

impl ForwardOutput {
    pub fn total_spikes(&self) -> u64 {
        self.spike_counts.iter().sum()
    }
}

/// Runs every sequence of `batch` through `model` from a fresh state.
pub fn forward_batch_with_stats(model: &Model, batch: &[&FrameSequence], mode: Mode) -> Result<ForwardOutput> {
    let spec = &model.spec;
    let Some(first) = batch.first() else {
        return Err(Error::shape("batch", "at least one sequence", 0));
    };
    let steps = first.t;
    if steps == 0 {
        return Err(Error::shape("sequence length", ">= 1 frame", 0));
    }
    let [c, h, w] = spec.input_shape;
    for seq in batch {
        if (seq.channels, seq.height, seq.width) != (c, h, w) {
            return Err(Error::shape(
                "frame shape",
                format!("{c}x{h}x{w}"),
                format!("{}x{}x{}", seq.channels, seq.height, seq.width),
            ));
        }
        if seq.t != steps {
            return Err(Error::shape("sequence length (ragged batch)", steps, seq.t));
        }
    }
    if model.layers.len() != spec.layers.len() {
        return Err(Error::shape("model layers", spec.layers.len(), model.layers.len()));
    }

    let n = batch.len();
    let mut state = init_state(spec, n);
    let mut scratch: Vec<LayerScratch> = spec.layers.iter().map(|l| LayerScratch::new(n, l.width)).collect();
    let mut input = Matrix::zeros(n, spec.input_dim());
    let mut proj = Matrix::zeros(n, spec.num_classes);
    let mut spike_counts = vec![0u64; spec.layers.len()];

    for t in 0..steps {
        for (r, seq) in batch.iter().enumerate() {
            input.row_mut(r).copy_from_slice(seq.frame(t));
        }
        for l in 0..spec.layers.len() {
            let (below, rest) = state.layers.split_at_mut(l);
            let layer_in = if l == 0 { &input } else { &below[l - 1].s };
            let st = &mut rest[0];
            layer_step(&spec.layers[l], &model.layers[l], st, layer_in, mode, &mut scratch[l]);
            if !st.u.is_finite() || !st.s.is_finite() {
                return Err(Error::Numeric(format!("layer{l} state at step {t}")));
            }
            spike_counts[l] += st.s.as_slice().iter().filter(|&&v| v != 0.0).count() as u64;
        }
        let last = &state.layers[spec.layers.len() - 1].s;
        readout_into(&model.readout, spec.readout_tau, last, &mut state.readout_v, &mut state.readout_sum, &mut proj);
        state.steps += 1;
    }

    let inv_t = 1.0 / steps as f32;
    let mut scores = state.readout_sum;
    for v in scores.as_mut_slice() {
        *v *= inv_t;
    }
    if !scores.is_finite() {
        return Err(Error::Numeric("class scores".into()));
    }
    Ok(ForwardOutput { scores, spike_counts })
}

/// Class scores for every sequence in `batch`, one row per sequence.
pub fn forward_batch(model: &Model, batch: &[&FrameSequence], mode: Mode) -> Result<Matrix> {
    forward_batch_with_stats(model, batch, mode).map(|out| out.scores)
}

/// Class scores for a single sequence.
pub fn forward_sequence(model: &Model, frames: &FrameSequence, mode: Mode) -> Result<Vec<f32>> {
    forward_batch(model, &[frames], mode).map(Matrix::into_vec)
}

/// Index of the largest score; ties go to the lowest index.
pub fn predict(scores: &[f32]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::shape("scores", "at least one class", 0));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("scores".into()));
    }
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    Ok(best)
}
