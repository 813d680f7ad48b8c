// SPDX-License-Identifier: Apache-2.0

//! Discrete-time neuron models: leaky integrate-and-fire (LIF), adaptive LIF
//! (ALIF) and the liquid-time-constant (LTC) neuron, each with a spiking and
//! a ReLU-converted output mode.
//!
//! The public step functions are pure: they take a [`NeuronState`] by
//! reference and return the next one. The network drives the same arithmetic
//! through the crate-private in-place kernels below, so both paths agree
//! bitwise.
//!
//! ```text
//! LIF    u' = u (1 - 1/tau_m) + (1/tau_m) R_m i
//! ALIF   u' = alpha u + (1 - alpha) R_m i - theta s
//!        b' = rho b + (1 - rho) s,      theta' = b0 + beta b'
//! LTC    rho = sigma([x, b] W_adp + c_adp),  1/tau_m = sigma([x, u] W_m + c_m)
//!        b' = rho b + (1 - rho) s,      theta' = 0.1 + 1.8 b'
//!        u' = u + (x - u) / tau_m
//! spike  s' = [u' >= theta'], then u' <- u' (1 - s') + u_reset s'
//! relu   s' = max(0, u' - theta'), no reset
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::tensor::{accumulate_row, Matrix};

/// Base threshold of adaptive neurons.
pub const THRESHOLD_BASE: f32 = 0.1;
/// Threshold increase per unit of adaptation trace.
pub const ADAPTATION_STRENGTH: f32 = 1.8;
/// Reset (and resting) potential.
pub const RESET_POTENTIAL: f32 = 0.0;

/// How a layer communicates with the next one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Binary spikes with reset.
    #[default]
    Spiking,
    /// `max(0, u - theta)`, no reset.
    Relu,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Spiking => "spiking",
            Mode::Relu => "relu",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spiking" => Ok(Mode::Spiking),
            "relu" => Ok(Mode::Relu),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected spiking or relu)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane time constant in timesteps.
    pub tau_m: f32,
    pub r_m: f32,
    pub theta: f32,
    pub u_reset: f32,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            tau_m: 20.0,
            r_m: 1.0,
            theta: THRESHOLD_BASE,
            u_reset: RESET_POTENTIAL,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m.is_finite() && self.tau_m >= 1.0) {
            return Err(Error::Config(format!("LIF tau_m must be >= 1, got {}", self.tau_m)));
        }
        if !(self.r_m.is_finite() && self.theta.is_finite() && self.u_reset.is_finite()) {
            return Err(Error::Config("LIF parameters must be finite".into()));
        }
        if self.theta <= self.u_reset {
            return Err(Error::Config(format!(
                "LIF threshold {} must exceed reset potential {}",
                self.theta, self.u_reset
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlifParams {
    /// Membrane decay per step, `exp(-dt / tau_m)`.
    pub alpha: f32,
    /// Adaptation decay per step, `exp(-dt / tau_adp)`.
    pub rho: f32,
    pub r_m: f32,
    pub b0: f32,
    pub beta: f32,
    pub dt: f32,
    #[serde(default)]
    pub u_reset: f32,
}

impl Default for AlifParams {
    fn default() -> Self {
        Self::from_time_constants(20.0, 200.0, 1.0).expect("default time constants are valid")
    }
}

impl AlifParams {
    pub fn from_time_constants(tau_m: f32, tau_adp: f32, dt: f32) -> Result<Self> {
        if !(tau_m > 0.0 && tau_adp > 0.0 && dt > 0.0) {
            return Err(Error::Config(format!(
                "ALIF time constants must be positive (tau_m={tau_m}, tau_adp={tau_adp}, dt={dt})"
            )));
        }
        let p = Self {
            alpha: (-dt / tau_m).exp(),
            rho: (-dt / tau_adp).exp(),
            r_m: 1.0,
            b0: THRESHOLD_BASE,
            beta: ADAPTATION_STRENGTH,
            dt,
            u_reset: RESET_POTENTIAL,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f32| v > 0.0 && v < 1.0;
        if !open_unit(self.alpha) || !open_unit(self.rho) {
            return Err(Error::Config(format!(
                "ALIF decay factors must lie in (0,1): alpha={}, rho={}",
                self.alpha, self.rho
            )));
        }
        if !(self.b0 > 0.0 && self.beta >= 0.0 && self.r_m.is_finite() && self.b0.is_finite() && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "ALIF needs b0 > 0 and beta >= 0 (b0={}, beta={})",
                self.b0, self.beta
            )));
        }
        Ok(())
    }
}

/// Weights of the two gate networks of an LTC neuron group of width `n`.
///
/// Both matrices are `2n x n`: the upper `n` rows act on the input drive,
/// the lower `n` rows on the previous membrane potential (`w_tau_m`) or
/// adaptation trace (`w_tau_adp`).
#[derive(Debug, Clone, PartialEq)]
pub struct LtcTauWeights {
    pub w_tau_m: Matrix,
    pub w_tau_adp: Matrix,
    pub bias_tau_m: Vec<f32>,
    pub bias_tau_adp: Vec<f32>,
}

impl LtcTauWeights {
    pub fn zeros(width: usize) -> Self {
        Self {
            w_tau_m: Matrix::zeros(2 * width, width),
            w_tau_adp: Matrix::zeros(2 * width, width),
            bias_tau_m: vec![0.0; width],
            bias_tau_adp: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.bias_tau_m.len()
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        for (name, m) in [("w_tau_m", &self.w_tau_m), ("w_tau_adp", &self.w_tau_adp)] {
            if m.shape() != (2 * width, width) {
                return Err(Error::shape(
                    "LTC gate weights",
                    format!("{name} {}x{width}", 2 * width),
                    format!("{}x{}", m.rows(), m.cols()),
                ));
            }
        }
        for (name, v) in [("bias_tau_m", &self.bias_tau_m), ("bias_tau_adp", &self.bias_tau_adp)] {
            if v.len() != width {
                return Err(Error::shape("LTC gate bias", format!("{name} of length {width}"), v.len()));
            }
        }
        Ok(())
    }
}

/// Dynamic state of a group of neurons.
///
/// `b` is the adaptation trace; LIF neurons leave it at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState {
    pub u: Vec<f32>,
    pub b: Vec<f32>,
    pub s: Vec<f32>,
    pub theta: Vec<f32>,
}

impl NeuronState {
    /// Resting state with every threshold at `theta`.
    pub fn resting(n: usize, theta: f32) -> Self {
        Self {
            u: vec![0.0; n],
            b: vec![0.0; n],
            s: vec![0.0; n],
            theta: vec![theta; n],
        }
    }

    /// Resting state for the given neuron model.
    pub fn for_model(n: usize, model: NeuronModel<'_>) -> Self {
        Self::resting(n, model.initial_threshold())
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    fn check(&self, input_len: usize) -> Result<()> {
        let n = self.u.len();
        if self.b.len() != n || self.s.len() != n || self.theta.len() != n {
            return Err(Error::shape(
                "neuron state",
                format!("all vectors of length {n}"),
                format!("b={}, s={}, theta={}", self.b.len(), self.s.len(), self.theta.len()),
            ));
        }
        if input_len != n {
            return Err(Error::shape("neuron input", n, input_len));
        }
        ensure_finite(&self.u, "membrane potential")?;
        ensure_finite(&self.b, "adaptation trace")?;
        ensure_finite(&self.s, "spike vector")?;
        ensure_finite(&self.theta, "threshold")
    }
}

/// Borrowed parameters of one neuron model, for mode-generic stepping.
#[derive(Debug, Clone, Copy)]
pub enum NeuronModel<'a> {
    Lif(&'a LifParams),
    Alif(&'a AlifParams),
    Ltc(&'a LtcTauWeights),
}

impl NeuronModel<'_> {
    pub fn initial_threshold(&self) -> f32 {
        match self {
            NeuronModel::Lif(p) => p.theta,
            NeuronModel::Alif(p) => p.b0,
            NeuronModel::Ltc(_) => THRESHOLD_BASE,
        }
    }
}

/// Sigmoid kept strictly inside (0, 1) in `f32`.
#[inline]
pub fn gate(z: f32) -> f32 {
    const LO: f32 = f32::MIN_POSITIVE;
    const HI: f32 = 1.0 - f32::EPSILON / 2.0;
    (1.0 / (1.0 + (-z).exp())).clamp(LO, HI)
}

#[inline]
fn emit(mode: Mode, u: &mut f32, s: &mut f32, theta: f32, u_reset: f32) {
    match mode {
        Mode::Spiking => {
            let spike = if *u >= theta { 1.0 } else { 0.0 };
            *u = *u * (1.0 - spike) + u_reset * spike;
            *s = spike;
        }
        Mode::Relu => *s = (*u - theta).max(0.0),
    }
}

pub(crate) fn lif_kernel(p: &LifParams, mode: Mode, u: &mut [f32], s: &mut [f32], theta: &mut [f32], drive: &[f32]) {
    let inv_tau = 1.0 / p.tau_m;
    let keep = 1.0 - inv_tau;
    let gain = inv_tau * p.r_m;
    for j in 0..u.len() {
        let mut uj = u[j] * keep + gain * drive[j];
        theta[j] = p.theta;
        emit(mode, &mut uj, &mut s[j], p.theta, p.u_reset);
        u[j] = uj;
    }
}

pub(crate) fn alif_kernel(
    p: &AlifParams,
    mode: Mode,
    u: &mut [f32],
    b: &mut [f32],
    s: &mut [f32],
    theta: &mut [f32],
    drive: &[f32],
) {
    let gain = (1.0 - p.alpha) * p.r_m;
    for j in 0..u.len() {
        let s_prev = s[j];
        let mut uj = p.alpha * u[j] + gain * drive[j] - theta[j] * s_prev;
        let bj = p.rho * b[j] + (1.0 - p.rho) * s_prev;
        let th = p.b0 + p.beta * bj;
        emit(mode, &mut uj, &mut s[j], th, p.u_reset);
        u[j] = uj;
        b[j] = bj;
        theta[j] = th;
    }
}

/// Pre-activation of both LTC gates for one row, from the previous state.
pub(crate) fn ltc_gates_row(tw: &LtcTauWeights, drive: &[f32], u: &[f32], b: &[f32], rho: &mut [f32], kappa: &mut [f32]) {
    let n = drive.len();
    rho.copy_from_slice(&tw.bias_tau_adp);
    accumulate_row(drive, &tw.w_tau_adp, 0, rho);
    accumulate_row(b, &tw.w_tau_adp, n, rho);
    kappa.copy_from_slice(&tw.bias_tau_m);
    accumulate_row(drive, &tw.w_tau_m, 0, kappa);
    accumulate_row(u, &tw.w_tau_m, n, kappa);
}

/// Elementwise LTC update. `rho_pre` and `kappa_pre` are gate pre-activations.
#[allow(clippy::too_many_arguments)]
pub(crate) fn ltc_update(
    mode: Mode,
    u: &mut [f32],
    b: &mut [f32],
    s: &mut [f32],
    theta: &mut [f32],
    drive: &[f32],
    rho_pre: &[f32],
    kappa_pre: &[f32],
) {
    for j in 0..u.len() {
        let rho = gate(rho_pre[j]);
        let inv_tau = gate(kappa_pre[j]);
        let bj = rho * b[j] + (1.0 - rho) * s[j];
        let th = THRESHOLD_BASE + ADAPTATION_STRENGTH * bj;
        let du = (drive[j] - u[j]) * inv_tau;
        let mut uj = u[j] + du;
        emit(mode, &mut uj, &mut s[j], th, RESET_POTENTIAL);
        u[j] = uj;
        b[j] = bj;
        theta[j] = th;
    }
}

/// Synaptic input current: `weights · presyn_spikes + i_ext`.
///
/// `weights` is laid out post x pre, one row per receiving neuron.
pub fn input_current(weights: &Matrix, presyn_spikes: &[f32], i_ext: &[f32]) -> Result<Vec<f32>> {
    if weights.cols() != presyn_spikes.len() {
        return Err(Error::shape("presynaptic spikes", weights.cols(), presyn_spikes.len()));
    }
    if weights.rows() != i_ext.len() {
        return Err(Error::shape("external current", weights.rows(), i_ext.len()));
    }
    Ok((0..weights.rows())
        .map(|i| {
            weights
                .row(i)
                .iter()
                .zip(presyn_spikes)
                .fold(0.0f32, |acc, (w, s)| acc + w * s)
                + i_ext[i]
        })
        .collect())
}

/// Advances `state` by one step under `model` in the given output mode.
pub fn step(state: &NeuronState, input: &[f32], model: NeuronModel<'_>, mode: Mode) -> Result<NeuronState> {
    state.check(input.len())?;
    ensure_finite(input, "neuron input")?;
    let mut next = state.clone();
    let NeuronState { u, b, s, theta } = &mut next;
    match model {
        NeuronModel::Lif(p) => lif_kernel(p, mode, u, s, theta, input),
        NeuronModel::Alif(p) => alif_kernel(p, mode, u, b, s, theta, input),
        NeuronModel::Ltc(tw) => {
            tw.validate(input.len())?;
            let n = input.len();
            let (mut rho, mut kappa) = (vec![0.0; n], vec![0.0; n]);
            ltc_gates_row(tw, input, &state.u, &state.b, &mut rho, &mut kappa);
            ltc_update(mode, u, b, s, theta, input, &rho, &kappa);
        }
    }
    Ok(next)
}

/// One spiking LIF step driven by current `i_t`.
pub fn lif_step(state: &NeuronState, i_t: &[f32], p: &LifParams) -> Result<NeuronState> {
    step(state, i_t, NeuronModel::Lif(p), Mode::Spiking)
}

/// One spiking ALIF step. The `-theta s` term uses the threshold carried in
/// `state` from the previous step.
pub fn alif_step(state: &NeuronState, i_t: &[f32], p: &AlifParams) -> Result<NeuronState> {
    step(state, i_t, NeuronModel::Alif(p), Mode::Spiking)
}

/// One spiking LTC step with input `x_t`.
pub fn ltc_step(state: &NeuronState, x_t: &[f32], tw: &LtcTauWeights) -> Result<NeuronState> {
    step(state, x_t, NeuronModel::Ltc(tw), Mode::Spiking)
}

/// One ReLU-converted step: same membrane, trace and threshold updates as the
/// spiking step, `s' = max(0, u' - theta')`, and no reset.
pub fn relu_step(state: &NeuronState, input: &[f32], model: NeuronModel<'_>) -> Result<NeuronState> {
    step(state, input, model, Mode::Relu)
}

/// Gate outputs `(rho, 1/tau_m)` an LTC step would use from `state` and `x_t`.
pub fn ltc_time_constants(state: &NeuronState, x_t: &[f32], tw: &LtcTauWeights) -> Result<(Vec<f32>, Vec<f32>)> {
    state.check(x_t.len())?;
    tw.validate(x_t.len())?;
    let n = x_t.len();
    let (mut rho, mut kappa) = (vec![0.0; n], vec![0.0; n]);
    ltc_gates_row(tw, x_t, &state.u, &state.b, &mut rho, &mut kappa);
    Ok((rho.into_iter().map(gate).collect(), kappa.into_iter().map(gate).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(u: f32, b: f32, s: f32, theta: f32) -> NeuronState {
        NeuronState {
            u: vec![u],
            b: vec![b],
            s: vec![s],
            theta: vec![theta],
        }
    }

    #[test]
    fn input_current_examples() {
        let w = Matrix::from_rows(&[vec![2.0, -1.0]]).unwrap();
        assert_eq!(input_current(&w, &[1.0, 1.0], &[0.5]).unwrap(), vec![1.5]);

        let w = Matrix::from_rows(&[vec![0.3, -4.0], vec![7.0, 2.5]]).unwrap();
        assert_eq!(input_current(&w, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let eye = Matrix::identity(4);
        let e2 = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(input_current(&eye, &e2, &[0.0; 4]).unwrap(), e2.to_vec());
    }

    #[test]
    fn input_current_rejects_mismatch() {
        let w = Matrix::zeros(2, 3);
        assert!(matches!(input_current(&w, &[0.0; 2], &[0.0; 2]), Err(Error::Shape { .. })));
        assert!(matches!(input_current(&w, &[0.0; 3], &[0.0; 3]), Err(Error::Shape { .. })));
    }

    #[test]
    fn lif_examples() {
        let p = LifParams::default();
        let out = lif_step(&NeuronState::resting(1, p.theta), &[0.0], &p).unwrap();
        assert_eq!((out.u[0], out.s[0]), (0.0, 0.0));

        let p = LifParams { tau_m: 2.0, r_m: 1.0, theta: 10.0, u_reset: 0.0 };
        let out = lif_step(&single(1.0, 0.0, 0.0, 10.0), &[1.0], &p).unwrap();
        assert_eq!((out.u[0], out.s[0]), (1.0, 0.0));

        let p = LifParams { tau_m: 2.0, r_m: 1.0, theta: 0.5, u_reset: 0.0 };
        let out = lif_step(&single(0.0, 0.0, 0.0, 0.5), &[2.0], &p).unwrap();
        assert_eq!((out.u[0], out.s[0]), (0.0, 1.0));
    }

    #[test]
    fn lif_threshold_hit_exactly_fires() {
        let p = LifParams { tau_m: 1.0, r_m: 1.0, theta: 0.5, u_reset: -0.25 };
        let out = lif_step(&single(0.0, 0.0, 0.0, 0.5), &[0.5], &p).unwrap();
        assert_eq!((out.u[0], out.s[0]), (-0.25, 1.0));
    }

    #[test]
    fn alif_examples() {
        let p = AlifParams::default();
        let out = alif_step(&NeuronState::resting(3, p.b0), &[0.0; 3], &p).unwrap();
        assert!(out.theta.iter().all(|&t| t == 0.1));

        let p = AlifParams { rho: 0.5, ..AlifParams::default() };
        let out = alif_step(&single(0.0, 0.2, 1.0, 0.1 + 1.8 * 0.2), &[0.0], &p).unwrap();
        assert!((out.b[0] - 0.6).abs() < 1e-7);
        assert!((out.theta[0] - 1.18).abs() < 1e-6);

        let p = AlifParams { alpha: 1.0, ..AlifParams::default() };
        let out = alif_step(&single(0.05, 0.0, 0.0, 0.1), &[0.0], &p).unwrap();
        assert_eq!(out.u[0], 0.05);
    }

    #[test]
    fn alif_uses_previous_threshold_in_self_inhibition() {
        let p = AlifParams { alpha: 0.5, rho: 0.5, ..AlifParams::default() };
        let prev_theta = 0.7;
        let out = alif_step(&single(2.0, 0.0, 1.0, prev_theta), &[0.0], &p).unwrap();
        // 0.5 * 2.0 - 0.7 * 1 = 0.3; new theta = 0.1 + 1.8 * 0.5 = 1.0, no spike
        assert!((out.u[0] - 0.3).abs() < 1e-6);
        assert_eq!(out.s[0], 0.0);
        assert!((out.theta[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ltc_zero_weights_gate_at_one_half() {
        let tw = LtcTauWeights::zeros(2);
        let (rho, kappa) = ltc_time_constants(&NeuronState::resting(2, 0.1), &[3.0, -4.0], &tw).unwrap();
        assert_eq!(rho, vec![0.5, 0.5]);
        assert_eq!(kappa, vec![0.5, 0.5]);
    }

    #[test]
    fn ltc_worked_case() {
        let tw = LtcTauWeights::zeros(1);
        let out = ltc_step(&NeuronState::resting(1, 0.0), &[1.0], &tw).unwrap();
        assert_eq!(out.b[0], 0.0);
        assert_eq!(out.theta[0], 0.1);
        assert_eq!(out.s[0], 1.0);
        assert_eq!(out.u[0], 0.0);

        let relu = relu_step(&NeuronState::resting(1, 0.0), &[1.0], NeuronModel::Ltc(&tw)).unwrap();
        assert_eq!(relu.u[0], 0.5);
        assert!((relu.s[0] - 0.4).abs() < 1e-7);
    }

    #[test]
    fn ltc_trace_fixed_point() {
        let mut tw = LtcTauWeights::zeros(1);
        tw.bias_tau_adp[0] = 2.5;
        tw.w_tau_adp.set(0, 0, -1.3);
        let out = ltc_step(&single(0.02, 0.0, 0.0, 0.1), &[0.03], &tw).unwrap();
        assert_eq!(out.b[0], 0.0);
        assert_eq!(out.theta[0], 0.1);
    }

    #[test]
    fn ltc_gate_rejects_wrong_shapes() {
        let tw = LtcTauWeights::zeros(3);
        assert!(matches!(ltc_step(&NeuronState::resting(2, 0.1), &[0.0; 2], &tw), Err(Error::Shape { .. })));
    }

    #[test]
    fn relu_examples() {
        let p = LifParams { tau_m: 1.0, r_m: 1.0, theta: 0.1, u_reset: 0.0 };
        let out = relu_step(&single(0.0, 0.0, 0.0, 0.1), &[0.6], NeuronModel::Lif(&p)).unwrap();
        assert_eq!(out.u[0], 0.6);
        assert!((out.s[0] - 0.5).abs() < 1e-7);

        let out = relu_step(&single(0.0, 0.0, 0.0, 0.1), &[0.1], NeuronModel::Lif(&p)).unwrap();
        assert_eq!(out.s[0], 0.0);
    }

    #[test]
    fn relu_output_feeds_adaptation_as_real_value() {
        let p = AlifParams { rho: 0.5, ..AlifParams::default() };
        let out = relu_step(&single(0.0, 0.0, 0.5, 0.1), &[0.0], NeuronModel::Alif(&p)).unwrap();
        assert!((out.b[0] - 0.25).abs() < 1e-7);
    }

    #[test]
    fn non_finite_input_is_numeric_error() {
        let p = LifParams::default();
        let err = lif_step(&NeuronState::resting(1, p.theta), &[f32::NAN], &p).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        let mut bad = NeuronState::resting(1, p.theta);
        bad.u[0] = f32::INFINITY;
        assert!(matches!(lif_step(&bad, &[0.0], &p), Err(Error::Numeric(_))));
    }

    #[test]
    fn gate_stays_open_interval() {
        for z in [-1e30f32, -200.0, -20.0, 0.0, 20.0, 200.0, 1e30] {
            let g = gate(z);
            assert!(g > 0.0 && g < 1.0, "gate({z}) = {g}");
        }
    }

    #[test]
    fn params_validation() {
        assert!(LifParams { tau_m: 0.5, ..LifParams::default() }.validate().is_err());
        assert!(LifParams { theta: -1.0, ..LifParams::default() }.validate().is_err());
        assert!(AlifParams { alpha: 1.0, ..AlifParams::default() }.validate().is_err());
        assert!(AlifParams { b0: 0.0, ..AlifParams::default() }.validate().is_err());
        assert!(AlifParams::from_time_constants(20.0, 200.0, 1.0).is_ok());
        assert_eq!("relu".parse::<Mode>().unwrap(), Mode::Relu);
        assert!("other".parse::<Mode>().is_err());
    }
}
