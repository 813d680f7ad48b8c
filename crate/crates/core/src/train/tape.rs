// SPDX-License-Identifier: Apache-2.0

//! ReLU-mode forward pass with a recorded tape, and its exact reverse pass.
//!
//! Parameters live in one flat vector laid out in the order of
//! [`Model::tensors`]. The arithmetic is generic over the float type so the
//! same code can be checked against finite differences in `f64`.

use std::ops::Range;

use num_traits::Float;

use crate::network::{Model, ModelSpec, NeuronKind};
use crate::neuron::{ADAPTATION_STRENGTH, THRESHOLD_BASE};

#[derive(Debug, Clone)]
pub(crate) struct GateRanges {
    w_m: Range<usize>,
    w_adp: Range<usize>,
    b_m: Range<usize>,
    b_adp: Range<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerRanges {
    w_in: Range<usize>,
    w_rec: Range<usize>,
    b_in: Range<usize>,
    gates: Option<GateRanges>,
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct ParamLayout {
    layers: Vec<LayerRanges>,
    w_out: Range<usize>,
    b_out: Range<usize>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(spec: &ModelSpec) -> Self {
        let mut next = 0;
        let mut take = |len: usize| {
            let r = next..next + len;
            next += len;
            r
        };
        let layers = spec
            .layers
            .iter()
            .map(|l| {
                let n = l.width;
                LayerRanges {
                    w_in: take(l.in_dim * n),
                    w_rec: take(n * n),
                    b_in: take(n),
                    gates: matches!(l.neuron_kind, NeuronKind::Ltc).then(|| GateRanges {
                        w_m: take(2 * n * n),
                        w_adp: take(2 * n * n),
                        b_m: take(n),
                        b_adp: take(n),
                    }),
                }
            })
            .collect();
        let w_out = take(spec.output_width() * spec.num_classes);
        let b_out = take(spec.num_classes);
        Self {
            layers,
            w_out,
            b_out,
            total: next,
        }
    }
}

pub(crate) fn flatten<F: Float>(model: &Model) -> Vec<F> {
    model
        .tensors()
        .into_iter()
        .flat_map(|t| t.iter().map(|&v| F::from(v).expect("f32 fits")))
        .collect()
}

pub(crate) fn unflatten_into<F: Float>(flat: &[F], model: &mut Model) {
    let mut it = flat.iter();
    for t in model.tensors_mut() {
        for v in t.iter_mut() {
            *v = it.next().expect("flat length matches model").to_f32().expect("finite parameter");
        }
    }
}

#[inline]
fn cast<F: Float>(v: f32) -> F {
    F::from(v).expect("f32 fits")
}

#[inline]
fn gate<F: Float>(z: F) -> F {
    let lo = F::min_positive_value();
    let hi = F::one() - F::epsilon() / (F::one() + F::one());
    (F::one() / (F::one() + (-z).exp())).max(lo).min(hi)
}

/// `out[j] += sum_k x[k] w[k, j]`, ascending k, zero `x` skipped.
#[inline]
fn vecmat_acc<F: Float>(x: &[F], w: &[F], cols: usize, out: &mut [F]) {
    for (k, &a) in x.iter().enumerate() {
        if a != F::zero() {
            for (o, &wv) in out.iter_mut().zip(&w[k * cols..(k + 1) * cols]) {
                *o = *o + a * wv;
            }
        }
    }
}

/// `dx[k] += sum_j w[k, j] dy[j]`
#[inline]
fn matvec_acc<F: Float>(w: &[F], cols: usize, dy: &[F], dx: &mut [F]) {
    for (k, d) in dx.iter_mut().enumerate() {
        let row = &w[k * cols..(k + 1) * cols];
        let mut acc = F::zero();
        for (&wv, &g) in row.iter().zip(dy) {
            acc = acc + wv * g;
        }
        *d = *d + acc;
    }
}

/// `dw[k, j] += x[k] dy[j]`, zero `x` skipped.
#[inline]
fn outer_acc<F: Float>(x: &[F], dy: &[F], dw: &mut [F]) {
    let cols = dy.len();
    for (k, &a) in x.iter().enumerate() {
        if a != F::zero() {
            for (g, &d) in dw[k * cols..(k + 1) * cols].iter_mut().zip(dy) {
                *g = *g + a * d;
            }
        }
    }
}

/// Per-layer record of one sequence, each field `T x width` row-major.
#[derive(Debug, Clone)]
pub(crate) struct LayerTape<F> {
    pub(crate) drive: Vec<F>,
    pub(crate) u: Vec<F>,
    pub(crate) b: Vec<F>,
    pub(crate) s: Vec<F>,
    pub(crate) theta: Vec<F>,
    pub(crate) rho: Vec<F>,
    pub(crate) kappa: Vec<F>,
}

#[derive(Debug, Clone)]
pub(crate) struct Tape<F> {
    pub(crate) steps: usize,
    pub(crate) layers: Vec<LayerTape<F>>,
    pub scores: Vec<F>,
}

/// Runs one sequence in ReLU mode. `frames` is `T x input_dim`.
pub(crate) fn forward<F: Float>(spec: &ModelSpec, layout: &ParamLayout, p: &[F], frames: &[F], steps: usize) -> Tape<F> {
    let in_dim = spec.input_dim();
    debug_assert_eq!(frames.len(), steps * in_dim);
    let mut layers: Vec<LayerTape<F>> = spec
        .layers
        .iter()
        .map(|l| {
            let len = steps * l.width;
            let gated = matches!(l.neuron_kind, NeuronKind::Ltc);
            LayerTape {
                drive: vec![F::zero(); len],
                u: vec![F::zero(); len],
                b: vec![F::zero(); len],
                s: vec![F::zero(); len],
                theta: vec![F::zero(); len],
                rho: if gated { vec![F::zero(); len] } else { Vec::new() },
                kappa: if gated { vec![F::zero(); len] } else { Vec::new() },
            }
        })
        .collect();

    let classes = spec.num_classes;
    let top = spec.output_width();
    let inv_tau = F::one() / cast::<F>(spec.readout_tau);
    let keep = F::one() - inv_tau;
    let mut v = vec![F::zero(); classes];
    let mut sum = vec![F::zero(); classes];
    let mut proj = vec![F::zero(); classes];

    let b0 = cast::<F>(THRESHOLD_BASE);
    let beta = cast::<F>(ADAPTATION_STRENGTH);

    for t in 0..steps {
        for l in 0..spec.layers.len() {
            let ls = &spec.layers[l];
            let r = &layout.layers[l];
            let n = ls.width;
            let cur = t * n..(t + 1) * n;
            let (below, rest) = layers.split_at_mut(l);
            let tape = &mut rest[0];
            let input: &[F] = if l == 0 {
                &frames[t * in_dim..(t + 1) * in_dim]
            } else {
                let w = spec.layers[l - 1].width;
                &below[l - 1].s[t * w..(t + 1) * w]
            };
            let zeros = vec![F::zero(); n];
            let theta0 = vec![cast::<F>(ls.neuron_kind.initial_threshold()); n];
            let (u_p, b_p, s_p, th_p): (Vec<F>, Vec<F>, Vec<F>, Vec<F>) = if t == 0 {
                (zeros.clone(), zeros.clone(), zeros, theta0)
            } else {
                let prev = (t - 1) * n..t * n;
                (
                    tape.u[prev.clone()].to_vec(),
                    tape.b[prev.clone()].to_vec(),
                    tape.s[prev.clone()].to_vec(),
                    tape.theta[prev].to_vec(),
                )
            };

            let mut c = p[r.b_in.clone()].to_vec();
            vecmat_acc(input, &p[r.w_in.clone()], n, &mut c);
            vecmat_acc(&s_p, &p[r.w_rec.clone()], n, &mut c);

            let mut u = vec![F::zero(); n];
            let mut b = vec![F::zero(); n];
            let mut th = vec![F::zero(); n];
            match (&ls.neuron_kind, &r.gates) {
                (NeuronKind::Lif(lp), _) => {
                    let inv = F::one() / cast::<F>(lp.tau_m);
                    let decay = F::one() - inv;
                    let gain = inv * cast::<F>(lp.r_m);
                    for j in 0..n {
                        u[j] = u_p[j] * decay + gain * c[j];
                        th[j] = cast(lp.theta);
                    }
                }
                (NeuronKind::Alif(ap), _) => {
                    let alpha = cast::<F>(ap.alpha);
                    let rho = cast::<F>(ap.rho);
                    let gain = (F::one() - alpha) * cast::<F>(ap.r_m);
                    for j in 0..n {
                        u[j] = alpha * u_p[j] + gain * c[j] - th_p[j] * s_p[j];
                        b[j] = rho * b_p[j] + (F::one() - rho) * s_p[j];
                        th[j] = cast::<F>(ap.b0) + cast::<F>(ap.beta) * b[j];
                    }
                }
                (NeuronKind::Ltc, Some(g)) => {
                    let mut zr = p[g.b_adp.clone()].to_vec();
                    let w_adp = &p[g.w_adp.clone()];
                    vecmat_acc(&c, &w_adp[..n * n], n, &mut zr);
                    vecmat_acc(&b_p, &w_adp[n * n..], n, &mut zr);
                    let mut zm = p[g.b_m.clone()].to_vec();
                    let w_m = &p[g.w_m.clone()];
                    vecmat_acc(&c, &w_m[..n * n], n, &mut zm);
                    vecmat_acc(&u_p, &w_m[n * n..], n, &mut zm);
                    for j in 0..n {
                        let rho = gate(zr[j]);
                        let kappa = gate(zm[j]);
                        b[j] = rho * b_p[j] + (F::one() - rho) * s_p[j];
                        th[j] = b0 + beta * b[j];
                        u[j] = u_p[j] + (c[j] - u_p[j]) * kappa;
                        tape.rho[t * n + j] = rho;
                        tape.kappa[t * n + j] = kappa;
                    }
                }
                (NeuronKind::Ltc, None) => unreachable!("layout follows spec"),
            }
            for j in 0..n {
                let s = (u[j] - th[j]).max(F::zero());
                tape.s[t * n + j] = s;
            }
            tape.drive[cur.clone()].copy_from_slice(&c);
            tape.u[cur.clone()].copy_from_slice(&u);
            tape.b[cur.clone()].copy_from_slice(&b);
            tape.theta[cur].copy_from_slice(&th);
        }
        let s_top = &layers[spec.layers.len() - 1].s[t * top..(t + 1) * top];
        proj.copy_from_slice(&p[layout.b_out.clone()]);
        vecmat_acc(s_top, &p[layout.w_out.clone()], classes, &mut proj);
        for k in 0..classes {
            v[k] = v[k] * keep + inv_tau * proj[k];
            sum[k] = sum[k] + v[k];
        }
    }
    let inv_t = F::one() / F::from(steps).expect("step count fits");
    Tape {
        steps,
        layers,
        scores: sum.into_iter().map(|x| x * inv_t).collect(),
    }
}

/// Softmax cross-entropy and its gradient with respect to the scores.
pub(crate) fn softmax_xent<F: Float>(scores: &[F], label: usize) -> (F, Vec<F>) {
    let max = scores.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = scores.iter().map(|&s| (s - max).exp()).collect();
    let z = exps.iter().copied().fold(F::zero(), |a, b| a + b);
    let loss = z.ln() - (scores[label] - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(k, &e)| e / z - if k == label { F::one() } else { F::zero() })
        .collect();
    (loss, grad)
}

/// Adds the gradient of the loss whose score gradient is `dscores` to `grad`.
pub(crate) fn backward<F: Float>(
    spec: &ModelSpec,
    layout: &ParamLayout,
    p: &[F],
    frames: &[F],
    tape: &Tape<F>,
    dscores: &[F],
    grad: &mut [F],
) {
    let steps = tape.steps;
    let in_dim = spec.input_dim();
    let classes = spec.num_classes;
    let top = spec.output_width();
    let nl = spec.layers.len();
    let inv_tau = F::one() / cast::<F>(spec.readout_tau);
    let keep = F::one() - inv_tau;
    let inv_t = F::one() / F::from(steps).expect("step count fits");
    let beta = cast::<F>(ADAPTATION_STRENGTH);

    let mut dv_next = vec![F::zero(); classes];
    let mut carry_u: Vec<Vec<F>> = spec.layers.iter().map(|l| vec![F::zero(); l.width]).collect();
    let mut carry_b = carry_u.clone();
    let mut carry_s = carry_u.clone();

    for t in (0..steps).rev() {
        let mut dproj = vec![F::zero(); classes];
        for k in 0..classes {
            let dv = dscores[k] * inv_t + keep * dv_next[k];
            dv_next[k] = dv;
            dproj[k] = inv_tau * dv;
        }
        let s_top = &tape.layers[nl - 1].s[t * top..(t + 1) * top];
        for (g, &d) in grad[layout.b_out.clone()].iter_mut().zip(&dproj) {
            *g = *g + d;
        }
        outer_acc(s_top, &dproj, &mut grad[layout.w_out.clone()]);
        let mut ds_above = vec![F::zero(); top];
        matvec_acc(&p[layout.w_out.clone()], classes, &dproj, &mut ds_above);

        for l in (0..nl).rev() {
            let ls = &spec.layers[l];
            let r = &layout.layers[l];
            let lt = &tape.layers[l];
            let n = ls.width;
            let cur = t * n..(t + 1) * n;
            let c = &lt.drive[cur.clone()];
            let u = &lt.u[cur.clone()];
            let th = &lt.theta[cur.clone()];
            let zeros = vec![F::zero(); n];
            let theta0 = vec![cast::<F>(ls.neuron_kind.initial_threshold()); n];
            let (u_p, b_p, s_p, th_p): (&[F], &[F], &[F], &[F]) = if t == 0 {
                (&zeros, &zeros, &zeros, &theta0)
            } else {
                let prev = (t - 1) * n..t * n;
                (&lt.u[prev.clone()], &lt.b[prev.clone()], &lt.s[prev.clone()], &lt.theta[prev])
            };

            let theta_gain = match ls.neuron_kind {
                NeuronKind::Lif(_) => F::zero(),
                NeuronKind::Alif(ap) => cast::<F>(ap.beta),
                NeuronKind::Ltc => beta,
            };
            let mut du = vec![F::zero(); n];
            let mut db = vec![F::zero(); n];
            for j in 0..n {
                let ds = ds_above[j] + carry_s[l][j];
                let g = if u[j] - th[j] > F::zero() { ds } else { F::zero() };
                du[j] = carry_u[l][j] + g;
                // d theta = -g; theta = b0 + beta b
                db[j] = carry_b[l][j] - theta_gain * g;
            }

            let mut du_p = vec![F::zero(); n];
            let mut db_p = vec![F::zero(); n];
            let mut ds_p = vec![F::zero(); n];
            let mut dc = vec![F::zero(); n];
            match (&ls.neuron_kind, &r.gates) {
                (NeuronKind::Lif(lp), _) => {
                    let inv = F::one() / cast::<F>(lp.tau_m);
                    let decay = F::one() - inv;
                    let gain = inv * cast::<F>(lp.r_m);
                    for j in 0..n {
                        du_p[j] = decay * du[j];
                        dc[j] = gain * du[j];
                    }
                }
                (NeuronKind::Alif(ap), _) => {
                    let alpha = cast::<F>(ap.alpha);
                    let rho = cast::<F>(ap.rho);
                    let gain = (F::one() - alpha) * cast::<F>(ap.r_m);
                    let beta = cast::<F>(ap.beta);
                    for j in 0..n {
                        du_p[j] = alpha * du[j];
                        dc[j] = gain * du[j];
                        // -theta_prev s_prev term; theta_prev = b0 + beta b_prev
                        db_p[j] = beta * (-du[j] * s_p[j]) + rho * db[j];
                        ds_p[j] = -du[j] * th_p[j] + (F::one() - rho) * db[j];
                    }
                }
                (NeuronKind::Ltc, Some(gr)) => {
                    let rho = &lt.rho[cur.clone()];
                    let kappa = &lt.kappa[cur.clone()];
                    let mut dzr = vec![F::zero(); n];
                    let mut dzm = vec![F::zero(); n];
                    for j in 0..n {
                        du_p[j] = du[j] * (F::one() - kappa[j]);
                        dc[j] = du[j] * kappa[j];
                        let dkappa = du[j] * (c[j] - u_p[j]);
                        let drho = db[j] * (b_p[j] - s_p[j]);
                        db_p[j] = db[j] * rho[j];
                        ds_p[j] = db[j] * (F::one() - rho[j]);
                        dzm[j] = dkappa * kappa[j] * (F::one() - kappa[j]);
                        dzr[j] = drho * rho[j] * (F::one() - rho[j]);
                    }
                    for (g, &d) in grad[gr.b_m.clone()].iter_mut().zip(&dzm) {
                        *g = *g + d;
                    }
                    for (g, &d) in grad[gr.b_adp.clone()].iter_mut().zip(&dzr) {
                        *g = *g + d;
                    }
                    {
                        let gw = &mut grad[gr.w_m.clone()];
                        let (top_half, bottom_half) = gw.split_at_mut(n * n);
                        outer_acc(c, &dzm, top_half);
                        outer_acc(u_p, &dzm, bottom_half);
                    }
                    {
                        let gw = &mut grad[gr.w_adp.clone()];
                        let (top_half, bottom_half) = gw.split_at_mut(n * n);
                        outer_acc(c, &dzr, top_half);
                        outer_acc(b_p, &dzr, bottom_half);
                    }
                    let w_m = &p[gr.w_m.clone()];
                    let w_adp = &p[gr.w_adp.clone()];
                    matvec_acc(&w_m[..n * n], n, &dzm, &mut dc);
                    matvec_acc(&w_m[n * n..], n, &dzm, &mut du_p);
                    matvec_acc(&w_adp[..n * n], n, &dzr, &mut dc);
                    matvec_acc(&w_adp[n * n..], n, &dzr, &mut db_p);
                }
                (NeuronKind::Ltc, None) => unreachable!("layout follows spec"),
            }

            let input: &[F] = if l == 0 {
                &frames[t * in_dim..(t + 1) * in_dim]
            } else {
                let w = spec.layers[l - 1].width;
                &tape.layers[l - 1].s[t * w..(t + 1) * w]
            };
            for (g, &d) in grad[r.b_in.clone()].iter_mut().zip(&dc) {
                *g = *g + d;
            }
            outer_acc(input, &dc, &mut grad[r.w_in.clone()]);
            outer_acc(s_p, &dc, &mut grad[r.w_rec.clone()]);
            matvec_acc(&p[r.w_rec.clone()], n, &dc, &mut ds_p);
            if l > 0 {
                let mut below = vec![F::zero(); spec.layers[l - 1].width];
                matvec_acc(&p[r.w_in.clone()], n, &dc, &mut below);
                ds_above = below;
            }
            carry_u[l] = du_p;
            carry_b[l] = db_p;
            carry_s[l] = ds_p;
        }
    }
}

/// Loss of one labelled sequence and, when `grad` is given, its gradient added in.
pub(crate) fn loss_and_grad<F: Float>(
    spec: &ModelSpec,
    layout: &ParamLayout,
    p: &[F],
    frames: &[F],
    steps: usize,
    label: usize,
    grad: Option<&mut [F]>,
) -> (F, Vec<F>) {
    let tape = forward(spec, layout, p, frames, steps);
    let (loss, dscores) = softmax_xent(&tape.scores, label);
    if let Some(grad) = grad {
        backward(spec, layout, p, frames, &tape, &dscores, grad);
    }
    (loss, tape.scores)
}
