// SPDX-License-Identifier: Apache-2.0

//! Constructed-network and trainer examples exercised through the public API.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srnn_core::neuron::LifParams;
use srnn_core::train::{evaluate, grad_check, train, GradCheckOptions, TrainConfig};
use srnn_core::{forward_sequence, predict, FrameSequence, Mode, Model, ModelSpec, NeuronKind};

const SHAPE: [usize; 3] = [1, 2, 4];

fn frames(t: usize, pixels: &[usize], value: f32, label: usize) -> FrameSequence {
    let dim: usize = SHAPE.iter().product();
    let mut data = vec![0.0; t * dim];
    for k in 0..t {
        for &p in pixels {
            data[k * dim + p] = value;
        }
    }
    FrameSequence::new(data, t, SHAPE[0], SHAPE[1], SHAPE[2]).unwrap().with_label(Some(label))
}

fn left_right_model() -> Model {
    let kind = NeuronKind::Lif(LifParams::default());
    let mut model = Model::zeros(ModelSpec::stacked(SHAPE, 1, 2, kind, 2)).unwrap();
    let w = SHAPE[2];
    for y in 0..SHAPE[1] {
        for x in 0..w {
            let pixel = y * w + x;
            let unit = usize::from(x >= w / 2);
            model.layers[0].w_in.set(pixel, unit, 5.0);
        }
    }
    model.readout.w_out.set(0, 0, 1.0);
    model.readout.w_out.set(1, 1, 1.0);
    model
}

#[test]
fn constructed_model_is_selective_for_left_half() {
    let model = left_right_model();
    let left = frames(10, &[0, 1, 4, 5], 1.0, 0);
    let right = frames(10, &[2, 3, 6, 7], 1.0, 1);
    for mode in [Mode::Spiking, Mode::Relu] {
        assert_eq!(predict(&forward_sequence(&model, &left, mode).unwrap()).unwrap(), 0, "{mode:?}");
        assert_eq!(predict(&forward_sequence(&model, &right, mode).unwrap()).unwrap(), 1, "{mode:?}");
    }
    let report = evaluate(&model, &[&left, &right], Mode::Relu).unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.confusion, vec![vec![1, 0], vec![0, 1]]);
}

#[test]
fn masked_pixel_has_zero_input_gradient() {
    let spec = ModelSpec::stacked(SHAPE, 2, 8, NeuronKind::Ltc, 3);
    let model = Model::random(spec, 5).unwrap();
    let masked = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dim: usize = SHAPE.iter().product();
    let data: Vec<f32> = (0..5 * dim).map(|i| if i % dim == masked { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
    let sample = FrameSequence::new(data, 5, 1, 2, 4).unwrap().with_label(Some(2));
    let report = grad_check(&model, &sample, Mode::Relu, &GradCheckOptions::default()).unwrap();
    assert!(report.max_rel_error <= 1e-3, "{}", report.max_rel_error);
    let width = 8;
    let row = &report.analytic[masked * width..(masked + 1) * width];
    assert!(row.iter().all(|&g| g == 0.0), "{row:?}");
    assert!(report.analytic[..dim * width].iter().any(|&g| g != 0.0));
}

#[test]
fn silent_network_has_zero_hidden_gradient() {
    let spec = ModelSpec::stacked(SHAPE, 2, 4, NeuronKind::Lif(LifParams::default()), 2);
    let mut model = Model::random(spec, 3).unwrap();
    for layer in &mut model.layers {
        layer.b_in.fill(-100.0);
    }
    let sample = frames(4, &[0, 3, 5], 1.0, 1);
    let report = grad_check(&model, &sample, Mode::Relu, &GradCheckOptions::default()).unwrap();
    let b_out = model.spec.num_classes;
    let (hidden, readout_bias) = report.analytic.split_at(report.analytic.len() - b_out);
    assert!(hidden.iter().all(|&g| g == 0.0));
    // Only the readout bias still moves the loss, pushing toward the label.
    assert!(readout_bias[0] > 0.0 && readout_bias[1] < 0.0, "{readout_bias:?}");
    assert!((readout_bias[0] + readout_bias[1]).abs() < 1e-12, "{readout_bias:?}");
}

fn random_dataset(n: usize, k: usize, seed: u64) -> Vec<FrameSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim: usize = SHAPE.iter().product();
    (0..n)
        .map(|i| {
            let data = (0..6 * dim).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect();
            FrameSequence::new(data, 6, 1, 2, 4).unwrap().with_label(Some(i % k))
        })
        .collect()
}

#[test]
fn random_model_scores_at_chance() {
    let k = 4;
    let data = random_dataset(800, k, 11);
    let refs: Vec<&FrameSequence> = data.iter().collect();
    for (seed, kind) in [(1, NeuronKind::Ltc), (2, NeuronKind::Lif(LifParams::default()))] {
        let model = Model::random(ModelSpec::stacked(SHAPE, 2, 16, kind, k), seed).unwrap();
        for mode in [Mode::Spiking, Mode::Relu] {
            let report = evaluate(&model, &refs, mode).unwrap();
            let p = 1.0 / k as f64;
            let sigma = (p * (1.0 - p) / data.len() as f64).sqrt();
            assert!((report.accuracy - p).abs() <= 3.0 * sigma, "{mode:?}: {}", report.accuracy);
            let total: usize = report.confusion.iter().flatten().sum();
            assert_eq!(total, data.len());
            for (c, row) in report.confusion.iter().enumerate() {
                assert_eq!(row.iter().sum::<usize>(), data.len() / k, "class {c}");
            }
        }
    }
}

#[test]
fn evaluate_leaves_model_untouched() {
    let data = random_dataset(40, 2, 4);
    let refs: Vec<&FrameSequence> = data.iter().collect();
    let model = Model::random(ModelSpec::stacked(SHAPE, 2, 8, NeuronKind::Ltc, 2), 8).unwrap();
    let before = model.clone();
    let a = evaluate(&model, &refs, Mode::Relu).unwrap();
    let b = evaluate(&model, &refs, Mode::Relu).unwrap();
    assert_eq!(model, before);
    assert_eq!(a, b);
}

#[test]
fn same_seed_gives_identical_metric_traces() {
    let data = random_dataset(48, 2, 6);
    let model = Model::random(ModelSpec::stacked(SHAPE, 1, 6, NeuronKind::Ltc, 2), 1).unwrap();
    let config = TrainConfig {
        epochs: 3,
        batch_size: 8,
        t: 6,
        learning_rate: 0.5,
        ..TrainConfig::default()
    };
    let a = train(&model, &data, &config).unwrap();
    let b = train(&model, &data, &config).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.model, b.model);
    assert_eq!(a.metrics.len(), 3);
}
