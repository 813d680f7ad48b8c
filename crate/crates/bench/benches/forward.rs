// SPDX-License-Identifier: Apache-2.0

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use srnn_bench::{frames, model, streams};
use srnn_core::events::{preprocess, PrepConfig};
use srnn_core::neuron::{AlifParams, LifParams};
use srnn_core::{forward_batch, FrameSequence, Mode, NeuronKind};

const T: usize = 20;

fn batch_sizes(c: &mut Criterion) {
    let data = frames(&streams(64).unwrap(), T).unwrap();
    let model = model(NeuronKind::Ltc, 4, 128).unwrap();
    let mut group = c.benchmark_group("forward_batch/ltc");
    group.sample_size(10);
    for batch in [1, 16, 64] {
        let refs: Vec<&FrameSequence> = data.iter().take(batch).collect();
        group.throughput(Throughput::Elements(batch as u64));
        for mode in [Mode::Spiking, Mode::Relu] {
            group.bench_with_input(BenchmarkId::new(format!("{mode:?}"), batch), &refs, |b, refs| {
                b.iter(|| forward_batch(&model, black_box(refs), mode).unwrap())
            });
        }
    }
    group.finish();
}

fn neuron_kinds(c: &mut Criterion) {
    let data = frames(&streams(16).unwrap(), T).unwrap();
    let refs: Vec<&FrameSequence> = data.iter().collect();
    let mut group = c.benchmark_group("forward_batch/kind");
    group.sample_size(10);
    group.throughput(Throughput::Elements(refs.len() as u64));
    for (name, kind) in [
        ("lif", NeuronKind::Lif(LifParams::default())),
        ("alif", NeuronKind::Alif(AlifParams::default())),
        ("ltc", NeuronKind::Ltc),
    ] {
        let model = model(kind, 4, 128).unwrap();
        group.bench_function(name, |b| b.iter(|| forward_batch(&model, black_box(&refs), Mode::Spiking).unwrap()));
    }
    group.finish();
}

fn preprocessing(c: &mut Criterion) {
    let data = streams(16).unwrap();
    let mut group = c.benchmark_group("preprocess");
    group.throughput(Throughput::Elements(data.len() as u64));
    for t in [20, 100] {
        let prep = PrepConfig::new(t);
        group.bench_with_input(BenchmarkId::from_parameter(t), &prep, |b, prep| {
            b.iter(|| {
                for s in &data {
                    black_box(preprocess(&s.stream, prep).unwrap());
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, batch_sizes, neuron_kinds, preprocessing);
criterion_main!(benches);
