// SPDX-License-Identifier: Apache-2.0

use srnn_core::dataset::LabelledStream;
use srnn_core::events::{generate_synthetic, SynthSpec};
use srnn_core::harness::{run_sweep, write_sweep_csv, SweepConfig, CSV_HEADER, DEFAULT_BASELINE_ACCURACY};
use srnn_core::{Model, ModelSpec, NeuronKind};

fn dataset(n_per_class: usize) -> Vec<LabelledStream> {
    let spec = SynthSpec {
        samples_per_class: n_per_class,
        duration_us: 50_000,
        event_rate: 2_000.0,
        noise_rate: 200.0,
        ..SynthSpec::default()
    };
    generate_synthetic(&spec)
        .unwrap()
        .into_iter()
        .map(|s| LabelledStream {
            id: s.id,
            label: Some(s.label),
            stream: s.stream,
        })
        .collect()
}

fn small_model() -> Model {
    Model::random(ModelSpec::stacked([2, 32, 32], 1, 4, NeuronKind::Ltc, 4), 3).unwrap()
}

#[test]
fn default_grid_yields_sorted_rows_with_exact_accounting() {
    let data = dataset(256);
    let model = small_model();
    let config = SweepConfig {
        warmup_batches: 1,
        repeats: 1,
        ..SweepConfig::default()
    };
    let report = run_sweep(&model, &data, &config).unwrap();
    assert_eq!(report.rows.len(), 28);
    let keys: Vec<(usize, usize)> = report.rows.iter().map(|r| (r.t, r.batch_size)).collect();
    let mut sorted = keys.clone();
    sorted.sort_unstable();
    assert_eq!(keys, sorted);
    for row in &report.rows {
        assert_eq!(row.processed, config.repeats * row.batch_size);
        assert_eq!(row.normalized_accuracy, row.raw_accuracy / DEFAULT_BASELINE_ACCURACY);
        assert_eq!(row.warmup.batch_size, row.batch_size);
        assert!(row.warmup.finished_at.unwrap() < row.timed_start);
        assert!(row.mean_watts.is_none());
    }

    let mut csv = Vec::new();
    write_sweep_csv(&report.rows, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 28);
}

#[test]
fn accuracy_columns_repeat_across_runs() {
    let data = dataset(8);
    let model = small_model();
    let config = SweepConfig {
        batch_sizes: vec![4, 16],
        t_values: vec![10, 5],
        warmup_batches: 0,
        repeats: 2,
        ..SweepConfig::default()
    };
    let a = run_sweep(&model, &data, &config).unwrap();
    let b = run_sweep(&model, &data, &config).unwrap();
    let acc = |rows: &[srnn_core::harness::SweepResult]| rows.iter().map(|r| r.raw_accuracy.to_bits()).collect::<Vec<_>>();
    assert_eq!(acc(&a.rows), acc(&b.rows));
    assert!(a.rows.iter().all(|r| r.warmup.batches == 0 && r.warmup.finished_at.is_none()));
}

#[test]
fn batch_larger_than_dataset_is_rejected() {
    let data = dataset(2);
    let config = SweepConfig {
        batch_sizes: vec![16],
        t_values: vec![5],
        ..SweepConfig::default()
    };
    assert!(run_sweep(&small_model(), &data, &config).is_err());
}
