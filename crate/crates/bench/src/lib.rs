// SPDX-License-Identifier: Apache-2.0

//! Fixtures shared by the criterion benchmarks in `benches/`.
//!
//! Inputs come from the synthetic gesture generator so that frame sparsity
//! matches what the engine sees on real recordings.

use srnn_core::dataset::LabelledStream;
use srnn_core::events::{generate_synthetic, preprocess, PrepConfig, SynthSpec};
use srnn_core::{FrameSequence, Model, ModelSpec, NeuronKind, Result};

pub const NUM_CLASSES: usize = 4;

/// `n` labelled synthetic recordings of a quarter second each.
pub fn streams(n: usize) -> Result<Vec<LabelledStream>> {
    let spec = SynthSpec {
        num_classes: NUM_CLASSES,
        samples_per_class: n.div_ceil(NUM_CLASSES),
        ..SynthSpec::default()
    };
    Ok(generate_synthetic(&spec)?
        .into_iter()
        .take(n)
        .map(|s| LabelledStream {
            id: s.id,
            label: Some(s.label),
            stream: s.stream,
        })
        .collect())
}

/// Preprocesses `streams` into `t`-frame sequences.
pub fn frames(streams: &[LabelledStream], t: usize) -> Result<Vec<FrameSequence>> {
    let prep = PrepConfig::new(t);
    streams.iter().map(|s| preprocess(&s.stream, &prep)).collect()
}

/// Randomly initialised default-shaped model with the given depth and width.
pub fn model(kind: NeuronKind, layers: usize, width: usize) -> Result<Model> {
    let input_shape = ModelSpec::default_for(NUM_CLASSES).input_shape;
    Model::random(ModelSpec::stacked(input_shape, layers, width, kind, NUM_CLASSES), 7)
}
