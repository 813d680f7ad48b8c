// SPDX-License-Identifier: Apache-2.0

//! Batched inference for spiking recurrent networks of liquid-time-constant
//! neurons, with the DVS preprocessing pipeline, a parameter container, a
//! small ReLU-mode trainer and the benchmark protocol used to measure
//! throughput.

pub mod dataset;
pub mod error;
pub mod events;
pub mod harness;
pub mod model_io;
pub mod network;
pub mod neuron;
pub mod tensor;
pub mod train;

pub use error::{Error, ErrorKind, Result};
pub use events::{Event, EventStream, FrameSequence};
pub use network::{forward_batch, forward_sequence, predict, Model, ModelSpec, NeuronKind};
pub use neuron::{Mode, NeuronState};
pub use tensor::Matrix;
