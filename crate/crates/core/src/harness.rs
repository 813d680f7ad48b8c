// SPDX-License-Identifier: Apache-2.0

//! Throughput and accuracy sweeps over batch size and sequence length.
//!
//! A sweep cell runs `warmup_batches` untimed batches, then `repeats` timed
//! batches of the same size, and reports classified sequences per second.
//! Only the batched forward pass is timed unless `include_prep` is set, in
//! which case event preprocessing of each batch is timed as well.
//!
//! An optional power sampler is any shell command that prints one decimal
//! watts value per line; it runs alongside the timed region and its values
//! are averaged.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::dataset::LabelledStream;
use crate::error::{Error, Result};
use crate::events::{preprocess, FrameSequence, PrepConfig};
use crate::network::{forward_batch, Model};
use crate::neuron::Mode;
use crate::train::evaluate;

pub const DEFAULT_BATCH_SIZES: [usize; 7] = [16, 32, 64, 128, 256, 512, 1024];
pub const DEFAULT_T_VALUES: [usize; 4] = [20, 35, 50, 100];
pub const DEFAULT_BASELINE_ACCURACY: f64 = 0.91;

pub const CSV_HEADER: &str = "mode,T,batch_size,sequences_per_sec,raw_accuracy,normalized_accuracy,wall_time_s,mean_watts";

/// How long to wait after the timed region for a sampler that has not yet
/// printed anything.
pub const POWER_GRACE: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub batch_sizes: Vec<usize>,
    pub t_values: Vec<usize>,
    pub warmup_batches: usize,
    pub repeats: usize,
    pub mode: Mode,
    pub baseline_accuracy: f64,
    pub include_prep: bool,
    pub power_cmd: Option<String>,
    /// Preprocessing template; its `t` is overridden per sweep value.
    pub prep: PrepConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            batch_sizes: DEFAULT_BATCH_SIZES.to_vec(),
            t_values: DEFAULT_T_VALUES.to_vec(),
            warmup_batches: 3,
            repeats: 10,
            mode: Mode::Spiking,
            baseline_accuracy: DEFAULT_BASELINE_ACCURACY,
            include_prep: false,
            power_cmd: None,
            prep: PrepConfig::new(DEFAULT_T_VALUES[0]),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_sizes.is_empty() || self.t_values.is_empty() {
            return Err(Error::Config("batch sizes and T values must be non-empty".into()));
        }
        if self.batch_sizes.contains(&0) || self.t_values.contains(&0) {
            return Err(Error::Config("batch sizes and T values must be positive".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if !(self.baseline_accuracy > 0.0 && self.baseline_accuracy <= 1.0) {
            return Err(Error::Config(format!(
                "baseline accuracy must lie in (0, 1], got {}",
                self.baseline_accuracy
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub mode: Mode,
    #[serde(rename = "T")]
    pub t: usize,
    pub batch_size: usize,
    pub sequences_per_sec: f64,
    pub raw_accuracy: f64,
    pub normalized_accuracy: f64,
    pub wall_time_s: f64,
    pub mean_watts: Option<f64>,
    /// Sequences pushed through the timed region.
    #[serde(skip)]
    pub processed: usize,
    #[serde(skip)]
    pub warmup: WarmupReport,
    /// Start of the timed region.
    #[serde(skip)]
    pub timed_start: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WarmupReport {
    pub batches: usize,
    pub batch_size: usize,
    /// Completion time of the last warm-up batch.
    pub finished_at: Option<Instant>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    pub batches: usize,
    pub processed: usize,
    pub wall_time: Duration,
    pub sequences_per_sec: f64,
    pub started_at: Instant,
    pub finished_at: Instant,
}

/// Indices of batch `r` when batches walk through `n` items cyclically.
fn batch_indices(r: usize, batch_size: usize, n: usize) -> impl Iterator<Item = usize> {
    (0..batch_size).map(move |i| (r * batch_size + i) % n)
}

fn check_size(available: usize, batch_size: usize) -> Result<()> {
    if available < batch_size {
        return Err(Error::InsufficientData {
            available,
            requested: batch_size,
        });
    }
    Ok(())
}

/// Runs `batches` untimed inferences of `batch_size` sequences.
pub fn warmup(model: &Model, data: &[FrameSequence], batch_size: usize, batches: usize, mode: Mode) -> Result<WarmupReport> {
    check_size(data.len(), batch_size)?;
    let mut finished_at = None;
    for r in 0..batches {
        let batch: Vec<&FrameSequence> = batch_indices(r, batch_size, data.len()).map(|i| &data[i]).collect();
        forward_batch(model, &batch, mode)?;
        finished_at = Some(Instant::now());
    }
    Ok(WarmupReport {
        batches,
        batch_size,
        finished_at,
    })
}

fn timed<F>(repeats: usize, batch_size: usize, n: usize, mut run: F) -> Result<Throughput>
where
    F: FnMut(Vec<usize>) -> Result<()>,
{
    check_size(n, batch_size)?;
    if repeats == 0 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    let started_at = Instant::now();
    for r in 0..repeats {
        run(batch_indices(r, batch_size, n).collect())?;
    }
    let finished_at = Instant::now();
    let wall_time = finished_at - started_at;
    let processed = repeats * batch_size;
    // A clock tick coarser than the run would report an infinite rate.
    let secs = wall_time.as_secs_f64().max(1e-9);
    Ok(Throughput {
        batches: repeats,
        processed,
        wall_time,
        sequences_per_sec: processed as f64 / secs,
        started_at,
        finished_at,
    })
}

/// Times `repeats` batched forward passes over preprocessed sequences.
pub fn measure_throughput(model: &Model, data: &[FrameSequence], batch_size: usize, repeats: usize, mode: Mode) -> Result<Throughput> {
    timed(repeats, batch_size, data.len(), |idx| {
        let batch: Vec<&FrameSequence> = idx.iter().map(|&i| &data[i]).collect();
        forward_batch(model, &batch, mode).map(drop)
    })
}

/// Like [`measure_throughput`] but preprocesses each batch from raw events
/// inside the timed region.
pub fn measure_throughput_with_prep(
    model: &Model,
    streams: &[LabelledStream],
    prep: &PrepConfig,
    batch_size: usize,
    repeats: usize,
    mode: Mode,
) -> Result<Throughput> {
    timed(repeats, batch_size, streams.len(), |idx| {
        let seqs = idx
            .iter()
            .map(|&i| preprocess(&streams[i].stream, prep))
            .collect::<Result<Vec<_>>>()?;
        let batch: Vec<&FrameSequence> = seqs.iter().collect();
        forward_batch(model, &batch, mode).map(drop)
    })
}

enum SamplerLine {
    Watts(f64),
    Unparsed(String),
}

/// Mean of a sampler's readings plus any lines it could not parse.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerReading {
    pub samples: Vec<f64>,
    pub warnings: Vec<String>,
}

impl PowerReading {
    pub fn mean_watts(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.samples.iter().sum::<f64>() / self.samples.len() as f64)
        }
    }
}

/// A running sampler subprocess. Its stdout is drained on a helper thread so
/// the measured work never blocks on the pipe.
pub struct PowerSampler {
    child: Child,
    lines: Receiver<SamplerLine>,
}

impl PowerSampler {
    pub fn start(cmd: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::io(format!("power command `{cmd}`"), e))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let msg = match trimmed.parse::<f64>() {
                    Ok(w) if w.is_finite() => SamplerLine::Watts(w),
                    _ => SamplerLine::Unparsed(line),
                };
                if tx.send(msg).is_err() {
                    break;
                }
            }
        });
        Ok(Self { child, lines: rx })
    }

    /// Stops the sampler and returns what it printed. If nothing has been
    /// read yet, waits up to `grace` for a first value.
    pub fn finish(mut self, grace: Duration) -> PowerReading {
        let mut reading = PowerReading::default();
        let take = |msg: SamplerLine, r: &mut PowerReading| match msg {
            SamplerLine::Watts(w) => r.samples.push(w),
            SamplerLine::Unparsed(l) => r.warnings.push(format!("skipping unparseable power sample {l:?}")),
        };
        while let Ok(msg) = self.lines.try_recv() {
            take(msg, &mut reading);
        }
        let deadline = Instant::now() + grace;
        while reading.samples.is_empty() {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(msg) => take(msg, &mut reading),
                Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
        if reading.samples.is_empty() {
            reading.warnings.push("power sampler produced no readings; omitting mean_watts".into());
        }
        reading
    }
}

/// Runs `cmd` for `duration` and averages its readings.
pub fn power_sample(cmd: &str, duration: Duration) -> Result<PowerReading> {
    let sampler = PowerSampler::start(cmd)?;
    thread::sleep(duration);
    Ok(sampler.finish(POWER_GRACE))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepResult>,
    pub warnings: Vec<String>,
}

/// One result per `(T, batch_size)` pair, sorted by `T` then batch size.
pub fn run_sweep(model: &Model, data: &[LabelledStream], config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let mut t_values = config.t_values.clone();
    t_values.sort_unstable();
    t_values.dedup();
    let mut batch_sizes = config.batch_sizes.clone();
    batch_sizes.sort_unstable();
    batch_sizes.dedup();
    if let Some(&largest) = batch_sizes.last() {
        check_size(data.len(), largest)?;
    }

    let mut report = SweepReport::default();
    for &t in &t_values {
        let prep = PrepConfig { t, ..config.prep };
        let seqs = data
            .iter()
            .map(|s| Ok(preprocess(&s.stream, &prep)?.with_label(s.label)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&FrameSequence> = seqs.iter().collect();
        let raw_accuracy = if seqs.iter().all(|s| s.label.is_some()) {
            evaluate_accuracy(model, &refs, config.mode)?
        } else {
            report.warnings.push(format!("T={t}: dataset has unlabelled samples; accuracy is NaN"));
            f64::NAN
        };
        for &batch_size in &batch_sizes {
            let warm = warmup(model, &seqs, batch_size, config.warmup_batches, config.mode)?;
            let sampler = config.power_cmd.as_deref().map(PowerSampler::start).transpose()?;
            let tp = if config.include_prep {
                measure_throughput_with_prep(model, data, &prep, batch_size, config.repeats, config.mode)?
            } else {
                measure_throughput(model, &seqs, batch_size, config.repeats, config.mode)?
            };
            let mean_watts = sampler.map(|s| {
                let reading = s.finish(POWER_GRACE);
                report
                    .warnings
                    .extend(reading.warnings.iter().map(|w| format!("T={t} batch={batch_size}: {w}")));
                reading.mean_watts()
            });
            report.rows.push(SweepResult {
                mode: config.mode,
                t,
                batch_size,
                sequences_per_sec: tp.sequences_per_sec,
                raw_accuracy,
                normalized_accuracy: raw_accuracy / config.baseline_accuracy,
                wall_time_s: tp.wall_time.as_secs_f64(),
                mean_watts: mean_watts.flatten(),
                processed: tp.processed,
                warmup: warm,
                timed_start: tp.started_at,
            });
        }
    }
    Ok(report)
}

fn evaluate_accuracy(model: &Model, data: &[&FrameSequence], mode: Mode) -> Result<f64> {
    // Spiking-mode follow-up accuracy is not needed here, so skip the
    // second pass that `evaluate` runs for ReLU mode.
    match mode {
        Mode::Spiking => Ok(evaluate(model, data, mode)?.accuracy),
        Mode::Relu => {
            let k = model.spec.num_classes;
            let mut correct = 0usize;
            for chunk in data.chunks(64) {
                let scores = forward_batch(model, chunk, mode)?;
                for (r, seq) in chunk.iter().enumerate() {
                    let label = seq.label.filter(|&l| l < k).ok_or_else(|| {
                        Error::Config(format!("sample label {:?} out of range for {k} classes", seq.label))
                    })?;
                    if crate::network::predict(scores.row(r))? == label {
                        correct += 1;
                    }
                }
            }
            Ok(correct as f64 / data.len() as f64)
        }
    }
}

pub fn write_sweep_csv(rows: &[SweepResult], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}

pub fn save_sweep_csv(rows: &[SweepResult], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_sweep_csv(rows, file)
}
