// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use srnn_core::dataset::{class_count, read_event_dataset, read_frame_dataset, write_event_dataset, write_frame_dataset, LabelledStream};
use srnn_core::events::{generate_synthetic, parse_events_file, preprocess, EventFormat, PrepConfig, SynthSpec, DVS128_SIZE};
use srnn_core::harness::{run_sweep, save_sweep_csv, SweepConfig, DEFAULT_BASELINE_ACCURACY};
use srnn_core::model_io::{load_model, read_manifest, save_model, validate_manifest};
use srnn_core::network::{ModelSpec, NeuronKind, DEFAULT_READOUT_TAU};
use srnn_core::train::{calibrate_init, evaluate, save_metrics_csv, split_indices, train, TrainConfig, DEFAULT_TARGET_RMS};
use srnn_core::{forward_sequence, predict, Error, ErrorKind, Mode, Model, Result};

const CALIBRATION_PROBE: usize = 32;

#[derive(Parser, Debug)]
#[command(name = "srnn", version, about = "Spiking recurrent network toolkit for event-camera data")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Convert an event dataset into normalised frame tensors.
    Prep(PrepArgs),
    /// Generate a labelled synthetic event dataset of moving bars.
    GenSynth(GenSynthArgs),
    /// Train the ReLU form of the network on a frame dataset.
    TrainRelu(TrainArgs),
    /// Classify a single event recording.
    Infer(InferArgs),
    /// Sweep throughput and accuracy over batch sizes and sequence lengths.
    Bench(BenchArgs),
    /// Print and validate a saved model.
    InspectModel(InspectArgs),
}

#[derive(Args, Debug, Clone)]
struct WindowArgs {
    /// Accumulation window in microseconds; defaults to the whole recording.
    #[arg(long)]
    window_us: Option<u64>,
    /// Window start relative to the first event, in microseconds.
    #[arg(long, default_value_t = 0)]
    window_offset_us: u64,
}

impl WindowArgs {
    fn prep(&self, t: usize) -> PrepConfig {
        PrepConfig {
            window_us: self.window_us,
            window_offset_us: self.window_offset_us,
            ..PrepConfig::new(t)
        }
    }
}

#[derive(Args, Debug)]
struct PrepArgs {
    /// Event dataset directory (with index.json).
    #[arg(long)]
    data: PathBuf,
    /// Output directory for frame tensors.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    t: usize,
    #[command(flatten)]
    window: WindowArgs,
}

#[derive(Args, Debug)]
struct GenSynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = SynthSpec::default().duration_us)]
    duration_us: u64,
    /// Bar events per second.
    #[arg(long, default_value_t = SynthSpec::default().event_rate)]
    event_rate: f64,
    /// Background noise events per second.
    #[arg(long, default_value_t = SynthSpec::default().noise_rate)]
    noise_rate: f64,
    #[arg(long, default_value = "evt1")]
    format: EventFormat,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Frame dataset directory produced by `prep`.
    #[arg(long)]
    data: PathBuf,
    /// Model manifest to write; the blob goes next to it.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Per-epoch metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    layers: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value = "ltc")]
    neuron: String,
    #[arg(long, default_value_t = DEFAULT_READOUT_TAU)]
    readout_tau: f32,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f32,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().rng_seed)]
    seed: u64,
    /// Fraction of samples used for training.
    #[arg(long, default_value_t = TrainConfig::default().split)]
    split: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    #[arg(long, default_value_t = TrainConfig::default().clip_norm.unwrap_or(0.0))]
    clip_norm: f32,
    /// Membrane RMS targeted by input-weight calibration; 0 disables it.
    #[arg(long, default_value_t = DEFAULT_TARGET_RMS)]
    calibrate_rms: f32,
    /// Write a JSON summary to this path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    /// Event recording (csv or evt1).
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value_t = 20)]
    t: usize,
    #[arg(long, default_value = "spiking")]
    mode: Mode,
    #[arg(long)]
    format: Option<EventFormat>,
    #[arg(long, default_value_t = DVS128_SIZE)]
    sensor_w: u16,
    #[arg(long, default_value_t = DVS128_SIZE)]
    sensor_h: u16,
    #[command(flatten)]
    window: WindowArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Event dataset directory (with index.json).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "20,35,50,100")]
    t: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256,512,1024")]
    batch: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value = "spiking")]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_BASELINE_ACCURACY)]
    baseline_acc: f64,
    /// Shell command printing one watts value per line.
    #[arg(long)]
    power_cmd: Option<String>,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Time event preprocessing together with inference.
    #[arg(long)]
    include_prep: bool,
    #[command(flatten)]
    window: WindowArgs,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Prep(a) => prep(a),
        Cmd::GenSynth(a) => gen_synth(a),
        Cmd::TrainRelu(a) => train_relu(a),
        Cmd::Infer(a) => infer(a),
        Cmd::Bench(a) => bench(a),
        Cmd::InspectModel(a) => inspect(a),
    }
}

fn gen_synth(a: GenSynthArgs) -> Result<()> {
    let spec = SynthSpec {
        num_classes: a.classes,
        samples_per_class: a.per_class,
        duration_us: a.duration_us,
        event_rate: a.event_rate,
        noise_rate: a.noise_rate,
        rng_seed: a.seed,
        ..SynthSpec::default()
    };
    let samples: Vec<LabelledStream> = generate_synthetic(&spec)?
        .into_iter()
        .map(|s| LabelledStream {
            id: s.id,
            label: Some(s.label),
            stream: s.stream,
        })
        .collect();
    let index = write_event_dataset(&a.out, &samples, a.format, Some(spec.num_classes))?;
    println!("wrote {} samples to {}", index.samples.len(), a.out.display());
    Ok(())
}

fn prep(a: PrepArgs) -> Result<()> {
    let (index, samples) = read_event_dataset(&a.data)?;
    let cfg = a.window.prep(a.t);
    let mut ids = Vec::with_capacity(samples.len());
    let mut seqs = Vec::with_capacity(samples.len());
    for s in samples {
        let mut seq = preprocess(&s.stream, &cfg)?.with_label(s.label);
        seq.source = Some(s.id.clone());
        ids.push(s.id);
        seqs.push(seq);
    }
    write_frame_dataset(&a.out, &ids, &seqs, (index.sensor_w, index.sensor_h), class_count(&index))?;
    println!("wrote {} sequences of T={} to {}", seqs.len(), a.t, a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    samples: usize,
    train_samples: usize,
    val_samples: usize,
    parameters: usize,
    epochs: usize,
    best_epoch: Option<usize>,
    initial_train_loss: f64,
    final_train_loss: Option<f64>,
    val_accuracy: f64,
    val_accuracy_spiking: Option<f64>,
    confusion: Vec<Vec<usize>>,
    seconds: f64,
}

fn train_relu(a: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let (index, data) = read_frame_dataset(&a.data)?;
    let first = data.first().ok_or_else(|| Error::Config(format!("{} is empty", a.data.display())))?;
    let classes = class_count(&index).ok_or_else(|| Error::Config("dataset has no labels".into()))?;
    let kind = NeuronKind::parse(&a.neuron)?;
    let mut spec = ModelSpec::stacked([first.channels, first.height, first.width], a.layers, a.width, kind, classes);
    spec.readout_tau = a.readout_tau;
    spec.validate()?;
    let config = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        rng_seed: a.seed,
        t: first.t,
        split: a.split,
        clip_norm: (a.clip_norm > 0.0).then_some(a.clip_norm),
    };
    let mut init = Model::random(spec, a.seed)?;
    if a.calibrate_rms > 0.0 {
        let (train_idx, _) = split_indices(data.len(), config.split, config.rng_seed);
        let probe: Vec<_> = train_idx.iter().take(CALIBRATION_PROBE).map(|&i| &data[i]).collect();
        let cal = calibrate_init(&mut init, &probe, a.calibrate_rms)?;
        let gains: Vec<String> = cal.gains.iter().map(|g| format!("{g:.2}")).collect();
        println!("calibrated input gains [{}]", gains.join(", "));
    }
    let report = train(&init, &data, &config)?;
    for m in &report.metrics {
        println!(
            "epoch {:>3}  train_loss {:.4}  train_acc {:.3}  val_loss {:.4}  val_acc {:.3}",
            m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc
        );
    }
    if let Some(path) = &a.metrics {
        save_metrics_csv(&report.metrics, path)?;
    }
    save_model(&report.model, &a.out)?;

    let val: Vec<_> = report.val_indices.iter().map(|&i| &data[i]).collect();
    let eval = evaluate(&report.model, &val, Mode::Relu)?;
    println!("validation accuracy (relu): {:.4}", eval.accuracy);
    if let Some(s) = eval.spiking_accuracy {
        println!("validation accuracy (spiking, same weights): {s:.4}");
    }
    let summary = TrainSummary {
        samples: data.len(),
        train_samples: report.train_indices.len(),
        val_samples: report.val_indices.len(),
        parameters: report.model.parameter_count(),
        epochs: config.epochs,
        best_epoch: report.best_epoch,
        initial_train_loss: report.initial_train_loss,
        final_train_loss: report.metrics.last().map(|m| m.train_loss),
        val_accuracy: eval.accuracy,
        val_accuracy_spiking: eval.spiking_accuracy,
        confusion: eval.confusion,
        seconds: started.elapsed().as_secs_f64(),
    };
    if let Some(path) = &a.report {
        write_json(path, &summary)?;
    }
    println!("saved model to {} in {:.1}s", a.out.display(), summary.seconds);
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn infer(a: InferArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let stream = parse_events_file(&a.events, a.format, (a.sensor_w, a.sensor_h))?;
    let seq = preprocess(&stream, &a.window.prep(a.t))?;
    let scores = forward_sequence(&model, &seq, a.mode)?;
    let class = predict(&scores)?;
    let shown: Vec<String> = scores.iter().map(|s| format!("{s:.5}")).collect();
    println!("class {class}");
    println!("scores {}", shown.join(","));
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (_, data) = read_event_dataset(&a.data)?;
    let config = SweepConfig {
        batch_sizes: a.batch,
        t_values: a.t,
        warmup_batches: a.warmup,
        repeats: a.repeats,
        mode: a.mode,
        baseline_accuracy: a.baseline_acc,
        include_prep: a.include_prep,
        power_cmd: a.power_cmd,
        prep: a.window.prep(1),
    };
    let report = run_sweep(&model, &data, &config)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for r in &report.rows {
        println!(
            "T={:<4} batch={:<5} {:>10.1} seq/s  acc {:.4} (norm {:.4})  processed {}",
            r.t, r.batch_size, r.sequences_per_sec, r.raw_accuracy, r.normalized_accuracy, r.processed
        );
    }
    save_sweep_csv(&report.rows, &a.out)?;
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let manifest = read_manifest(&a.model)?;
    let spec = &manifest.model_spec;
    println!("format_version {}", manifest.format_version);
    println!("checksum {:#010x}", manifest.checksum);
    println!(
        "input {:?}  classes {}  readout_tau {}",
        spec.input_shape, spec.num_classes, spec.readout_tau
    );
    for (i, l) in spec.layers.iter().enumerate() {
        println!("layer{i}: {} -> {} ({})", l.in_dim, l.width, l.neuron_kind.name());
    }
    for t in &manifest.tensors {
        println!("  {:<20} {:?} {} @{}+{}", t.name, t.shape, t.dtype, t.byte_offset, t.byte_length);
    }
    let issues = validate_manifest(&manifest);
    for issue in &issues {
        println!("issue: {issue}");
    }
    let model = load_model(&a.model)?;
    println!("parameters {}", model.parameter_count());
    if issues.is_empty() {
        println!("ok");
    }
    Ok(())
}
