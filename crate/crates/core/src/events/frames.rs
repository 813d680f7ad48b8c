// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EventStream;
use crate::error::{Error, Result};

/// Integer event counts, `T x C x H x W`, channel = polarity.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrames {
    pub t: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u32>,
    /// Accumulation interval of one frame in microseconds.
    pub dt_us: f64,
}

impl RawFrames {
    pub fn zeros(t: usize, channels: usize, height: usize, width: usize, dt_us: f64) -> Self {
        Self {
            t,
            channels,
            height,
            width,
            counts: vec![0; t * channels * height * width],
            dt_us,
        }
    }

    #[inline]
    pub fn index(&self, k: usize, c: usize, y: usize, x: usize) -> usize {
        ((k * self.channels + c) * self.height + y) * self.width + x
    }

    pub fn get(&self, k: usize, c: usize, y: usize, x: usize) -> u32 {
        self.counts[self.index(k, c, y, x)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn frame(&self, k: usize) -> &[u32] {
        let len = self.channels * self.height * self.width;
        &self.counts[k * len..(k + 1) * len]
    }
}

/// Network input: `T x C x H x W` non-negative values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub t: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
    pub dt_us: f64,
    pub source: Option<String>,
    pub label: Option<usize>,
}

impl FrameSequence {
    pub fn new(data: Vec<f32>, t: usize, channels: usize, height: usize, width: usize) -> Result<Self> {
        let expected = t * channels * height * width;
        if data.len() != expected {
            return Err(Error::shape(
                "frame data",
                format!("{expected} values ({t}x{channels}x{height}x{width})"),
                data.len(),
            ));
        }
        Ok(Self {
            t,
            channels,
            height,
            width,
            data,
            dt_us: 0.0,
            source: None,
            label: None,
        })
    }

    pub fn from_raw(raw: &RawFrames) -> Self {
        Self {
            t: raw.t,
            channels: raw.channels,
            height: raw.height,
            width: raw.width,
            data: raw.counts.iter().map(|&c| c as f32).collect(),
            dt_us: raw.dt_us,
            source: None,
            label: None,
        }
    }

    pub fn with_label(mut self, label: Option<usize>) -> Self {
        self.label = label;
        self
    }

    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Frame `k`, flattened channel-major.
    #[inline]
    pub fn frame(&self, k: usize) -> &[f32] {
        let len = self.frame_len();
        &self.data[k * len..(k + 1) * len]
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.t, self.channels, self.height, self.width]
    }
}

/// Buckets events into `t` frames of `window_us / t` microseconds each,
/// starting at the first event. Events later than `window_us` after the
/// first are dropped; one landing exactly on `window_us` joins the last frame.
pub fn accumulate_frames(events: &EventStream, t: usize, window_us: u64) -> Result<RawFrames> {
    accumulate_window(events, t, window_us, 0)
}

fn accumulate_window(events: &EventStream, t: usize, window_us: u64, offset_us: u64) -> Result<RawFrames> {
    if t == 0 {
        return Err(Error::Config("frame count T must be >= 1".into()));
    }
    if window_us < t as u64 {
        return Err(Error::Config(format!(
            "window of {window_us} us is shorter than T = {t} intervals"
        )));
    }
    let (h, w) = (usize::from(events.sensor_h), usize::from(events.sensor_w));
    let mut raw = RawFrames::zeros(t, 2, h, w, window_us as f64 / t as f64);
    let Some(first) = events.events.first() else {
        return Ok(raw);
    };
    let start = first.t.saturating_add(offset_us);
    for e in &events.events {
        if e.t < start {
            continue;
        }
        let d = e.t - start;
        if d > window_us {
            break;
        }
        let k = ((u128::from(d) * t as u128) / u128::from(window_us)).min(t as u128 - 1) as usize;
        let idx = raw.index(k, usize::from(e.polarity), usize::from(e.y), usize::from(e.x));
        raw.counts[idx] += 1;
    }
    Ok(raw)
}

/// 4x4 sum pooling, 128x128 -> 32x32.
pub fn downsample(raw: &RawFrames) -> Result<RawFrames> {
    downsample_by(raw, 4)
}

/// Non-overlapping `factor x factor` sum pooling of every frame and channel.
pub fn downsample_by(raw: &RawFrames, factor: usize) -> Result<RawFrames> {
    if factor == 0 || !raw.height.is_multiple_of(factor) || !raw.width.is_multiple_of(factor) {
        return Err(Error::shape(
            "downsample input",
            format!("height and width divisible by {factor}"),
            format!("{}x{}", raw.height, raw.width),
        ));
    }
    let (oh, ow) = (raw.height / factor, raw.width / factor);
    let mut out = RawFrames::zeros(raw.t, raw.channels, oh, ow, raw.dt_us);
    for k in 0..raw.t {
        for c in 0..raw.channels {
            for y in 0..raw.height {
                let row = raw.index(k, c, y, 0);
                let orow = out.index(k, c, y / factor, 0);
                for (x, &v) in raw.counts[row..row + raw.width].iter().enumerate() {
                    out.counts[orow + x / factor] += v;
                }
            }
        }
    }
    Ok(out)
}

/// Divides by the global maximum of the sequence, when it is positive.
pub fn normalize_frames(mut frames: FrameSequence) -> FrameSequence {
    let max = frames.data.iter().copied().fold(0.0f32, f32::max);
    if max > 0.0 {
        for v in &mut frames.data {
            *v /= max;
        }
    }
    frames
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepConfig {
    pub t: usize,
    /// Total accumulation window; `None` covers the whole recording.
    pub window_us: Option<u64>,
    /// Start of the window relative to the first event.
    pub window_offset_us: u64,
    pub pool: usize,
}

impl PrepConfig {
    pub fn new(t: usize) -> Self {
        Self {
            t,
            window_us: None,
            window_offset_us: 0,
            pool: 4,
        }
    }

    pub fn window_for(&self, events: &EventStream) -> u64 {
        let span = events
            .time_span()
            .map_or(0, |(a, b)| (b - a).saturating_sub(self.window_offset_us));
        self.window_us.unwrap_or(span).max(self.t as u64)
    }
}

/// Accumulate, pool and normalise one recording.
pub fn preprocess(events: &EventStream, cfg: &PrepConfig) -> Result<FrameSequence> {
    let raw = accumulate_window(events, cfg.t, cfg.window_for(events), cfg.window_offset_us)?;
    let pooled = downsample_by(&raw, cfg.pool)?;
    Ok(normalize_frames(FrameSequence::from_raw(&pooled)))
}

/// JSON sidecar of an exported frame tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "C")]
    pub c: usize,
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub dt_us: f64,
    pub label: Option<usize>,
}

fn sidecar_path(tensor: &Path) -> PathBuf {
    tensor.with_extension("json")
}

/// Writes `seq` as little-endian f32 to `path` and its sidecar next to it.
pub fn write_frames(path: &Path, seq: &FrameSequence) -> Result<()> {
    let mut bytes = Vec::with_capacity(seq.data.len() * 4);
    for v in &seq.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let meta = FrameMeta {
        t: seq.t,
        c: seq.channels,
        h: seq.height,
        w: seq.width,
        dt_us: seq.dt_us,
        label: seq.label,
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(&side, e))?;
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

pub fn read_frames(path: &Path) -> Result<FrameSequence> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: FrameMeta = serde_json::from_str(&text).map_err(|e| Error::json(&side, e))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::shape("frame tensor bytes", "a multiple of 4", bytes.len()));
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Numeric(format!("{}: frame values must be finite and >= 0", path.display())));
    }
    let mut seq = FrameSequence::new(data, meta.t, meta.c, meta.h, meta.w)?;
    seq.dt_us = meta.dt_us;
    seq.label = meta.label;
    seq.source = Some(path.display().to_string());
    Ok(seq)
}
