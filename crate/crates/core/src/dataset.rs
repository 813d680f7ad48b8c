// SPDX-License-Identifier: Apache-2.0

//! On-disk datasets: a directory of per-sample files plus an `index.json`
//! listing them in order with their labels.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{parse_events_file, read_frames, write_events_file, write_frames, EventFormat, EventStream, FrameSequence};

pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Events,
    Frames,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    /// Path relative to the dataset directory.
    pub file: String,
    pub label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub kind: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<EventFormat>,
    pub sensor_w: u16,
    pub sensor_h: u16,
    pub num_classes: Option<usize>,
    pub samples: Vec<IndexEntry>,
}

impl DatasetIndex {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(&path, e))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn expect(&self, kind: DatasetKind, dir: &Path) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Config(format!(
                "{} holds a {:?} dataset, expected {:?}",
                dir.display(),
                self.kind,
                kind
            )));
        }
        Ok(())
    }
}

/// One recording with its class, if known.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledStream {
    pub id: String,
    pub label: Option<usize>,
    pub stream: EventStream,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_event_dataset(dir: &Path, samples: &[LabelledStream], format: EventFormat, num_classes: Option<usize>) -> Result<DatasetIndex> {
    create_dir(dir)?;
    let (sensor_w, sensor_h) = samples
        .first()
        .map_or((crate::events::DVS128_SIZE, crate::events::DVS128_SIZE), |s| (s.stream.sensor_w, s.stream.sensor_h));
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let file = format!("{}.{}", s.id, format.extension());
        write_events_file(&dir.join(&file), &s.stream, format)?;
        entries.push(IndexEntry { file, label: s.label });
    }
    let index = DatasetIndex {
        kind: DatasetKind::Events,
        format: Some(format),
        sensor_w,
        sensor_h,
        num_classes,
        samples: entries,
    };
    index.write(dir)?;
    Ok(index)
}

fn stem(file: &str) -> String {
    Path::new(file)
        .file_stem()
        .map_or_else(|| file.to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn read_event_dataset(dir: &Path) -> Result<(DatasetIndex, Vec<LabelledStream>)> {
    let index = DatasetIndex::read(dir)?;
    index.expect(DatasetKind::Events, dir)?;
    let sensor = (index.sensor_w, index.sensor_h);
    let samples = index
        .samples
        .iter()
        .map(|e| {
            Ok(LabelledStream {
                id: stem(&e.file),
                label: e.label,
                stream: parse_events_file(&dir.join(&e.file), index.format, sensor)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((index, samples))
}

/// Writes each sequence as `<id>.f32` plus its JSON sidecar.
pub fn write_frame_dataset(dir: &Path, ids: &[String], seqs: &[FrameSequence], sensor: (u16, u16), num_classes: Option<usize>) -> Result<DatasetIndex> {
    if ids.len() != seqs.len() {
        return Err(Error::shape("frame dataset ids", seqs.len(), ids.len()));
    }
    create_dir(dir)?;
    let mut entries = Vec::with_capacity(seqs.len());
    for (id, seq) in ids.iter().zip(seqs) {
        let file = format!("{id}.f32");
        write_frames(&dir.join(&file), seq)?;
        entries.push(IndexEntry { file, label: seq.label });
    }
    let index = DatasetIndex {
        kind: DatasetKind::Frames,
        format: None,
        sensor_w: sensor.0,
        sensor_h: sensor.1,
        num_classes,
        samples: entries,
    };
    index.write(dir)?;
    Ok(index)
}

pub fn read_frame_dataset(dir: &Path) -> Result<(DatasetIndex, Vec<FrameSequence>)> {
    let index = DatasetIndex::read(dir)?;
    index.expect(DatasetKind::Frames, dir)?;
    let seqs = index
        .samples
        .iter()
        .map(|e| {
            let mut seq = read_frames(&dir.join(&e.file))?;
            if seq.label.is_none() {
                seq.label = e.label;
            }
            Ok(seq)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((index, seqs))
}

/// Number of classes recorded in the index, else one past the largest label.
pub fn class_count(index: &DatasetIndex) -> Option<usize> {
    index
        .num_classes
        .or_else(|| index.samples.iter().filter_map(|e| e.label).max().map(|m| m + 1))
}

pub fn dataset_dir_file(dir: &Path, entry: &IndexEntry) -> PathBuf {
    dir.join(&entry.file)
}
