// SPDX-License-Identifier: Apache-2.0

//! Two-file parameter container: a JSON manifest plus a raw blob.
//!
//! The blob holds every tensor as little-endian row-major `f32`, at the
//! offsets the manifest declares. The manifest carries the model spec, one
//! entry per tensor and the CRC-32 of the blob. The blob lives next to the
//! manifest with the extension `.bin` (`model.json` -> `model.bin`).
//!
//! Tensor names:
//!
//! ```text
//! layer{i}.w_in      [in_dim, width]
//! layer{i}.w_rec     [width, width]
//! layer{i}.b_in      [width]
//! layer{i}.w_tau_m   [2 width, width]   LTC only
//! layer{i}.w_tau_adp [2 width, width]   LTC only
//! layer{i}.b_tau_m   [width]            LTC only
//! layer{i}.b_tau_adp [width]            LTC only
//! readout.w_out      [width, num_classes]
//! readout.b_out      [num_classes]
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::network::{Model, ModelSpec, NeuronKind};
use crate::neuron::LtcTauWeights;
use crate::tensor::Matrix;

pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE_F32: &str = "f32";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub byte_offset: u64,
    pub byte_length: u64,
}

impl TensorEntry {
    fn end(&self) -> u64 {
        self.byte_offset.saturating_add(self.byte_length)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub model_spec: ModelSpec,
    pub tensors: Vec<TensorEntry>,
    pub checksum: u32,
}

/// One problem found by [`validate_manifest`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestIssue {
    InvalidSpec(String),
    UnsupportedDtype { name: String, dtype: String },
    UnknownTensor(String),
    MissingTensor(String),
    DuplicateTensor(String),
    ShapeMismatch { name: String, expected: Vec<usize>, actual: Vec<usize> },
    LengthMismatch { name: String, expected: u64, actual: u64 },
    Overlap { first: String, second: String },
    NotAscending { name: String },
}

impl fmt::Display for ManifestIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidSpec(msg) => write!(f, "invalid model spec: {msg}"),
            Self::UnsupportedDtype { name, dtype } => write!(f, "{name}: unsupported dtype {dtype:?}"),
            Self::UnknownTensor(name) => write!(f, "unknown tensor {name}"),
            Self::MissingTensor(name) => write!(f, "missing tensor {name}"),
            Self::DuplicateTensor(name) => write!(f, "tensor {name} listed more than once"),
            Self::ShapeMismatch { name, expected, actual } => {
                write!(f, "{name}: shape {actual:?}, model spec needs {expected:?}")
            }
            Self::LengthMismatch { name, expected, actual } => {
                write!(f, "{name}: byte_length {actual}, shape needs {expected}")
            }
            Self::Overlap { first, second } => write!(f, "byte ranges of {first} and {second} overlap"),
            Self::NotAscending { name } => write!(f, "{name}: byte_offset is below the previous tensor's"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("manifest format version {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("blob checksum {actual:#010x} does not match manifest {expected:#010x}")]
    Checksum { expected: u32, actual: u32 },

    #[error("tensor {name} has shape {actual:?}, model spec needs {expected:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, actual: Vec<usize> },

    #[error("unknown tensor {0}")]
    UnknownTensor(String),

    #[error("blob is {actual} bytes, manifest addresses {required}")]
    BlobTooShort { required: u64, actual: u64 },

    #[error("invalid manifest: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ManifestIssue>),
}

/// Tensor names and shapes a model with `spec` stores, in blob order.
pub fn canonical_tensors(spec: &ModelSpec) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for (i, l) in spec.layers.iter().enumerate() {
        out.push((format!("layer{i}.w_in"), vec![l.in_dim, l.width]));
        out.push((format!("layer{i}.w_rec"), vec![l.width, l.width]));
        out.push((format!("layer{i}.b_in"), vec![l.width]));
        if matches!(l.neuron_kind, NeuronKind::Ltc) {
            out.push((format!("layer{i}.w_tau_m"), vec![2 * l.width, l.width]));
            out.push((format!("layer{i}.w_tau_adp"), vec![2 * l.width, l.width]));
            out.push((format!("layer{i}.b_tau_m"), vec![l.width]));
            out.push((format!("layer{i}.b_tau_adp"), vec![l.width]));
        }
    }
    out.push(("readout.w_out".into(), vec![spec.output_width(), spec.num_classes]));
    out.push(("readout.b_out".into(), vec![spec.num_classes]));
    out
}

/// Tensor data of `model` in the order of [`canonical_tensors`].
pub fn model_tensors(model: &Model) -> Vec<&[f32]> {
    model.tensors()
}

/// Every problem with `manifest`, in a stable order.
pub fn validate_manifest(manifest: &ModelManifest) -> Vec<ManifestIssue> {
    let mut issues = Vec::new();
    if let Err(e) = manifest.model_spec.validate() {
        issues.push(ManifestIssue::InvalidSpec(e.to_string()));
    }
    let expected: HashMap<String, Vec<usize>> = canonical_tensors(&manifest.model_spec).into_iter().collect();
    let mut seen = HashSet::new();
    let mut prev_offset = 0;
    for t in &manifest.tensors {
        if t.dtype != DTYPE_F32 {
            issues.push(ManifestIssue::UnsupportedDtype {
                name: t.name.clone(),
                dtype: t.dtype.clone(),
            });
        }
        let needed = t.shape.iter().product::<usize>() as u64 * 4;
        if t.dtype == DTYPE_F32 && t.byte_length != needed {
            issues.push(ManifestIssue::LengthMismatch {
                name: t.name.clone(),
                expected: needed,
                actual: t.byte_length,
            });
        }
        match expected.get(&t.name) {
            None => issues.push(ManifestIssue::UnknownTensor(t.name.clone())),
            Some(shape) if *shape != t.shape => issues.push(ManifestIssue::ShapeMismatch {
                name: t.name.clone(),
                expected: shape.clone(),
                actual: t.shape.clone(),
            }),
            Some(_) => {}
        }
        if !seen.insert(t.name.as_str()) {
            issues.push(ManifestIssue::DuplicateTensor(t.name.clone()));
        }
        if t.byte_offset < prev_offset {
            issues.push(ManifestIssue::NotAscending { name: t.name.clone() });
        }
        prev_offset = t.byte_offset;
    }
    for (name, _) in canonical_tensors(&manifest.model_spec) {
        if !seen.contains(name.as_str()) {
            issues.push(ManifestIssue::MissingTensor(name));
        }
    }
    let mut by_offset: Vec<&TensorEntry> = manifest.tensors.iter().filter(|t| t.byte_length > 0).collect();
    by_offset.sort_by_key(|t| (t.byte_offset, t.end()));
    for (i, a) in by_offset.iter().enumerate() {
        for b in &by_offset[i + 1..] {
            if b.byte_offset >= a.end() {
                break;
            }
            issues.push(ManifestIssue::Overlap {
                first: a.name.clone(),
                second: b.name.clone(),
            });
        }
    }
    issues
}

pub fn blob_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("bin")
}

/// Serialises `model` into a manifest and blob. Identical models produce
/// identical bytes.
pub fn encode_model(model: &Model) -> (ModelManifest, Vec<u8>) {
    let mut blob = Vec::with_capacity(model.parameter_count() * 4);
    let mut tensors = Vec::new();
    for ((name, shape), data) in canonical_tensors(&model.spec).into_iter().zip(model_tensors(model)) {
        let byte_offset = blob.len() as u64;
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        tensors.push(TensorEntry {
            name,
            shape,
            dtype: DTYPE_F32.into(),
            byte_offset,
            byte_length: blob.len() as u64 - byte_offset,
        });
    }
    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        model_spec: model.spec.clone(),
        tensors,
        checksum: crc32fast::hash(&blob),
    };
    (manifest, blob)
}

/// Writes `manifest_path` and the blob beside it.
pub fn save_model(model: &Model, manifest_path: &Path) -> crate::Result<ModelManifest> {
    model.validate()?;
    let (manifest, blob) = encode_model(model);
    let blob_file = blob_path(manifest_path);
    fs::write(&blob_file, &blob).map_err(|e| crate::Error::io(&blob_file, e))?;
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| crate::Error::json(manifest_path, e))?;
    json.push('\n');
    fs::write(manifest_path, json).map_err(|e| crate::Error::io(manifest_path, e))?;
    Ok(manifest)
}

pub fn read_manifest(manifest_path: &Path) -> crate::Result<ModelManifest> {
    let text = fs::read_to_string(manifest_path).map_err(|e| crate::Error::io(manifest_path, e))?;
    serde_json::from_str(&text).map_err(|e| crate::Error::json(manifest_path, e))
}

/// Rebuilds a model from a manifest and its blob. The checksum is checked
/// before any tensor is decoded.
pub fn decode_model(manifest: &ModelManifest, blob: &[u8]) -> Result<Model, ModelIoError> {
    if manifest.format_version != FORMAT_VERSION {
        return Err(ModelIoError::VersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let actual = crc32fast::hash(blob);
    if actual != manifest.checksum {
        return Err(ModelIoError::Checksum {
            expected: manifest.checksum,
            actual,
        });
    }
    let issues = validate_manifest(manifest);
    if let Some(ManifestIssue::UnknownTensor(name)) = issues.iter().find(|i| matches!(i, ManifestIssue::UnknownTensor(_))) {
        return Err(ModelIoError::UnknownTensor(name.clone()));
    }
    if let Some(ManifestIssue::ShapeMismatch { name, expected, actual }) =
        issues.iter().find(|i| matches!(i, ManifestIssue::ShapeMismatch { .. }))
    {
        return Err(ModelIoError::ShapeMismatch {
            name: name.clone(),
            expected: expected.clone(),
            actual: actual.clone(),
        });
    }
    if !issues.is_empty() {
        return Err(ModelIoError::Invalid(issues));
    }
    let required = manifest.tensors.iter().map(TensorEntry::end).max().unwrap_or(0);
    if required > blob.len() as u64 {
        return Err(ModelIoError::BlobTooShort {
            required,
            actual: blob.len() as u64,
        });
    }

    let mut data: HashMap<&str, Vec<f32>> = manifest
        .tensors
        .iter()
        .map(|t| {
            let bytes = &blob[t.byte_offset as usize..t.end() as usize];
            let values = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            (t.name.as_str(), values)
        })
        .collect();
    let mut take = |name: String| data.remove(name.as_str()).expect("validated tensor present");

    let mut model = Model::zeros(manifest.model_spec.clone()).map_err(|e| ModelIoError::Invalid(vec![ManifestIssue::InvalidSpec(e.to_string())]))?;
    let matrix = |values: Vec<f32>, rows: usize, cols: usize| Matrix::from_vec(rows, cols, values).expect("validated shape");
    for (i, (layer, spec)) in model.layers.iter_mut().zip(&manifest.model_spec.layers).enumerate() {
        layer.w_in = matrix(take(format!("layer{i}.w_in")), spec.in_dim, spec.width);
        layer.w_rec = matrix(take(format!("layer{i}.w_rec")), spec.width, spec.width);
        layer.b_in = take(format!("layer{i}.b_in"));
        if matches!(spec.neuron_kind, NeuronKind::Ltc) {
            layer.tau = Some(LtcTauWeights {
                w_tau_m: matrix(take(format!("layer{i}.w_tau_m")), 2 * spec.width, spec.width),
                w_tau_adp: matrix(take(format!("layer{i}.w_tau_adp")), 2 * spec.width, spec.width),
                bias_tau_m: take(format!("layer{i}.b_tau_m")),
                bias_tau_adp: take(format!("layer{i}.b_tau_adp")),
            });
        }
    }
    let (width, classes) = (manifest.model_spec.output_width(), manifest.model_spec.num_classes);
    model.readout.w_out = matrix(take("readout.w_out".into()), width, classes);
    model.readout.b_out = take("readout.b_out".into());
    Ok(model)
}

pub fn load_model(manifest_path: &Path) -> crate::Result<Model> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(ModelIoError::VersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        }
        .into());
    }
    let blob_file = blob_path(manifest_path);
    let blob = fs::read(&blob_file).map_err(|e| crate::Error::io(&blob_file, e))?;
    let model = decode_model(&manifest, &blob)?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{ModelSpec, NeuronKind};

    fn mixed_model() -> Model {
        let mut spec = ModelSpec::stacked([2, 4, 4], 3, 5, NeuronKind::Ltc, 3);
        spec.layers[1].neuron_kind = NeuronKind::parse("lif").unwrap();
        spec.layers[2].neuron_kind = NeuronKind::parse("alif").unwrap();
        Model::random(spec, 11).unwrap()
    }

    #[test]
    fn tensor_count_follows_layer_kinds() {
        let model = mixed_model();
        let (manifest, _) = encode_model(&model);
        assert_eq!(manifest.tensors.len(), 7 + 3 + 3 + 2);
        let ltc = Model::random(ModelSpec::default_for(4), 1).unwrap();
        assert_eq!(encode_model(&ltc).0.tensors.len(), 4 * 7 + 2);
    }

    #[test]
    fn encode_decode_identity() {
        let model = mixed_model();
        let (manifest, blob) = encode_model(&model);
        assert!(validate_manifest(&manifest).is_empty());
        assert_eq!(decode_model(&manifest, &blob).unwrap(), model);
    }

    #[test]
    fn overlap_is_reported_once_with_both_names() {
        let (mut manifest, _) = encode_model(&mixed_model());
        manifest.tensors[1].byte_offset = manifest.tensors[0].byte_offset + 4;
        let issues = validate_manifest(&manifest);
        assert_eq!(
            issues,
            vec![ManifestIssue::Overlap {
                first: "layer0.w_in".into(),
                second: "layer0.w_rec".into()
            }]
        );
    }

    #[test]
    fn collects_all_issues() {
        let (mut manifest, _) = encode_model(&mixed_model());
        manifest.tensors[2].dtype = "f64".into();
        manifest.tensors[3].name = "layer0.w_bogus".into();
        manifest.tensors.pop();
        let issues = validate_manifest(&manifest);
        assert!(issues.contains(&ManifestIssue::UnsupportedDtype {
            name: "layer0.b_in".into(),
            dtype: "f64".into()
        }));
        assert!(issues.contains(&ManifestIssue::UnknownTensor("layer0.w_bogus".into())));
        assert!(issues.contains(&ManifestIssue::MissingTensor("layer0.w_tau_m".into())));
        assert!(issues.contains(&ManifestIssue::MissingTensor("readout.b_out".into())));
    }

    #[test]
    fn distinct_load_errors() {
        let model = mixed_model();
        let (manifest, blob) = encode_model(&model);

        let mut v2 = manifest.clone();
        v2.format_version = 2;
        assert!(matches!(decode_model(&v2, &blob), Err(ModelIoError::VersionMismatch { found: 2, .. })));

        let mut flipped = blob.clone();
        flipped[17] ^= 0x10;
        assert!(matches!(decode_model(&manifest, &flipped), Err(ModelIoError::Checksum { .. })));

        let mut renamed = manifest.clone();
        renamed.tensors[0].name = "layer9.w_in".into();
        assert!(matches!(decode_model(&renamed, &blob), Err(ModelIoError::UnknownTensor(n)) if n == "layer9.w_in"));

        let mut reshaped = manifest.clone();
        reshaped.tensors[0].shape = vec![5, 32];
        assert!(matches!(decode_model(&reshaped, &blob), Err(ModelIoError::ShapeMismatch { .. })));
    }
}
