//! Versioned model persistence.
//!
//! A model file is a single JSON document holding the feature index, tag
//! order, weight tables, constraint mask, extractor resources, and the
//! training-config hash. Serialization is canonical (fixed field order,
//! exact f64 round-trip), so save -> load -> save is byte-identical.

use super::CrfModel;
use crate::corpus::bilou::Tag;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Current file format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a model file: {msg}")]
    Parse { path: String, msg: String },
    #[error("{path}: model format version {found} unsupported (expected {MODEL_FORMAT_VERSION})")]
    VersionMismatch { path: String, found: u32 },
    #[error("{path}: tag order in file does not match this build")]
    TagOrderMismatch { path: String },
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    tag_order: Vec<String>,
    model: CrfModel,
}

fn current_tag_order() -> Vec<String> {
    Tag::all().map(|t| t.to_string()).collect()
}

/// Serialize a model to its canonical byte representation.
pub fn model_to_bytes(model: &CrfModel) -> Vec<u8> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        tag_order: current_tag_order(),
        model: model.clone(),
    };
    let mut bytes = serde_json::to_vec(&file).expect("model serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

/// Write a model file atomically (temp file + rename).
pub fn save_model(model: &CrfModel, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    let path = path.as_ref();
    let io_err = |source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, model_to_bytes(model)).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Load and verify a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<CrfModel, ModelIoError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ModelFile = serde_json::from_slice(&bytes).map_err(|e| ModelIoError::Parse {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelIoError::VersionMismatch {
            path: path.display().to_string(),
            found: file.format_version,
        });
    }
    if file.tag_order != current_tag_order() {
        return Err(ModelIoError::TagOrderMismatch {
            path: path.display().to_string(),
        });
    }
    let mut model = file.model;
    model.feature_index.rehydrate();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::{CrfWeights, TransitionMask};
    use crate::features::{ExtractorConfig, FeatureIndex};

    fn sample_model() -> CrfModel {
        let index = FeatureIndex::from_names(vec!["low=a".into(), "low=b".into()]);
        let mut weights = CrfWeights::zeros(2);
        weights.emission[3] = 0.1 + 0.2; // deliberately non-representable exactly
        weights.transition[40] = -1.75;
        CrfModel {
            feature_index: index,
            extractor: ExtractorConfig::default(),
            weights,
            mask: TransitionMask::bilou(),
            config_hash: "deadbeef".into(),
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = sample_model();
        save_model(&model, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        let path2 = dir.path().join("model2.json");
        save_model(&loaded, &path2).unwrap();
        let second = std::fs::read(&path2).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn version_mismatch_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let bytes = model_to_bytes(&sample_model());
        let hacked = String::from_utf8(bytes)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":99");
        std::fs::write(&path, hacked).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(ModelIoError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn garbage_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, b"not json").unwrap();
        assert!(matches!(load_model(&path), Err(ModelIoError::Parse { .. })));
    }

    #[test]
    fn loaded_index_is_rehydrated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&sample_model(), &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.feature_index.id("low=b"), Some(1));
    }
}
