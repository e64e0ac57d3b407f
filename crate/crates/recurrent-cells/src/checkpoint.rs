//! Flat JSON checkpoint: name -> { shape, row-major data }.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tensor_core::Tensor;
use thiserror::Error;

use crate::params::{CellKind, CellParams};

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed checkpoint: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("checkpoint missing entry '{0}'")]
    MissingEntry(String),
    #[error("checkpoint entry '{name}' has shape {found:?}, expected {expected:?}")]
    BadShape { name: String, found: Vec<usize>, expected: Vec<usize> },
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    kind: CellKind,
    input_dim: usize,
    hidden_dim: usize,
    tensors: BTreeMap<String, TensorEntry>,
}

pub fn save_checkpoint(params: &CellParams, path: &Path) -> Result<(), CheckpointError> {
    let tensors = params
        .named()
        .into_iter()
        .map(|(name, t)| (name, TensorEntry { shape: t.shape.clone(), data: t.data.clone() }))
        .collect();
    let file = CheckpointFile {
        kind: params.kind,
        input_dim: params.input_dim,
        hidden_dim: params.hidden_dim,
        tensors,
    };
    let json = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, json)
        .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<CellParams, CheckpointError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
    let file: CheckpointFile = serde_json::from_str(&raw)?;
    let mut params = CellParams::zeros(file.kind, file.input_dim, file.hidden_dim);
    for (name, slot) in params.named_mut() {
        let entry = file.tensors.get(&name).ok_or_else(|| CheckpointError::MissingEntry(name.clone()))?;
        if entry.shape != slot.shape {
            return Err(CheckpointError::BadShape {
                name,
                found: entry.shape.clone(),
                expected: slot.shape.clone(),
            });
        }
        *slot = Tensor::from_vec(entry.shape.clone(), entry.data.clone()).with_grad();
    }
    Ok(params)
}
