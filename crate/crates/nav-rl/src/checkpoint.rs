//! Actor checkpoints: architecture header plus the flat name → tensor map.

use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use tensor_core::Tensor;
use thiserror::Error;

use crate::policy::{ActorNet, MemoryKind};

#[derive(Debug, Error)]
pub enum AgentCheckpointError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed checkpoint: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("checkpoint missing tensor '{0}'")]
    MissingTensor(String),
    #[error("tensor '{name}' has shape {found:?}, expected {expected:?}")]
    BadShape { name: String, found: Vec<usize>, expected: Vec<usize> },
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ActorFile {
    memory: MemoryKind,
    rays: usize,
    embed: usize,
    heads: usize,
    hidden: usize,
    tensors: BTreeMap<String, TensorEntry>,
}

pub fn save_actor(actor: &ActorNet, path: &Path) -> Result<(), AgentCheckpointError> {
    let tensors = actor
        .named()
        .into_iter()
        .map(|(n, t)| (n, TensorEntry { shape: t.shape.clone(), data: t.data.clone() }))
        .collect();
    let file = ActorFile {
        memory: actor.memory_kind,
        rays: actor.attn.tokens,
        embed: actor.attn.embed,
        heads: actor.attn.heads,
        hidden: actor.hidden,
        tensors,
    };
    let json = serde_json::to_string(&file)?;
    std::fs::write(path, json)
        .map_err(|source| AgentCheckpointError::Io { path: path.display().to_string(), source })
}

pub fn load_actor(path: &Path) -> Result<ActorNet, AgentCheckpointError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|source| AgentCheckpointError::Io { path: path.display().to_string(), source })?;
    let file: ActorFile = serde_json::from_str(&raw)?;
    // shape the net, then overwrite every tensor from the file
    let mut scaffold_rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
    let mut actor =
        ActorNet::new(file.memory, file.rays, file.embed, file.heads, file.hidden, &mut scaffold_rng);
    for (name, slot) in actor.named_mut() {
        let entry =
            file.tensors.get(&name).ok_or_else(|| AgentCheckpointError::MissingTensor(name.clone()))?;
        if entry.shape != slot.shape {
            return Err(AgentCheckpointError::BadShape {
                name,
                found: entry.shape.clone(),
                expected: slot.shape.clone(),
            });
        }
        *slot = Tensor::from_vec(entry.shape.clone(), entry.data.clone()).with_grad();
    }
    Ok(actor)
}
