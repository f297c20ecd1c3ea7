use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::table::{TableScorer, TableShape};
use super::scorer::Trainable;
use super::vocab::Vocabulary;

const MAGIC: &[u8; 8] = b"SJTABLE\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("bad checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("parameter blob has {found} values, shape needs {expected}")]
    Size { expected: usize, found: usize },
    #[error("vocabulary of {vocab} symbols does not match model shape {shape}")]
    VocabMismatch { vocab: usize, shape: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub shape: TableShape,
    pub vocab: Vocabulary,
    /// Free-form training metadata (config, phase).
    pub meta: serde_json::Value,
}

/// Layout: magic, version (u32 LE), header length (u64 LE), JSON header,
/// then the parameters as f64 LE.
pub fn save_checkpoint<W: Write>(
    mut sink: W,
    model: &TableScorer,
    vocab: &Vocabulary,
    meta: serde_json::Value,
) -> Result<(), CheckpointError> {
    let shape = model.shape();
    if vocab.len() != shape.vocab {
        return Err(CheckpointError::VocabMismatch {
            vocab: vocab.len(),
            shape: shape.vocab,
        });
    }
    let header = serde_json::to_vec(&CheckpointHeader {
        shape,
        vocab: vocab.clone(),
        meta,
    })?;
    sink.write_all(MAGIC)?;
    sink.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    sink.write_all(&(header.len() as u64).to_le_bytes())?;
    sink.write_all(&header)?;
    let mut blob = Vec::with_capacity(model.params().len() * 8);
    for p in model.params() {
        blob.extend_from_slice(&p.to_le_bytes());
    }
    sink.write_all(&blob)?;
    sink.flush()?;
    Ok(())
}

pub fn load_checkpoint<R: Read>(mut source: R) -> Result<(TableScorer, CheckpointHeader), CheckpointError> {
    let mut magic = [0u8; 8];
    source.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut word = [0u8; 4];
    source.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let mut len = [0u8; 8];
    source.read_exact(&mut len)?;
    let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
    source.read_exact(&mut header)?;
    let header: CheckpointHeader = serde_json::from_slice(&header)?;
    if header.vocab.len() != header.shape.vocab {
        return Err(CheckpointError::VocabMismatch {
            vocab: header.vocab.len(),
            shape: header.shape.vocab,
        });
    }
    let mut blob = Vec::new();
    source.read_to_end(&mut blob)?;
    let expected = header.shape.n_params();
    if blob.len() != expected * 8 {
        return Err(CheckpointError::Size {
            expected,
            found: blob.len() / 8,
        });
    }
    let params = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let model = TableScorer::from_params(header.shape, params).expect("size checked");
    Ok((model, header))
}
