//! Line-delimited JSON corpus files.
//!
//! Every line is one [`CorpusLine`]: a schema version plus a task-tagged item.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meta_corpus::{Dimension, ScoreTuple};
use crate::synth::AbChoice;
use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: unsupported schema version {found} (expected {SCHEMA_VERSION})")]
    Version { line: usize, found: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prompt_kind", rename_all = "lowercase")]
pub enum CorpusItem {
    Mos {
        id: String,
        meta: ScoreTuple,
        response: String,
        label: f64,
    },
    Ab {
        id: String,
        ids: [String; 2],
        meta: [ScoreTuple; 2],
        contrast_aspects: Vec<Dimension>,
        response: String,
        label: AbChoice,
    },
    Swd {
        id: String,
        audio_ref: String,
        n: usize,
        prompt: String,
        gold_words: Vec<String>,
    },
}

impl CorpusItem {
    pub fn id(&self) -> &str {
        match self {
            CorpusItem::Mos { id, .. } | CorpusItem::Ab { id, .. } | CorpusItem::Swd { id, .. } => id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CorpusItem::Mos { .. } => "mos",
            CorpusItem::Ab { .. } => "ab",
            CorpusItem::Swd { .. } => "swd",
        }
    }

    /// Reference text: the generated response, or the gold words for SWD.
    pub fn reference_text(&self) -> String {
        match self {
            CorpusItem::Mos { response, .. } | CorpusItem::Ab { response, .. } => response.clone(),
            CorpusItem::Swd { gold_words, .. } => gold_words.join(" "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusLine {
    pub schema_version: u32,
    #[serde(flatten)]
    pub item: CorpusItem,
}

impl From<CorpusItem> for CorpusLine {
    fn from(item: CorpusItem) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            item,
        }
    }
}

/// Write one JSON document per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut sink: W, items: &[T]) -> Result<(), JsonlError> {
    for item in items {
        serde_json::to_writer(&mut sink, item).map_err(|e| JsonlError::Io(e.into()))?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Parse every non-blank line.
pub fn read_jsonl<R: BufRead, T: DeserializeOwned>(source: R) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| JsonlError::Parse { line: i + 1, source })?,
        );
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(sink: W, items: &[CorpusItem]) -> Result<(), JsonlError> {
    let lines: Vec<CorpusLine> = items.iter().cloned().map(CorpusLine::from).collect();
    write_jsonl(sink, &lines)
}

pub fn read_corpus<R: BufRead>(source: R) -> Result<Vec<CorpusItem>, JsonlError> {
    let lines: Vec<CorpusLine> = read_jsonl(source)?;
    lines
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            if l.schema_version == SCHEMA_VERSION {
                Ok(l.item)
            } else {
                Err(JsonlError::Version {
                    line: i + 1,
                    found: l.schema_version,
                })
            }
        })
        .collect()
}
