use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::plan::{ModificationPlan, PlanError};
use crate::corpus::{read_jsonl, write_jsonl, JsonlError};
use crate::SCHEMA_VERSION;

/// One speech-editing job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub schema_version: u32,
    pub utterance_id: String,
    pub audio_ref: String,
    pub modified_transcript: String,
    /// Character offsets of the edited span in `modified_transcript`, end exclusive.
    pub char_start: usize,
    pub char_end: usize,
    pub editor_id: String,
    pub plan: ModificationPlan,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("entry {index}: unsupported schema version {found}")]
    Version { index: usize, found: u32 },
    #[error("entry {index}: {source}")]
    Plan { index: usize, source: PlanError },
    #[error("entry {index}: modified transcript or offsets disagree with the plan")]
    Inconsistent { index: usize },
}

fn span_offsets(words: &[String], start: usize, len: usize) -> (usize, usize) {
    let char_len = |ws: &[String]| ws.iter().map(|w| w.chars().count()).sum::<usize>() + ws.len().saturating_sub(1);
    let before = char_len(&words[..start]);
    let begin = if start == 0 { 0 } else { before + 1 };
    (begin, begin + char_len(&words[start..start + len]))
}

/// One entry per plan. Editors are assigned round-robin so each receives an
/// equal share (up to one) of the plans.
pub fn emit_edit_manifest<F>(plans: &[ModificationPlan], editors: &[String], audio_ref: F) -> Vec<ManifestEntry>
where
    F: Fn(&str) -> String,
{
    assert!(!editors.is_empty() || plans.is_empty(), "at least one editor is required");
    plans
        .iter()
        .enumerate()
        .map(|(i, plan)| {
            let modified = plan.apply();
            let (char_start, char_end) = span_offsets(&modified, plan.span_start, plan.span_len);
            ManifestEntry {
                schema_version: SCHEMA_VERSION,
                utterance_id: plan.utterance_id.clone(),
                audio_ref: audio_ref(&plan.utterance_id),
                modified_transcript: modified.join(" "),
                char_start,
                char_end,
                editor_id: editors[i % editors.len()].clone(),
                plan: plan.clone(),
            }
        })
        .collect()
}

pub fn write_manifest<W: Write>(sink: W, entries: &[ManifestEntry]) -> Result<(), ManifestError> {
    Ok(write_jsonl(sink, entries)?)
}

/// Parse and re-validate a manifest.
pub fn read_manifest<R: BufRead>(source: R) -> Result<Vec<ManifestEntry>, ManifestError> {
    let entries: Vec<ManifestEntry> = read_jsonl(source)?;
    for (index, e) in entries.iter().enumerate() {
        if e.schema_version != SCHEMA_VERSION {
            return Err(ManifestError::Version {
                index,
                found: e.schema_version,
            });
        }
        e.plan.validate().map_err(|source| ManifestError::Plan { index, source })?;
        let modified = e.plan.apply();
        let offsets = span_offsets(&modified, e.plan.span_start, e.plan.span_len);
        if modified.join(" ") != e.modified_transcript || offsets != (e.char_start, e.char_end) {
            return Err(ManifestError::Inconsistent { index });
        }
    }
    Ok(entries)
}
