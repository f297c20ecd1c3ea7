use std::collections::HashSet;
use std::io::BufRead;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub id: String,
    pub words: Vec<String>,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected utterance_id<TAB>transcript")]
    Format { line: usize },
    #[error("line {line}: empty transcript for `{id}`")]
    Empty { line: usize, id: String },
    #[error("line {line}: duplicate utterance id `{id}`")]
    Duplicate { line: usize, id: String },
}

/// Read `utterance_id<TAB>transcript` lines. Blank lines are ignored.
pub fn load_transcripts<R: BufRead>(source: R) -> Result<Vec<Transcript>, TranscriptError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let (id, text) = line.split_once('\t').ok_or(TranscriptError::Format { line: n })?;
        let id = id.trim().to_string();
        if id.is_empty() {
            return Err(TranscriptError::Format { line: n });
        }
        let words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        if words.is_empty() {
            return Err(TranscriptError::Empty { line: n, id });
        }
        if !seen.insert(id.clone()) {
            return Err(TranscriptError::Duplicate { line: n, id });
        }
        out.push(Transcript { id, words });
    }
    Ok(out)
}
