use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::vocab::{Token, VocabError, Vocabulary};
use crate::corpus::{read_jsonl, write_jsonl, JsonlError};

/// One comparison: preferred `y_t` over policy sample `y_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub id: String,
    pub x_a: Vec<Token>,
    pub x_t: Vec<Token>,
    pub y_t: Vec<Token>,
    pub y_a: Vec<Token>,
}

impl PreferencePair {
    pub fn is_valid(&self) -> bool {
        !self.x_a.is_empty() && !self.x_t.is_empty() && !self.y_t.is_empty() && !self.y_a.is_empty() && self.y_t != self.y_a
    }
}

/// A training item before sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub id: String,
    pub x_a: Vec<Token>,
    pub x_t: Vec<Token>,
    pub y_t: Vec<Token>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairLine {
    id: String,
    x_a: Vec<Token>,
    x_t: Vec<Token>,
    y_t: Vec<Token>,
    y_a: Vec<Token>,
    x_a_text: String,
    x_t_text: String,
    y_t_text: String,
    y_a_text: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("pair `{0}` is invalid (empty sequence or y_t == y_a)")]
    InvalidPair(String),
}

/// Token ids plus detokenized text for inspection; ids are authoritative on read.
pub fn write_preferences<W: Write>(sink: W, pairs: &[PreferencePair], vocab: &Vocabulary) -> Result<(), DatasetError> {
    let lines = pairs
        .iter()
        .map(|p| {
            Ok(PairLine {
                id: p.id.clone(),
                x_a: p.x_a.clone(),
                x_t: p.x_t.clone(),
                y_t: p.y_t.clone(),
                y_a: p.y_a.clone(),
                x_a_text: vocab.detokenize(&p.x_a)?,
                x_t_text: vocab.detokenize(&p.x_t)?,
                y_t_text: vocab.detokenize(&p.y_t)?,
                y_a_text: vocab.detokenize(&p.y_a)?,
            })
        })
        .collect::<Result<Vec<_>, VocabError>>()?;
    Ok(write_jsonl(sink, &lines)?)
}

pub fn read_preferences<R: BufRead>(source: R) -> Result<Vec<PreferencePair>, DatasetError> {
    let lines: Vec<PairLine> = read_jsonl(source)?;
    lines
        .into_iter()
        .map(|l| {
            let p = PreferencePair {
                id: l.id,
                x_a: l.x_a,
                x_t: l.x_t,
                y_t: l.y_t,
                y_a: l.y_a,
            };
            if p.is_valid() {
                Ok(p)
            } else {
                Err(DatasetError::InvalidPair(p.id))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_validation() {
        let vocab = Vocabulary::new(["<eos>", "a", "b", "c"]).unwrap();
        let pairs = vec![PreferencePair {
            id: "1".into(),
            x_a: vec![1],
            x_t: vec![2],
            y_t: vec![3, 0],
            y_a: vec![1, 0],
        }];
        let mut buf = Vec::new();
        write_preferences(&mut buf, &pairs, &vocab).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains("\"y_t_text\":\"c <eos>\""));
        assert_eq!(read_preferences(buf.as_slice()).unwrap(), pairs);

        let mut same = pairs.clone();
        same[0].y_a = same[0].y_t.clone();
        let mut buf = Vec::new();
        write_preferences(&mut buf, &same, &vocab).unwrap();
        assert!(matches!(read_preferences(buf.as_slice()), Err(DatasetError::InvalidPair(_))));
    }
}
