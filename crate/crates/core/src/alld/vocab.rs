use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Token = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VocabError {
    #[error("unknown token `{0}`")]
    Unknown(String),
    #[error("token id {0} out of range")]
    OutOfRange(Token),
    #[error("duplicate token `{0}`")]
    Duplicate(String),
}

/// Whitespace-delimited symbol table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    symbols: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, Token>,
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = VocabError;

    fn try_from(symbols: Vec<String>) -> Result<Self, VocabError> {
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i as Token).is_some() {
                return Err(VocabError::Duplicate(s.clone()));
            }
        }
        Ok(Self { symbols, index })
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.symbols
    }
}

impl Vocabulary {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self, VocabError> {
        Self::try_from(symbols.into_iter().map(Into::into).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, symbol: &str) -> Result<Token, VocabError> {
        self.index
            .get(symbol)
            .copied()
            .ok_or_else(|| VocabError::Unknown(symbol.to_string()))
    }

    pub fn symbol(&self, id: Token) -> Result<&str, VocabError> {
        self.symbols
            .get(id as usize)
            .map(String::as_str)
            .ok_or(VocabError::OutOfRange(id))
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<Token>, VocabError> {
        text.split_whitespace().map(|s| self.id(s)).collect()
    }

    pub fn detokenize(&self, ids: &[Token]) -> Result<String, VocabError> {
        let words: Result<Vec<&str>, _> = ids.iter().map(|&i| self.symbol(i)).collect();
        Ok(words?.join(" "))
    }
}
