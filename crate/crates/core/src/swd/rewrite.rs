use std::collections::BTreeMap;
use std::io::BufRead;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use thiserror::Error;

use crate::seed;
use crate::synth::{generate, ClientError, GenParams, GenerationClient, RetryPolicy};

const BUILTIN_TABLE: &str = include_str!("../../data/synonyms.tsv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewriteError {
    #[error("no span of the requested length has substitutes")]
    NoEligibleSpan,
    #[error("substitution table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Client(#[from] ClientError),
}

/// A rewriting service: proposes a full rewrite of `transcript` in which `n`
/// successive words are replaced. Proposals are validated by the caller.
pub trait SpanRewriter: Send + Sync {
    fn id(&self) -> &str;

    fn propose(&self, transcript: &[String], n: usize, seed: u64) -> Result<Vec<String>, RewriteError>;
}

fn split_edges(token: &str) -> (&str, &str, &str) {
    let start = token.find(|c: char| c.is_alphanumeric()).unwrap_or(token.len());
    let end = token
        .rfind(|c: char| c.is_alphanumeric())
        .map(|i| i + token[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(start);
    (&token[..start], &token[start..end], &token[end..])
}

fn match_case(template: &str, word: &str) -> String {
    if template.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = word.chars();
        match chars.next() {
            Some(c) => c.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        word.to_string()
    }
}

/// Offline rewriter backed by a word-keyed substitution table.
#[derive(Debug, Clone)]
pub struct SubstitutionPlanner {
    id: String,
    table: BTreeMap<String, Vec<String>>,
}

impl SubstitutionPlanner {
    pub fn builtin(id: &str) -> Self {
        Self::from_tsv(id, BUILTIN_TABLE.as_bytes()).expect("builtin table parses")
    }

    pub fn from_pairs<'a, I>(id: &str, pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, Vec<&'a str>)>,
    {
        let mut planner = Self {
            id: id.to_string(),
            table: BTreeMap::new(),
        };
        for (k, vs) in pairs {
            planner.insert(k, vs.into_iter().map(str::to_string).collect());
        }
        planner
    }

    /// Read `word<TAB>alt1,alt2,...` lines; `#` starts a comment line.
    pub fn from_tsv<R: BufRead>(id: &str, source: R) -> Result<Self, RewriteError> {
        let mut planner = Self::from_pairs(id, []);
        for (i, line) in source.lines().enumerate() {
            let line = line.map_err(|e| RewriteError::Io(e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, alts) = trimmed.split_once('\t').ok_or_else(|| RewriteError::Table {
                line: i + 1,
                message: "expected word<TAB>replacements".into(),
            })?;
            let alts: Vec<String> = alts.split(',').map(|a| a.trim().to_string()).collect();
            if alts.iter().any(|a| a.is_empty() || a.contains(char::is_whitespace)) {
                return Err(RewriteError::Table {
                    line: i + 1,
                    message: "replacements must be single words".into(),
                });
            }
            planner.insert(key.trim(), alts);
        }
        Ok(planner)
    }

    fn insert(&mut self, key: &str, alts: Vec<String>) {
        let key = key.to_lowercase();
        let alts: Vec<String> = alts.into_iter().filter(|a| a.to_lowercase() != key).collect();
        if !alts.is_empty() {
            self.table.entry(key).or_default().extend(alts);
        }
    }

    /// The same table under another rewriter id.
    pub fn with_id(&self, id: &str) -> Self {
        Self {
            id: id.to_string(),
            table: self.table.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn substitutes(&self, token: &str) -> Option<&[String]> {
        let (_, core, _) = split_edges(token);
        self.table.get(&core.to_lowercase()).map(Vec::as_slice)
    }
}

impl SpanRewriter for SubstitutionPlanner {
    fn id(&self) -> &str {
        &self.id
    }

    fn propose(&self, transcript: &[String], n: usize, seed: u64) -> Result<Vec<String>, RewriteError> {
        if n == 0 || n > transcript.len() {
            return Err(RewriteError::NoEligibleSpan);
        }
        let starts: Vec<usize> = (0..=transcript.len() - n)
            .filter(|&s| transcript[s..s + n].iter().all(|w| self.substitutes(w).is_some()))
            .collect();
        let mut rng = seed::rng(seed, "substitution", 0);
        let &start = starts.choose(&mut rng).ok_or(RewriteError::NoEligibleSpan)?;
        let mut out = transcript.to_vec();
        for word in &mut out[start..start + n] {
            let alts = self.substitutes(word).expect("eligible span");
            let alt = alts.choose(&mut rng).expect("non-empty substitutes");
            let (lead, core, trail) = split_edges(word);
            *word = format!("{lead}{}{trail}", match_case(core, alt));
        }
        Ok(out)
    }
}

/// Rewriter that asks a generation service for the edit.
pub struct LlmRewriter {
    id: String,
    client: Arc<dyn GenerationClient>,
    params: GenParams,
    retry: RetryPolicy,
}

impl LlmRewriter {
    pub fn new(id: &str, client: Arc<dyn GenerationClient>, params: GenParams, retry: RetryPolicy) -> Self {
        Self {
            id: id.to_string(),
            client,
            params,
            retry,
        }
    }

    pub fn prompt(transcript: &[String], n: usize) -> String {
        let what = if n == 1 {
            "exactly 1 word".to_string()
        } else {
            format!("exactly {n} successive words")
        };
        format!(
            "Rewrite the following sentence by replacing {what} with different words, \
             keeping the sentence grammatical and the number of words unchanged. \
             Output only the rewritten sentence.\nSentence: {}",
            transcript.join(" ")
        )
    }

    fn parse(completion: &str) -> Vec<String> {
        let line = completion.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
        let line = line
            .strip_prefix("Sentence:")
            .or_else(|| line.strip_prefix("Rewritten sentence:"))
            .unwrap_or(line)
            .trim()
            .trim_matches('"');
        line.split_whitespace().map(str::to_string).collect()
    }
}

impl SpanRewriter for LlmRewriter {
    fn id(&self) -> &str {
        &self.id
    }

    fn propose(&self, transcript: &[String], n: usize, seed: u64) -> Result<Vec<String>, RewriteError> {
        let params = GenParams {
            seed: Some(seed),
            ..self.params.clone()
        };
        let completion = generate(&Self::prompt(transcript, n), self.client.as_ref(), &params, &self.retry)?;
        Ok(Self::parse(&completion))
    }
}
