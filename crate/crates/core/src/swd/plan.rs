use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::rewrite::{RewriteError, SpanRewriter};
use super::transcripts::Transcript;
use crate::seed;

/// Probability of modifying 1, 2 or 3 successive words.
pub const SPAN_COUNT_PROBS: [f64; 3] = [0.88, 0.08, 0.04];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanCountDistribution {
    probs: [f64; 3],
}

impl Default for SpanCountDistribution {
    fn default() -> Self {
        Self {
            probs: SPAN_COUNT_PROBS,
        }
    }
}

impl SpanCountDistribution {
    pub fn new(probs: [f64; 3]) -> Result<Self, PlanError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(PlanError::InvalidDistribution(probs));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> [f64; 3] {
        self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i + 1;
            }
        }
        // rounding slack: last span length with non-zero mass
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0) + 1
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("span-count probabilities must be non-negative and sum to 1, got {0:?}")]
    InvalidDistribution([f64; 3]),
    #[error("span length {0} is not in 1..=3")]
    InvalidSpan(usize),
    #[error("transcript too short: {len} words for a {n}-word edit")]
    TooShort { len: usize, n: usize },
    #[error("rejected edit: {0}")]
    Rejected(String),
    #[error("no valid edit after {attempts} attempts; last: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("rewriter failed: {0}")]
    Rewriter(#[from] RewriteError),
    #[error("modified transcript does not carry the planned replacement")]
    RevertMismatch,
}

impl PlanError {
    /// Skips leave the utterance out of the corpus; other errors are fatal.
    pub fn is_skip(&self) -> bool {
        matches!(
            self,
            PlanError::TooShort { .. } | PlanError::Exhausted { .. } | PlanError::Rewriter(RewriteError::NoEligibleSpan)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModificationPlan {
    pub utterance_id: String,
    pub original_transcript: Vec<String>,
    pub span_start: usize,
    pub span_len: usize,
    pub original_words: Vec<String>,
    pub replacement_words: Vec<String>,
    pub planner_id: String,
}

impl ModificationPlan {
    pub fn span(&self) -> std::ops::Range<usize> {
        self.span_start..self.span_start + self.span_len
    }

    /// Structural checks: contiguous in-bounds span, matching lengths, and
    /// replacement words that are single non-empty tokens differing from the
    /// words they replace.
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(1..=3).contains(&self.span_len) {
            return Err(PlanError::InvalidSpan(self.span_len));
        }
        let end = self.span_start + self.span_len;
        if end > self.original_transcript.len() {
            return Err(PlanError::Rejected("span out of bounds".into()));
        }
        if self.original_words != self.original_transcript[self.span()] {
            return Err(PlanError::Rejected("original words do not match transcript".into()));
        }
        if self.replacement_words.len() != self.span_len {
            return Err(PlanError::Rejected(format!(
                "{} replacement words for a {}-word span",
                self.replacement_words.len(),
                self.span_len
            )));
        }
        for (orig, rep) in self.original_words.iter().zip(&self.replacement_words) {
            if rep.is_empty() || rep.chars().any(char::is_whitespace) {
                return Err(PlanError::Rejected(format!("bad replacement token {rep:?}")));
            }
            if orig.to_lowercase() == rep.to_lowercase() {
                return Err(PlanError::Rejected(format!("`{rep}` replaces itself")));
            }
        }
        Ok(())
    }

    pub fn apply(&self) -> Vec<String> {
        let mut words = self.original_transcript.clone();
        words.splice(self.span(), self.replacement_words.iter().cloned());
        words
    }

    pub fn revert(&self, modified: &[String]) -> Result<Vec<String>, PlanError> {
        let span = self.span();
        if modified.len() != self.original_transcript.len()
            || modified.get(span.clone()) != Some(&self.replacement_words[..])
        {
            return Err(PlanError::RevertMismatch);
        }
        let mut words = modified.to_vec();
        words.splice(span, self.original_words.iter().cloned());
        Ok(words)
    }

    pub fn modified_text(&self) -> String {
        self.apply().join(" ")
    }
}

/// Turn a proposed full rewrite into a plan, requiring exactly `n` changed
/// words forming one contiguous run and an unchanged word count.
pub fn plan_from_proposal(
    utterance_id: &str,
    original: &[String],
    proposal: &[String],
    n: usize,
    planner_id: &str,
) -> Result<ModificationPlan, PlanError> {
    if proposal.len() != original.len() {
        return Err(PlanError::Rejected(format!(
            "length changed from {} to {} words",
            original.len(),
            proposal.len()
        )));
    }
    let changed: Vec<usize> = original
        .iter()
        .zip(proposal)
        .enumerate()
        .filter(|(_, (o, p))| o.to_lowercase() != p.to_lowercase())
        .map(|(i, _)| i)
        .collect();
    if changed.len() != n {
        return Err(PlanError::Rejected(format!("{} words changed, wanted {n}", changed.len())));
    }
    let start = changed[0];
    if changed.last() != Some(&(start + n - 1)) {
        return Err(PlanError::Rejected("changed words are not contiguous".into()));
    }
    let plan = ModificationPlan {
        utterance_id: utterance_id.to_string(),
        original_transcript: original.to_vec(),
        span_start: start,
        span_len: n,
        original_words: original[start..start + n].to_vec(),
        replacement_words: proposal[start..start + n].to_vec(),
        planner_id: planner_id.to_string(),
    };
    plan.validate()?;
    Ok(plan)
}

/// Ask `rewriter` for an `n`-word contiguous edit of `transcript`, retrying
/// rejected proposals up to `cap` times.
pub fn plan_modification(
    utterance_id: &str,
    transcript: &[String],
    n: usize,
    rewriter: &dyn SpanRewriter,
    seed: u64,
    cap: u32,
) -> Result<ModificationPlan, PlanError> {
    if !(1..=3).contains(&n) {
        return Err(PlanError::InvalidSpan(n));
    }
    if transcript.len() <= n + 2 {
        return Err(PlanError::TooShort {
            len: transcript.len(),
            n,
        });
    }
    let attempts = cap.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        let proposal = rewriter.propose(transcript, n, seed::derive(seed, "swd-attempt", attempt.into()))?;
        match plan_from_proposal(utterance_id, transcript, &proposal, n, rewriter.id()) {
            Ok(plan) => return Ok(plan),
            Err(PlanError::Rejected(reason)) => {
                log::debug!("{utterance_id}: attempt {} rejected: {reason}", attempt + 1);
                last = reason;
            }
            Err(e) => return Err(e),
        }
    }
    Err(PlanError::Exhausted { attempts, last })
}

#[derive(Debug, Clone, Default)]
pub struct PlanCorpus {
    pub plans: Vec<ModificationPlan>,
    pub skipped: Vec<(String, String)>,
}

/// Plan one edit per transcript in parallel. Utterance `i` uses rewriter
/// `i % rewriters.len()` and a span length drawn from `dist`.
pub fn plan_corpus(
    transcripts: &[Transcript],
    rewriters: &[&dyn SpanRewriter],
    dist: &SpanCountDistribution,
    seed: u64,
    cap: u32,
) -> Result<PlanCorpus, PlanError> {
    assert!(!rewriters.is_empty(), "at least one rewriter is required");
    let results: Vec<_> = transcripts
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let n = dist.sample(&mut seed::rng(seed, "swd-span", i as u64));
            let rewriter = rewriters[i % rewriters.len()];
            let item_seed = seed::derive(seed, "swd-plan", i as u64);
            plan_modification(&t.id, &t.words, n, rewriter, item_seed, cap)
        })
        .collect();
    let mut out = PlanCorpus::default();
    for (t, r) in transcripts.iter().zip(results) {
        match r {
            Ok(plan) => out.plans.push(plan),
            Err(e) if e.is_skip() => out.skipped.push((t.id.clone(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
