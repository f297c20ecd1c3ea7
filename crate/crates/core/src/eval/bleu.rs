//! BLEU with clipped n-gram precisions, brevity penalty and optional add-one
//! smoothing of zero higher-order counts.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::metrics::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    None,
    /// Zero-match precisions of order >= 2 become `1 / (total + 1)`.
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BleuLevel {
    /// Mean of per-item sentence scores.
    Sentence,
    /// Pooled n-gram counts and lengths over all items.
    Corpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BleuConfig {
    pub max_n: usize,
    pub smoothing: Smoothing,
    pub level: BleuLevel,
    pub lowercase: bool,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: Smoothing::AddOne,
            level: BleuLevel::Corpus,
            lowercase: true,
        }
    }
}

static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\w+|[^\w\s]").unwrap());

/// Word and punctuation tokens, optionally case-folded.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    TOKEN
        .find_iter(text)
        .map(|m| {
            if lowercase {
                m.as_str().to_lowercase()
            } else {
                m.as_str().to_string()
            }
        })
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sufficient statistics of one candidate against its references.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BleuStats {
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    fn add(&mut self, other: &BleuStats) {
        if self.matches.is_empty() {
            self.matches = vec![0; other.matches.len()];
            self.totals = vec![0; other.totals.len()];
        }
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.candidate_len == 0 || self.matches.first().copied().unwrap_or(0) == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for (n, (&m, &t)) in self.matches.iter().zip(&self.totals).enumerate() {
            let p = match (m, smoothing) {
                (0, Smoothing::AddOne) if n > 0 => 1.0 / (t as f64 + 1.0),
                (0, _) => return 0.0,
                _ => m as f64 / t as f64,
            };
            log_sum += p.ln();
        }
        let c = self.candidate_len as f64;
        let r = self.reference_len as f64;
        let brevity = if c > r { 0.0 } else { 1.0 - r / c };
        (brevity + log_sum / self.matches.len() as f64).exp()
    }
}

/// Clipped counts for each order and the closest reference length
/// (ties resolve to the shorter reference).
pub fn bleu_stats(candidate: &[String], references: &[Vec<String>], max_n: usize) -> BleuStats {
    let mut stats = BleuStats {
        matches: vec![0; max_n],
        totals: vec![0; max_n],
        candidate_len: candidate.len(),
        reference_len: 0,
    };
    for n in 1..=max_n {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in references {
            for (gram, count) in ngram_counts(r, n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(count);
            }
        }
        stats.totals[n - 1] = cand.values().sum();
        stats.matches[n - 1] = cand
            .iter()
            .map(|(gram, &count)| count.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
    }
    let c = candidate.len() as i64;
    stats.reference_len = references
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| ((len as i64 - c).abs(), len))
        .unwrap_or(0);
    stats
}

fn tokenized(
    candidate: &str,
    references: &[&str],
    config: &BleuConfig,
) -> Result<(Vec<String>, Vec<Vec<String>>), MetricError> {
    let cand = tokenize(candidate, config.lowercase);
    if cand.is_empty() {
        return Err(MetricError::Empty("bleu candidate"));
    }
    let refs: Vec<Vec<String>> = references
        .iter()
        .map(|r| tokenize(r, config.lowercase))
        .collect();
    if refs.is_empty() || refs.iter().any(Vec::is_empty) {
        return Err(MetricError::Empty("bleu references"));
    }
    Ok((cand, refs))
}

/// Sentence-level BLEU in `[0, 1]`.
pub fn bleu(candidate: &str, references: &[&str], config: &BleuConfig) -> Result<f64, MetricError> {
    let (cand, refs) = tokenized(candidate, references, config)?;
    Ok(bleu_stats(&cand, &refs, config.max_n).score(config.smoothing))
}

/// BLEU over many `(candidate, references)` items at the configured level.
pub fn corpus_bleu(items: &[(&str, Vec<&str>)], config: &BleuConfig) -> Result<f64, MetricError> {
    if items.is_empty() {
        return Err(MetricError::Empty("bleu corpus"));
    }
    let mut pooled = BleuStats::default();
    let mut sentence_sum = 0.0;
    for (cand, refs) in items {
        let (c, r) = tokenized(cand, refs, config)?;
        let stats = bleu_stats(&c, &r, config.max_n);
        sentence_sum += stats.score(config.smoothing);
        pooled.add(&stats);
    }
    Ok(match config.level {
        BleuLevel::Sentence => sentence_sum / items.len() as f64,
        BleuLevel::Corpus => pooled.score(config.smoothing),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> BleuConfig {
        BleuConfig::default()
    }

    #[test]
    fn self_match_is_one() {
        let s = "The recording is clean, and the voice sounds natural.";
        assert_eq!(bleu(s, &[s], &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn clipping_oracle() {
        // unigrams: 4 candidate "the", clipped to 1 by the reference -> 1/4
        // bigrams "the the" x3, none in reference -> add-one 1/(3+1)
        // trigrams x2 -> 1/3, 4-grams x1 -> 1/2; c=4 > r=2 so no brevity penalty
        let oracle = (0.25f64 * 0.25 * (1.0 / 3.0) * 0.5).powf(0.25);
        let got = bleu("the the the the", &["the cat"], &cfg()).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
        let stats = bleu_stats(&tokenize("the the the the", true), &[tokenize("the cat", true)], 4);
        assert_eq!(stats.matches, vec![1, 0, 0, 0]);
        assert_eq!(stats.totals, vec![4, 3, 2, 1]);
    }

    #[test]
    fn brevity_penalty_oracle() {
        // every candidate n-gram matches; orders 3 and 4 have no candidate
        // n-grams and smooth to 1; BP = exp(1 - 6/2)
        let got = bleu("the cat", &["the cat sat on the mat"], &cfg()).unwrap();
        let oracle = (1.0f64 - 6.0 / 2.0).exp();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn without_smoothing_zero_order_zeroes_score() {
        let c = BleuConfig { smoothing: Smoothing::None, ..cfg() };
        assert_eq!(bleu("the the the the", &["the cat"], &c).unwrap(), 0.0);
    }

    #[test]
    fn closest_reference_length_prefers_shorter_on_tie() {
        let stats = bleu_stats(&tokenize("a b c", true), &[tokenize("a b", true), tokenize("a b c d", true)], 2);
        assert_eq!(stats.reference_len, 2);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(bleu("", &["x"], &cfg()).is_err());
        assert!(bleu("x", &[], &cfg()).is_err());
        assert!(bleu("x", &["..."], &cfg()).is_ok());
        assert!(bleu("x", &["  "], &cfg()).is_err());
    }

    #[test]
    fn tokenizer_splits_punctuation_and_folds_case() {
        assert_eq!(tokenize("Hello, World!", true), vec!["hello", ",", "world", "!"]);
    }

    #[test]
    fn corpus_levels() {
        let items = vec![("a b c d", vec!["a b c d"]), ("a b c d", vec!["a b c d"])];
        assert_eq!(corpus_bleu(&items, &cfg()).unwrap(), 1.0);
        let sent = BleuConfig { level: BleuLevel::Sentence, ..cfg() };
        assert_eq!(corpus_bleu(&items, &sent).unwrap(), 1.0);
    }

    fn words() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["the", "voice", "is", "clean", "noisy", "loud", "a", "bit"]), 1..12)
            .prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn bounded_and_self_inclusive(c in words(), r1 in words(), r2 in words()) {
            let b = bleu(&c, &[&r1, &r2], &cfg()).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
            prop_assert_eq!(bleu(&c, &[&r1, &c, &r2], &cfg()).unwrap(), 1.0);
            prop_assert_eq!(b, bleu(&c, &[&r2, &r1], &cfg()).unwrap());
        }
    }
}
