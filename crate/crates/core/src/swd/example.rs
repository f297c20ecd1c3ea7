use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::plan::ModificationPlan;
use crate::corpus::CorpusItem;

pub fn swd_prompt(n: usize) -> String {
    format!("Which {n} words as synthetic in [audio]?")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwdExample {
    pub utterance_id: String,
    pub audio_ref: String,
    pub n_synthetic: usize,
    pub prompt: String,
    pub gold_words: Vec<String>,
}

impl From<SwdExample> for CorpusItem {
    fn from(e: SwdExample) -> Self {
        CorpusItem::Swd {
            id: e.utterance_id,
            audio_ref: e.audio_ref,
            n: e.n_synthetic,
            prompt: e.prompt,
            gold_words: e.gold_words,
        }
    }
}

pub fn format_swd_example(plan: &ModificationPlan, edited_audio_ref: &str) -> SwdExample {
    SwdExample {
        utterance_id: plan.utterance_id.clone(),
        audio_ref: edited_audio_ref.to_string(),
        n_synthetic: plan.span_len,
        prompt: swd_prompt(plan.span_len),
        gold_words: plan.replacement_words.clone(),
    }
}

/// Case-fold and strip leading/trailing punctuation.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

fn word_set(words: &[String]) -> BTreeSet<String> {
    words.iter().map(|w| normalize_word(w)).filter(|w| !w.is_empty()).collect()
}

/// 1 when the normalized predicted word set equals the gold set, else 0.
pub fn swd_item_score(predicted: &[String], gold: &[String]) -> f64 {
    if word_set(predicted) == word_set(gold) {
        1.0
    } else {
        0.0
    }
}

/// Mean item score; `None` for an empty corpus.
pub fn swd_accuracy(items: &[(Vec<String>, Vec<String>)]) -> Option<f64> {
    if items.is_empty() {
        return None;
    }
    Some(items.iter().map(|(p, g)| swd_item_score(p, g)).sum::<f64>() / items.len() as f64)
}

/// Split a model response into candidate words. Text after the last colon is
/// used when present ("The synthetic words are: x, y").
pub fn parse_predicted_words(response: &str) -> Vec<String> {
    let tail = response.rsplit_once(':').map_or(response, |(_, t)| t);
    tail.split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .map(normalize_word)
        .filter(|w| !w.is_empty())
        .collect()
}

/// Expected accuracy of guessing one word uniformly at random in each
/// single-word utterance: the mean of `1/len`.
pub fn random_guess_accuracy(lengths: &[usize]) -> Option<f64> {
    if lengths.is_empty() || lengths.contains(&0) {
        return None;
    }
    Some(lengths.iter().map(|&l| 1.0 / l as f64).sum::<f64>() / lengths.len() as f64)
}

/// Monte-Carlo version of [`random_guess_accuracy`] over utterances of the
/// given lengths with one synthetic word each.
pub fn simulate_random_guess<R: Rng + ?Sized>(lengths: &[usize], trials: usize, rng: &mut R) -> Option<f64> {
    if lengths.is_empty() || lengths.contains(&0) || trials == 0 {
        return None;
    }
    let mut hits = 0usize;
    for t in 0..trials {
        let len = lengths[t % lengths.len()];
        let gold = rng.random_range(0..len);
        let guess = rng.random_range(0..len);
        hits += usize::from(gold == guess);
    }
    Some(hits as f64 / trials as f64)
}
