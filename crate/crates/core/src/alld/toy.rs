//! Desk-scale stand-in for the description task: five scores in, a short
//! rubric phrase sequence ending with the MOS out.
//!
//! Scores live on a 0.2 grid over [1, 5] and each is one context token.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::TrainingExample;
use super::table::TableShape;
use super::vocab::{Token, Vocabulary};
use crate::meta_corpus::{Dimension, ScoreTuple, SUB_DIMENSIONS};
use crate::seed;
use crate::synth::rubric_band;

pub const EOS: &str = "<eos>";
const META_MARK: &str = "<meta>";
const AUDIO_MARK: &str = "<audio>";

/// One word per rubric band (1..=5) for each sub-dimension.
pub const BAND_WORDS: [[&str; 5]; 4] = [
    ["overwhelming-noise", "noisy", "audible-hiss", "faint-hiss", "clean"],
    ["robotic", "muffled", "tinny", "slightly-colored", "natural"],
    ["fragmented", "choppy", "stuttering", "mostly-fluent", "fluent"],
    ["inaudible", "quiet", "uneven-level", "adequate-level", "ideal-level"],
];

/// Order of the scores in the audio-side serialization.
const AUDIO_ORDER: [Dimension; 5] = [Dimension::Loud, Dimension::Dis, Dimension::Col, Dimension::Noi, Dimension::Mos];

pub const TARGET_LEN: usize = 9;
pub const CONTEXT_LEN: usize = 11;
/// Number of grid points: 1.0, 1.2, ..., 5.0.
pub const GRID: u32 = 21;

fn grid_index(score: f64) -> u32 {
    ((score.clamp(1.0, 5.0) - 1.0) / 0.2).round() as u32
}

fn grid_label(index: u32) -> String {
    let tenths = 10 + 2 * index;
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Snap to the nearest grid point.
pub fn quantize(score: f64) -> f64 {
    f64::from(10 + 2 * grid_index(score)) / 10.0
}

pub fn toy_vocabulary() -> Vocabulary {
    let mut symbols: Vec<String> = vec![EOS.into(), META_MARK.into(), AUDIO_MARK.into(), ".".into()];
    symbols.extend(Dimension::ALL.iter().map(|d| d.key().to_string()));
    symbols.extend((0..10).map(|d| d.to_string()));
    symbols.extend((0..GRID).map(grid_label));
    symbols.extend(BAND_WORDS.iter().flatten().map(|w| w.to_string()));
    Vocabulary::new(symbols).expect("toy symbols are distinct")
}

pub fn toy_shape(vocab: &Vocabulary) -> TableShape {
    TableShape {
        vocab: vocab.len(),
        positions: TARGET_LEN,
        slots: CONTEXT_LEN,
        eos: vocab.id(EOS).expect("eos in vocabulary"),
        markov: false,
    }
}

fn score_token(vocab: &Vocabulary, score: f64) -> Token {
    vocab.id(&grid_label(grid_index(score))).expect("grid label in vocabulary")
}

fn word(vocab: &Vocabulary, w: &str) -> Token {
    vocab.id(w).expect("toy word in vocabulary")
}

/// `<meta> mos s noi s col s dis s loud s`
pub fn encode_meta(vocab: &Vocabulary, scores: &ScoreTuple) -> Vec<Token> {
    let mut out = vec![word(vocab, META_MARK)];
    for d in Dimension::ALL {
        out.extend([word(vocab, d.key()), score_token(vocab, scores.get(d))]);
    }
    out
}

/// `<audio>` followed by unlabeled scores in a different dimension order.
pub fn encode_audio(vocab: &Vocabulary, scores: &ScoreTuple) -> Vec<Token> {
    let mut out = vec![word(vocab, AUDIO_MARK)];
    out.extend(AUDIO_ORDER.iter().map(|d| score_token(vocab, scores.get(*d))));
    out
}

/// Band word per sub-dimension, then `mos i . d <eos>`.
pub fn encode_target(vocab: &Vocabulary, scores: &ScoreTuple) -> Vec<Token> {
    let mut out: Vec<Token> = SUB_DIMENSIONS
        .iter()
        .zip(BAND_WORDS)
        .map(|(d, bank)| word(vocab, bank[rubric_band(quantize(scores.get(*d))) - 1]))
        .collect();
    let label = grid_label(grid_index(scores.mos));
    let (i, f) = label.split_once('.').expect("grid label has a point");
    out.extend([word(vocab, "mos"), word(vocab, i), word(vocab, "."), word(vocab, f), word(vocab, EOS)]);
    out
}

/// Readable form of a decoded target: `<eos>` dropped, `i . d` joined as `i.d`.
pub fn render_output(vocab: &Vocabulary, tokens: &[Token]) -> String {
    let words: Vec<&str> = tokens
        .iter()
        .filter_map(|&t| vocab.symbol(t).ok())
        .filter(|w| *w != EOS)
        .collect();
    let is_digit = |w: &str| w.len() == 1 && w.chars().all(|c| c.is_ascii_digit());
    let mut out: Vec<String> = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        if i + 2 < words.len() && is_digit(words[i]) && words[i + 1] == "." && is_digit(words[i + 2]) {
            out.push(format!("{}.{}", words[i], words[i + 2]));
            i += 3;
        } else {
            out.push(words[i].to_string());
            i += 1;
        }
    }
    out.join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyItem {
    pub scores: ScoreTuple,
    pub example: TrainingExample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTask {
    pub vocab: Vocabulary,
    pub items: Vec<ToyItem>,
    pub train: Vec<usize>,
    pub heldout: Vec<usize>,
}

impl ToyTask {
    /// Split `scored` items into train and held-out parts by seeded shuffle.
    pub fn build(scored: Vec<(String, ScoreTuple)>, heldout_fraction: f64, seed: u64) -> Self {
        let vocab = toy_vocabulary();
        let items: Vec<ToyItem> = scored
            .into_iter()
            .map(|(id, s)| {
                let q = |d: Dimension| quantize(s.get(d));
                let scores = ScoreTuple::new(q(Dimension::Mos), q(Dimension::Noi), q(Dimension::Col), q(Dimension::Dis), q(Dimension::Loud));
                ToyItem {
                    example: TrainingExample {
                        id,
                        x_a: encode_audio(&vocab, &scores),
                        x_t: encode_meta(&vocab, &scores),
                        y_t: encode_target(&vocab, &scores),
                    },
                    scores,
                }
            })
            .collect();
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut seed::rng(seed, "toy-split", 0));
        let n_heldout = ((items.len() as f64) * heldout_fraction).round() as usize;
        let mut heldout = order[..n_heldout].to_vec();
        let mut train = order[n_heldout..].to_vec();
        heldout.sort_unstable();
        train.sort_unstable();
        Self {
            vocab,
            items,
            train,
            heldout,
        }
    }

    /// `n` items with independent scores drawn uniformly from the grid.
    pub fn random(n: usize, heldout_fraction: f64, seed: u64) -> Self {
        let mut rng = seed::rng(seed, "toy-scores", 0);
        let mut draw = || f64::from(10 + 2 * rng.random_range(0..GRID)) / 10.0;
        let scored = (0..n)
            .map(|i| (format!("toy{i:05}"), ScoreTuple::new(draw(), draw(), draw(), draw(), draw())))
            .collect();
        Self::build(scored, heldout_fraction, seed)
    }

    pub fn train_examples(&self) -> Vec<TrainingExample> {
        self.train.iter().map(|&i| self.items[i].example.clone()).collect()
    }

    pub fn heldout_examples(&self) -> Vec<TrainingExample> {
        self.heldout.iter().map(|&i| self.items[i].example.clone()).collect()
    }

    pub fn shape(&self) -> TableShape {
        toy_shape(&self.vocab)
    }
}
