use rand::Rng;
use thiserror::Error;

use super::vocab::Token;
use crate::synth::GenParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("empty target sequence")]
    EmptyTarget,
    #[error("target of {len} tokens exceeds the model limit of {max}")]
    TargetTooLong { len: usize, max: usize },
    #[error("context of {len} tokens exceeds the model limit of {max}")]
    ContextTooLong { len: usize, max: usize },
    #[error("token {token} is outside the vocabulary of {vocab}")]
    BadToken { token: Token, vocab: usize },
}

/// Read-only access to an autoregressive model `p(y | x)`.
pub trait Scorer: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn eos(&self) -> Token;

    fn max_target_len(&self) -> usize;

    fn check(&self, context: &[Token], target: &[Token]) -> Result<(), ScoreError>;

    /// Log-distribution over the vocabulary for the next token after `prefix`.
    fn next_logprobs(&self, context: &[Token], prefix: &[Token]) -> Vec<f64>;

    /// Per-token teacher-forced log-probabilities of `target`.
    fn token_logprobs(&self, context: &[Token], target: &[Token]) -> Vec<f64> {
        (0..target.len())
            .map(|i| self.next_logprobs(context, &target[..i])[target[i] as usize])
            .collect()
    }

    fn sequence_logprob(&self, context: &[Token], target: &[Token]) -> f64 {
        self.token_logprobs(context, target).iter().sum()
    }
}

/// A scorer with a flat parameter vector and analytic gradients.
pub trait Trainable: Scorer {
    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// `grad += weight * d/dθ log p(target | context)`; returns the log-probability.
    fn accumulate_logprob_grad(&self, context: &[Token], target: &[Token], weight: f64, grad: &mut Gradient) -> f64;

    fn freeze(&self) -> Frozen<Self>
    where
        Self: Clone + Sized,
    {
        Frozen(self.clone())
    }
}

/// Evaluation-only copy of a model. Exposes no mutable access.
#[derive(Debug, Clone)]
pub struct Frozen<S>(S);

impl<S> Frozen<S> {
    pub fn inner(&self) -> &S {
        &self.0
    }
}

impl<S: Scorer> Scorer for Frozen<S> {
    fn vocab_size(&self) -> usize {
        self.0.vocab_size()
    }
    fn eos(&self) -> Token {
        self.0.eos()
    }
    fn max_target_len(&self) -> usize {
        self.0.max_target_len()
    }
    fn check(&self, context: &[Token], target: &[Token]) -> Result<(), ScoreError> {
        self.0.check(context, target)
    }
    fn next_logprobs(&self, context: &[Token], prefix: &[Token]) -> Vec<f64> {
        self.0.next_logprobs(context, prefix)
    }
    fn token_logprobs(&self, context: &[Token], target: &[Token]) -> Vec<f64> {
        self.0.token_logprobs(context, target)
    }
}

/// Dense gradient buffer that remembers which coordinates were written, so
/// clearing and sparse updates cost only the touched entries.
#[derive(Debug, Clone)]
pub struct Gradient {
    values: Vec<f64>,
    touched: Vec<usize>,
    marked: Vec<bool>,
}

impl Gradient {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            touched: Vec::new(),
            marked: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn add(&mut self, i: usize, v: f64) {
        if !self.marked[i] {
            self.marked[i] = true;
            self.touched.push(i);
        }
        self.values[i] += v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Touched coordinates in first-write order.
    pub fn touched(&self) -> &[usize] {
        &self.touched
    }

    pub fn scale(&mut self, s: f64) {
        for &i in &self.touched {
            self.values[i] *= s;
        }
    }

    pub fn clear(&mut self) {
        for &i in &self.touched {
            self.values[i] = 0.0;
            self.marked[i] = false;
        }
        self.touched.clear();
    }

    pub fn is_finite(&self) -> bool {
        self.touched.iter().all(|&i| self.values[i].is_finite())
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Decode from `model` until end-of-sequence or the length limit.
///
/// Temperature 0 decodes greedily; unset temperature and top-p mean 1.0.
pub fn sample<S: Scorer + ?Sized, R: Rng + ?Sized>(
    model: &S,
    context: &[Token],
    params: &GenParams,
    rng: &mut R,
) -> Vec<Token> {
    let temperature = params.temperature.unwrap_or(1.0);
    let top_p = params.top_p.unwrap_or(1.0);
    let max_len = model.max_target_len().min(params.max_tokens.max(1) as usize);
    let mut out = Vec::new();
    while out.len() < max_len {
        let lp = model.next_logprobs(context, &out);
        let next = if temperature <= 0.0 {
            argmax(&lp)
        } else {
            let scaled: Vec<f64> = lp.iter().map(|l| l / temperature).collect();
            let m = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut probs: Vec<f64> = scaled.iter().map(|l| (l - m).exp()).collect();
            if top_p < 1.0 {
                nucleus(&mut probs, top_p);
            }
            sample_index(&probs, rng)
        } as Token;
        out.push(next);
        if next == model.eos() {
            break;
        }
    }
    out
}

pub fn greedy<S: Scorer + ?Sized>(model: &S, context: &[Token]) -> Vec<Token> {
    let params = GenParams {
        temperature: Some(0.0),
        max_tokens: u32::MAX,
        ..GenParams::default()
    };
    // unused at temperature 0
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    sample(model, context, &params, &mut rng)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn nucleus(probs: &mut [f64], top_p: f64) {
    let total: f64 = probs.iter().sum();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut keep = order.len();
    for (rank, &i) in order.iter().enumerate() {
        acc += probs[i] / total;
        if acc >= top_p {
            keep = rank + 1;
            break;
        }
    }
    for &i in &order[keep..] {
        probs[i] = 0.0;
    }
}

pub(crate) fn log_softmax(logits: &mut [f64]) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    for z in logits.iter_mut() {
        *z -= lse;
    }
}
