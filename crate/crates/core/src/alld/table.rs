use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scorer::{log_softmax, Gradient, ScoreError, Scorer, Trainable};
use super::vocab::Token;

/// Dimensions of a [`TableScorer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableShape {
    pub vocab: usize,
    /// Maximum target length.
    pub positions: usize,
    /// Maximum context length.
    pub slots: usize,
    pub eos: Token,
    /// Condition on the previous target token.
    #[serde(default = "yes")]
    pub markov: bool,
}

fn yes() -> bool {
    true
}

impl TableShape {
    pub fn n_params(&self) -> usize {
        self.ctx_offset() + self.positions * self.slots * self.vocab * self.vocab
    }

    fn prev_offset(&self) -> usize {
        self.positions * self.vocab
    }

    fn ctx_offset(&self) -> usize {
        self.prev_offset() + if self.markov { (self.vocab + 1) * self.vocab } else { 0 }
    }
}

/// Log-linear autoregressive toy model.
///
/// The logits for target position `p` after previous token `q`, given context
/// `c`, are `bias[p] + prev[q] + sum_s ctx[p][s][c_s]`, each term a row of
/// `vocab` weights. `q` is a dedicated start row at position 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TableScorer {
    shape: TableShape,
    params: Vec<f64>,
}

impl TableScorer {
    pub fn zeros(shape: TableShape) -> Self {
        Self {
            params: vec![0.0; shape.n_params()],
            shape,
        }
    }

    pub fn random<R: Rng + ?Sized>(shape: TableShape, scale: f64, rng: &mut R) -> Self {
        let params = (0..shape.n_params()).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
        Self { shape, params }
    }

    pub fn from_params(shape: TableShape, params: Vec<f64>) -> Option<Self> {
        (params.len() == shape.n_params()).then_some(Self { shape, params })
    }

    pub fn shape(&self) -> TableShape {
        self.shape
    }

    /// Offsets of the weight rows that contribute to one position.
    fn rows(&self, context: &[Token], prefix: &[Token]) -> Vec<usize> {
        let s = self.shape;
        let v = s.vocab;
        let p = prefix.len();
        let q = prefix.last().map_or(v, |&t| t as usize);
        let mut rows = Vec::with_capacity(2 + context.len());
        rows.push(p * v);
        if s.markov {
            rows.push(s.prev_offset() + q * v);
        }
        for (slot, &c) in context.iter().enumerate() {
            rows.push(s.ctx_offset() + ((p * s.slots + slot) * v + c as usize) * v);
        }
        rows
    }

    fn logprobs_at(&self, rows: &[usize]) -> Vec<f64> {
        let v = self.shape.vocab;
        let mut z = self.params[rows[0]..rows[0] + v].to_vec();
        for &r in &rows[1..] {
            for (zk, w) in z.iter_mut().zip(&self.params[r..r + v]) {
                *zk += w;
            }
        }
        log_softmax(&mut z);
        z
    }
}

impl Scorer for TableScorer {
    fn vocab_size(&self) -> usize {
        self.shape.vocab
    }

    fn eos(&self) -> Token {
        self.shape.eos
    }

    fn max_target_len(&self) -> usize {
        self.shape.positions
    }

    fn check(&self, context: &[Token], target: &[Token]) -> Result<(), ScoreError> {
        let s = self.shape;
        if target.is_empty() {
            return Err(ScoreError::EmptyTarget);
        }
        if target.len() > s.positions {
            return Err(ScoreError::TargetTooLong {
                len: target.len(),
                max: s.positions,
            });
        }
        if context.len() > s.slots {
            return Err(ScoreError::ContextTooLong {
                len: context.len(),
                max: s.slots,
            });
        }
        if let Some(&token) = context.iter().chain(target).find(|&&t| t as usize >= s.vocab) {
            return Err(ScoreError::BadToken { token, vocab: s.vocab });
        }
        Ok(())
    }

    fn next_logprobs(&self, context: &[Token], prefix: &[Token]) -> Vec<f64> {
        self.logprobs_at(&self.rows(context, prefix))
    }
}

impl Trainable for TableScorer {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate_logprob_grad(&self, context: &[Token], target: &[Token], weight: f64, grad: &mut Gradient) -> f64 {
        let mut total = 0.0;
        for i in 0..target.len() {
            let rows = self.rows(context, &target[..i]);
            let lp = self.logprobs_at(&rows);
            let y = target[i] as usize;
            total += lp[y];
            // d log softmax(z)_y / dz_k = [k == y] - p_k, shared by every row
            let d: Vec<f64> = lp
                .iter()
                .enumerate()
                .map(|(k, l)| weight * (f64::from(u8::from(k == y)) - l.exp()))
                .collect();
            for &r in &rows {
                for (k, dk) in d.iter().enumerate() {
                    grad.add(r + k, *dk);
                }
            }
        }
        total
    }
}
