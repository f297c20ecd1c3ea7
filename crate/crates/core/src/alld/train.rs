use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

use super::data::{PreferencePair, TrainingExample};
use super::loss::{alld_loss, alld_loss_grad, sft_loss, sft_loss_grad, LossError, Reduction};
use super::optim::{Optimizer, OptimizerKind};
use super::scorer::{greedy, sample, Gradient, Scorer, Trainable};
use super::vocab::Token;
use crate::seed;
use crate::synth::GenParams;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error("{phase} diverged at step {step}: non-finite loss or gradient")]
    Divergence { phase: &'static str, step: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("{dropped} of {sampled} samples reproduced y_t (drop rate {rate:.3} > {max})")]
    Quality {
        dropped: usize,
        sampled: usize,
        rate: f64,
        max: f64,
    },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("held-out reward margin did not increase: {initial:.4} -> {last:.4}; curve {curve:?}")]
    MarginNotIncreasing { initial: f64, last: f64, curve: Vec<f64> },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub beta: f64,
    pub learning_rate: f64,
    /// Warm-up learning rate; `None` reuses `learning_rate`.
    pub warmup_learning_rate: Option<f64>,
    pub warmup_fraction: f64,
    pub warmup_epochs: usize,
    /// Epochs of reference pretraining on the meta-text context.
    pub reference_epochs: usize,
    /// Reference learning rate; `None` reuses `learning_rate`.
    pub reference_learning_rate: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Sampling profile for the dispreferred completions.
    pub sampling: GenParams,
    /// Share of the comparison set kept out of training to track the margin.
    pub heldout_fraction: f64,
    pub max_drop_rate: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            beta: 0.4,
            learning_rate: 5e-6,
            warmup_learning_rate: None,
            warmup_fraction: 0.5,
            warmup_epochs: 1,
            reference_epochs: 1,
            reference_learning_rate: None,
            epochs: 1,
            batch_size: 16,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            sampling: GenParams {
                temperature: Some(1.0),
                top_p: Some(1.0),
                ..GenParams::default()
            },
            heldout_fraction: 0.1,
            max_drop_rate: 0.5,
        }
    }
}

impl TrainerConfig {
    /// Settings sized for the table model on the toy task.
    pub fn toy() -> Self {
        Self {
            beta: 1.0,
            learning_rate: 1.0,
            warmup_learning_rate: Some(1.0),
            reference_learning_rate: Some(1.0),
            warmup_epochs: 8,
            reference_epochs: 40,
            epochs: 30,
            optimizer: OptimizerKind::Sgd,
            ..Self::default()
        }
    }

    pub fn reference_lr(&self) -> f64 {
        self.reference_learning_rate.unwrap_or(self.learning_rate)
    }

    pub fn warmup_lr(&self) -> f64 {
        self.warmup_learning_rate.unwrap_or(self.learning_rate)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.learning_rate >= 0.0 && self.warmup_lr() >= 0.0 && self.reference_lr() >= 0.0) {
            return bad("learning rates must be non-negative".into());
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return bad(format!("warmup_fraction must lie in (0, 1), got {}", self.warmup_fraction));
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            return bad(format!("heldout_fraction must lie in [0, 1), got {}", self.heldout_fraction));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        self.sampling.validate().map_err(TrainError::Config)
    }
}

/// One line of a training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    SftStep {
        phase: String,
        step: usize,
        epoch: usize,
        loss: f64,
    },
    SftEpoch {
        phase: String,
        epoch: usize,
        mean_loss: f64,
    },
    AlldStep {
        step: usize,
        epoch: usize,
        loss: f64,
        margin: f64,
        policy_logp_t: f64,
        policy_logp_a: f64,
        ref_logp_t: f64,
        ref_logp_a: f64,
    },
    AlldEval {
        epoch: usize,
        heldout_margin: f64,
        heldout_loss: f64,
    },
}

/// Write a JSONL log whose first line is the only one carrying a timestamp.
pub fn write_log<W: Write, C: Serialize>(
    mut sink: W,
    timestamp: &str,
    config: &C,
    records: &[LogRecord],
) -> std::io::Result<()> {
    let header = serde_json::json!({
        "kind": "header",
        "schema_version": crate::SCHEMA_VERSION,
        "timestamp": timestamp,
        "config": config,
    });
    writeln!(sink, "{header}")?;
    for r in records {
        writeln!(sink, "{}", serde_json::to_string(r).expect("log records are plain data"))?;
    }
    Ok(())
}

/// Which context a model reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Audio,
    Meta,
}

impl Side {
    fn context(self, e: &TrainingExample) -> &[Token] {
        match self {
            Side::Audio => &e.x_a,
            Side::Meta => &e.x_t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftOptions {
    pub phase: String,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SftReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub log: Vec<LogRecord>,
}

impl SftReport {
    pub fn improved(&self) -> bool {
        self.final_loss < self.initial_loss
    }
}

/// Mean per-token NLL of the targets.
pub fn mean_sft_loss<S: Scorer>(model: &S, examples: &[TrainingExample], side: Side) -> Result<f64, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Empty("corpus"));
    }
    let losses: Result<Vec<f64>, LossError> = examples
        .par_iter()
        .map(|e| sft_loss(model, side.context(e), &e.y_t, Reduction::Mean))
        .collect();
    Ok(losses?.iter().sum::<f64>() / examples.len() as f64)
}

/// Supervised finetuning on `(context, y_t)` with mean per-token loss.
pub fn sft_train<M: Trainable>(
    model: &mut M,
    examples: &[TrainingExample],
    side: Side,
    opts: &SftOptions,
) -> Result<SftReport, TrainError> {
    let initial_loss = mean_sft_loss(model, examples, side)?;
    let mut opt = Optimizer::new(opts.optimizer, opts.learning_rate, model.params().len());
    let mut grad = Gradient::zeros(model.params().len());
    let mut log = Vec::new();
    let mut step = 0;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut seed::rng(opts.seed, &format!("{}-epoch", opts.phase), epoch as u64));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(opts.batch_size.max(1)) {
            step += 1;
            grad.clear();
            let scale = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch {
                let e = &examples[i];
                match sft_loss_grad(model, side.context(e), &e.y_t, Reduction::Mean, scale, &mut grad) {
                    Ok(l) => loss += scale * l,
                    Err(LossError::NonFinite { .. }) => loss = f64::NAN,
                    Err(e) => return Err(e.into()),
                }
            }
            if !loss.is_finite() || !grad.is_finite() {
                return Err(TrainError::Divergence {
                    phase: "sft",
                    step,
                });
            }
            opt.step(model.params_mut(), &grad);
            epoch_loss += loss * batch.len() as f64;
            log.push(LogRecord::SftStep {
                phase: opts.phase.clone(),
                step,
                epoch,
                loss,
            });
        }
        log.push(LogRecord::SftEpoch {
            phase: opts.phase.clone(),
            epoch,
            mean_loss: epoch_loss / examples.len() as f64,
        });
    }
    let final_loss = mean_sft_loss(model, examples, side)?;
    Ok(SftReport {
        initial_loss,
        final_loss,
        log,
    })
}

/// Seeded shuffle of `0..n`, first `floor(n * fraction)` indices, sorted.
pub fn warmup_subset(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed, "warmup-subset", 0));
    let take = ((n as f64) * fraction).floor() as usize;
    let mut subset = order[..take].to_vec();
    subset.sort_unstable();
    subset
}

/// Warm-up finetuning of the policy on the `warmup_fraction` subset of
/// `train`, mapping the audio-side context to `y_t`.
pub fn warmup_train<M: Trainable>(
    policy: &mut M,
    train: &[TrainingExample],
    cfg: &TrainerConfig,
) -> Result<SftReport, TrainError> {
    cfg.validate()?;
    let subset: Vec<TrainingExample> = warmup_subset(train.len(), cfg.warmup_fraction, cfg.seed)
        .into_iter()
        .map(|i| train[i].clone())
        .collect();
    let opts = SftOptions {
        phase: "warmup".into(),
        epochs: cfg.warmup_epochs,
        learning_rate: cfg.warmup_lr(),
        batch_size: cfg.batch_size,
        optimizer: cfg.optimizer,
        seed: cfg.seed,
    };
    sft_train(policy, &subset, Side::Audio, &opts)
}

/// Fit the reference model on `(x_t, y_t)` over the whole training set.
pub fn pretrain_reference<M: Trainable>(
    reference: &mut M,
    train: &[TrainingExample],
    cfg: &TrainerConfig,
) -> Result<SftReport, TrainError> {
    cfg.validate()?;
    let opts = SftOptions {
        phase: "reference".into(),
        epochs: cfg.reference_epochs,
        learning_rate: cfg.reference_lr(),
        batch_size: cfg.batch_size,
        optimizer: cfg.optimizer,
        seed: cfg.seed,
    };
    sft_train(reference, train, Side::Meta, &opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceBuild {
    pub pairs: Vec<PreferencePair>,
    pub dropped: Vec<String>,
    pub sampled: usize,
}

impl PreferenceBuild {
    pub fn drop_rate(&self) -> f64 {
        if self.sampled == 0 {
            0.0
        } else {
            self.dropped.len() as f64 / self.sampled as f64
        }
    }
}

/// Sample one `y_a` per example from the policy; samples equal to `y_t` are
/// dropped. Each example draws from its own seeded stream.
pub fn build_preference_dataset<S: Scorer>(
    policy: &S,
    examples: &[TrainingExample],
    params: &GenParams,
    seed: u64,
    max_drop_rate: f64,
) -> Result<PreferenceBuild, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Empty("training set"));
    }
    let samples: Vec<Vec<Token>> = examples
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut rng = seed::rng(seed, "dispreferred", i as u64);
            sample(policy, &e.x_a, params, &mut rng)
        })
        .collect();
    let mut build = PreferenceBuild {
        pairs: Vec::new(),
        dropped: Vec::new(),
        sampled: examples.len(),
    };
    for (e, y_a) in examples.iter().zip(samples) {
        if y_a == e.y_t {
            build.dropped.push(e.id.clone());
        } else {
            build.pairs.push(PreferencePair {
                id: e.id.clone(),
                x_a: e.x_a.clone(),
                x_t: e.x_t.clone(),
                y_t: e.y_t.clone(),
                y_a,
            });
        }
    }
    let rate = build.drop_rate();
    if rate > max_drop_rate || build.pairs.is_empty() {
        return Err(TrainError::Quality {
            dropped: build.dropped.len(),
            sampled: build.sampled,
            rate,
            max: max_drop_rate,
        });
    }
    Ok(build)
}

/// Batch means of the loss and its components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub loss: f64,
    pub margin: f64,
    pub policy_logp_t: f64,
    pub policy_logp_a: f64,
    pub ref_logp_t: f64,
    pub ref_logp_a: f64,
}

/// One optimizer step on the batch-mean loss. The reference is only read.
pub fn alld_grad_step<P: Trainable, R: Scorer>(
    policy: &mut P,
    reference: &R,
    batch: &[PreferencePair],
    beta: f64,
    opt: &mut Optimizer,
    grad: &mut Gradient,
) -> Result<StepReport, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::Empty("batch"));
    }
    grad.clear();
    let scale = 1.0 / batch.len() as f64;
    let mut r = StepReport::default();
    for pair in batch {
        let l = match alld_loss_grad(policy, reference, pair, beta, scale, grad) {
            Err(LossError::NonFinite { .. }) => return Err(TrainError::Divergence { phase: "alld", step: 0 }),
            other => other?,
        };
        r.loss += scale * l.loss;
        r.margin += scale * l.margin;
        r.policy_logp_t += scale * l.logprobs.policy_t;
        r.policy_logp_a += scale * l.logprobs.policy_a;
        r.ref_logp_t += scale * l.logprobs.ref_t;
        r.ref_logp_a += scale * l.logprobs.ref_a;
    }
    if !r.loss.is_finite() || !grad.is_finite() {
        return Err(TrainError::Divergence {
            phase: "alld",
            step: 0,
        });
    }
    opt.step(policy.params_mut(), grad);
    Ok(r)
}

/// Mean loss and margin over `pairs`.
pub fn mean_margin<P: Scorer, R: Scorer>(
    policy: &P,
    reference: &R,
    pairs: &[PreferencePair],
    beta: f64,
) -> Result<(f64, f64), TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::Empty("held-out slice"));
    }
    let reports: Result<Vec<_>, LossError> = pairs
        .par_iter()
        .map(|p| alld_loss(policy, reference, p, beta))
        .collect();
    let reports = reports?;
    let n = pairs.len() as f64;
    Ok((
        reports.iter().map(|r| r.loss).sum::<f64>() / n,
        reports.iter().map(|r| r.margin).sum::<f64>() / n,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlldReport {
    pub log: Vec<LogRecord>,
    /// Held-out mean margin before training and after each epoch.
    pub margin_curve: Vec<f64>,
    pub heldout_ids: Vec<String>,
}

impl AlldReport {
    pub fn initial_margin(&self) -> f64 {
        self.margin_curve[0]
    }

    pub fn final_margin(&self) -> f64 {
        *self.margin_curve.last().expect("curve has the initial point")
    }
}

/// Preference distillation over `dataset`, holding out a seeded slice to
/// track the implicit reward margin.
pub fn train_alld<P: Trainable, R: Scorer>(
    policy: &mut P,
    reference: &R,
    dataset: &[PreferencePair],
    cfg: &TrainerConfig,
) -> Result<AlldReport, TrainError> {
    cfg.validate()?;
    if dataset.len() < 2 {
        return Err(TrainError::Empty("comparison dataset"));
    }
    if let Some(bad) = dataset.iter().find(|p| !p.is_valid()) {
        return Err(TrainError::Config(format!("pair `{}` is invalid", bad.id)));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut seed::rng(cfg.seed, "alld-heldout", 0));
    let n_heldout = (((dataset.len() as f64) * cfg.heldout_fraction).round() as usize).clamp(1, dataset.len() - 1);
    let mut heldout_idx = order[..n_heldout].to_vec();
    heldout_idx.sort_unstable();
    let heldout: Vec<PreferencePair> = heldout_idx.iter().map(|&i| dataset[i].clone()).collect();
    let mut train: Vec<usize> = order[n_heldout..].to_vec();
    train.sort_unstable();

    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, policy.params().len());
    let mut grad = Gradient::zeros(policy.params().len());
    let mut log = Vec::new();
    let (loss0, margin0) = mean_margin(policy, reference, &heldout, cfg.beta)?;
    log.push(LogRecord::AlldEval {
        epoch: 0,
        heldout_margin: margin0,
        heldout_loss: loss0,
    });
    let mut curve = vec![margin0];
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        train.shuffle(&mut seed::rng(cfg.seed, "alld-epoch", epoch as u64));
        for chunk in train.chunks(cfg.batch_size) {
            step += 1;
            let batch: Vec<PreferencePair> = chunk.iter().map(|&i| dataset[i].clone()).collect();
            let r = match alld_grad_step(policy, reference, &batch, cfg.beta, &mut opt, &mut grad) {
                Err(TrainError::Divergence { phase, .. }) => return Err(TrainError::Divergence { phase, step }),
                other => other?,
            };
            log.push(LogRecord::AlldStep {
                step,
                epoch,
                loss: r.loss,
                margin: r.margin,
                policy_logp_t: r.policy_logp_t,
                policy_logp_a: r.policy_logp_a,
                ref_logp_t: r.ref_logp_t,
                ref_logp_a: r.ref_logp_a,
            });
        }
        let (loss, margin) = mean_margin(policy, reference, &heldout, cfg.beta)?;
        log.push(LogRecord::AlldEval {
            epoch,
            heldout_margin: margin,
            heldout_loss: loss,
        });
        curve.push(margin);
    }
    let report = AlldReport {
        log,
        margin_curve: curve,
        heldout_ids: heldout.iter().map(|p| p.id.clone()).collect(),
    };
    if cfg.epochs > 0 && report.final_margin() <= report.initial_margin() {
        return Err(TrainError::MarginNotIncreasing {
            initial: report.initial_margin(),
            last: report.final_margin(),
            curve: report.margin_curve,
        });
    }
    Ok(report)
}

/// Share of examples whose greedy decode equals `y_t` exactly.
pub fn greedy_exact_match<S: Scorer>(model: &S, examples: &[TrainingExample], side: Side) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let hits = examples
        .par_iter()
        .filter(|e| greedy(model, side.context(e)) == e.y_t)
        .count();
    hits as f64 / examples.len() as f64
}
