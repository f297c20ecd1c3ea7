//! Preference distillation from a text-conditioned expert into a policy that
//! reads a different serialization of the same information.
//!
//! Policy terms condition on the audio-side context `x_a`, reference terms on
//! the meta-text context `x_t`.

mod checkpoint;
mod data;
mod loss;
mod optim;
mod scorer;
mod table;
pub mod toy;
mod train;
mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CheckpointHeader, CHECKPOINT_VERSION};
pub use data::{read_preferences, write_preferences, DatasetError, PreferencePair, TrainingExample};
pub use loss::{
    alld_loss, alld_loss_from_logprobs, alld_loss_grad, sft_loss, sft_loss_grad, sigmoid, softplus, LossError,
    LossReport, Reduction, SequenceLogProbs,
};
pub use optim::{Optimizer, OptimizerKind};
pub use scorer::{greedy, sample, Frozen, Gradient, ScoreError, Scorer, Trainable};
pub use table::{TableScorer, TableShape};
pub use train::{
    alld_grad_step, build_preference_dataset, greedy_exact_match, mean_margin, mean_sft_loss, pretrain_reference, sft_train, train_alld,
    warmup_subset, warmup_train, write_log, AlldReport, LogRecord, PreferenceBuild, SftOptions, SftReport, Side,
    StepReport, TrainError, TrainerConfig,
};
pub use vocab::{Token, VocabError, Vocabulary};
