//! Metric suite: MOS extraction with LCC/SRCC/MSE, BLEU, A/B verdict
//! extraction and accuracy, and corpus-level evaluation.

mod bleu;
mod evaluate;
mod extract;
mod metrics;

pub use bleu::{bleu, bleu_stats, corpus_bleu, tokenize, BleuConfig, BleuLevel, BleuStats, Smoothing};
pub use evaluate::{
    evaluate_corpus, EvalError, EvalOptions, Evaluation, Failure, ItemDiagnostic, MetricReport,
    Prediction, ReportConfig, Task,
};
pub use extract::{
    extract_ab_choice, extract_ab_rule, extract_mos, parse_judge_answer, AbExtraction,
    ExtractionStage, Judge,
};
pub use metrics::{ab_accuracy, mse, MetricError};
