//! Synthetic-word-detection data factory: span planning, edit manifests for
//! external speech editors, and SWD example formatting and scoring.

mod example;
mod manifest;
mod plan;
mod rewrite;
mod transcripts;

pub use example::{
    format_swd_example, normalize_word, parse_predicted_words, random_guess_accuracy,
    simulate_random_guess, swd_accuracy, swd_item_score, swd_prompt, SwdExample,
};
pub use manifest::{emit_edit_manifest, read_manifest, write_manifest, ManifestEntry, ManifestError};
pub use plan::{
    plan_corpus, plan_from_proposal, plan_modification, ModificationPlan, PlanCorpus, PlanError,
    SpanCountDistribution, SPAN_COUNT_PROBS,
};
pub use rewrite::{LlmRewriter, RewriteError, SpanRewriter, SubstitutionPlanner};
pub use transcripts::{load_transcripts, Transcript, TranscriptError};
