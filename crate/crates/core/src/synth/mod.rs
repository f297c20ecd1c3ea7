//! Prompt construction and corpus synthesis for MOS descriptions and A/B comparisons.

pub mod client;
mod demos;
mod fallback;
mod prompts;
mod synthesize;

pub use client::{
    forbid_network, generate, ChatRequest, ClientError, GenParams, GenerationClient,
    HttpChatClient, HttpClientConfig, OfflineClient, RetryPolicy,
};
pub use demos::{load_ab_demos, load_mos_demos, AbDemonstration, DemoError, Demonstration};
pub use fallback::{
    render_fallback_comparison, render_fallback_description, rubric_band, select_contrast_aspects,
    weakest_dimension, winner, AbChoice, DescriptiveEvaluation,
};
pub use prompts::{
    build_ab_prompt, build_judge_prompt, build_mos_prompt, fmt_score, fmt_tuple, parse_ab_query,
    parse_mos_query, JUDGE_INSTRUCTION,
};
pub use synthesize::{
    synth_ab_corpus, synth_mos_corpus, AbComparison, DropRecord, SynthError, SynthOptions,
    SynthOutput, SynthStats, MOS_TOLERANCE,
};

/// Default score gap for an "obvious" contrast between two samples.
pub const DEFAULT_GAP: f64 = 0.5;
