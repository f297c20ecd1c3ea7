//! Toolkit for natural-language speech-quality evaluation corpora.
//!
//! The crate is split along the pipeline:
//!
//! - [`meta_corpus`]: loading multidimensional rating tables and correlation analysis.
//! - [`synth`]: prompt construction, generation clients and MOS / A/B corpus synthesis.
//! - [`swd`]: synthetic-word-detection planning, edit manifests and scoring.
//! - [`alld`]: warm-up SFT, one-shot preference sampling and the distillation loss
//!   over an abstract autoregressive scorer, plus a desk-scale toy model.
//! - [`eval`]: MOS extraction, LCC/SRCC/MSE, BLEU and A/B verdict extraction.

pub mod alld;
pub mod corpus;
pub mod eval;
pub mod meta_corpus;
pub mod seed;
pub mod swd;
pub mod synth;

pub use meta_corpus::{
    correlation_report, load_ratings, pearson, spearman, ColumnMap, CorrelationReport, Dimension,
    RatingRecord, ScoreTuple, SplitTag,
};

/// Version tag written into every line-delimited JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
