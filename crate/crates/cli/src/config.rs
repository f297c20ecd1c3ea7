//! Run configuration: one TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use speechjudge::alld::TrainerConfig;
use speechjudge::eval::BleuConfig;
use speechjudge::swd::SPAN_COUNT_PROBS;
use speechjudge::synth::{GenParams, HttpClientConfig, RetryPolicy, SynthOptions};
use speechjudge::ColumnMap;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub ratings: Option<PathBuf>,
    pub transcripts: Option<PathBuf>,
    /// Directory of `*.txt` MOS demonstrations; built-ins when unset.
    pub mos_demos: Option<PathBuf>,
    pub ab_demos: Option<PathBuf>,
    /// `word<TAB>replacement` table for offline SWD planning.
    pub synonyms: Option<PathBuf>,
    /// MOS corpus whose meta tuples seed the toy task.
    pub toy_corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    #[serde(flatten)]
    pub options: SynthOptions,
    pub params: GenParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwdConfig {
    pub span_probs: [f64; 3],
    /// Rewriter ids, assigned round-robin over utterances.
    pub planners: Vec<String>,
    /// Speech-editing tools, assigned round-robin over plans.
    pub editors: Vec<String>,
    /// Re-plans allowed after a rejected proposal.
    pub retry_cap: u32,
    /// `{id}` expands to the utterance id.
    pub audio_template: String,
    /// `{editor}` and `{id}` expand to the editor and utterance ids.
    pub edited_audio_template: String,
    pub params: GenParams,
    pub retry: RetryPolicy,
}

impl Default for SwdConfig {
    fn default() -> Self {
        Self {
            span_probs: SPAN_COUNT_PROBS,
            planners: vec!["planner-1".into(), "planner-2".into()],
            editors: vec!["editor-1".into(), "editor-2".into(), "editor-3".into()],
            retry_cap: 3,
            audio_template: "audio/{id}.wav".into(),
            edited_audio_template: "edited/{editor}/{id}.wav".into(),
            params: GenParams::default(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    /// Items drawn when no toy corpus is given.
    pub items: usize,
    pub heldout_fraction: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            items: 1000,
            heldout_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub bleu: BleuConfig,
    /// Send ambiguous A/B responses to the judge prompt.
    pub judge: bool,
    pub judge_params: GenParams,
    pub judge_retry: RetryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// No network operation is attempted when set.
    pub offline: bool,
    pub out_dir: PathBuf,
    pub paths: Paths,
    pub columns: ColumnMap,
    /// Chat-completion endpoint; required unless offline.
    pub client: Option<HttpClientConfig>,
    pub generation: GenerationConfig,
    pub swd: SwdConfig,
    pub toy: ToyConfig,
    pub trainer: TrainerConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            offline: false,
            out_dir: PathBuf::from("out"),
            paths: Paths::default(),
            columns: ColumnMap::default(),
            client: None,
            generation: GenerationConfig::default(),
            swd: SwdConfig::default(),
            toy: ToyConfig::default(),
            trainer: TrainerConfig::toy(),
            eval: EvalConfig::default(),
        }
    }
}

/// Global flags that override config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub offline: bool,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::input("bad config", e.to_string()))
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => Self::parse(&crate::io::read_text(p)?)?,
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        cfg.offline |= overrides.offline;
        if let Some(dir) = &overrides.out_dir {
            cfg.out_dir = dir.clone();
        }
        cfg.trainer.seed = cfg.seed;
        Ok(cfg)
    }
}
