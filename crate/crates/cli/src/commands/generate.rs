use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use speechjudge::corpus::{write_corpus, CorpusItem};
use speechjudge::seed;
use speechjudge::swd::{
    emit_edit_manifest, format_swd_example, load_transcripts, plan_corpus, write_manifest, LlmRewriter,
    SpanCountDistribution, SpanRewriter, SubstitutionPlanner,
};
use speechjudge::synth::{
    load_ab_demos, load_mos_demos, synth_ab_corpus, synth_mos_corpus, AbDemonstration, Demonstration,
    GenerationClient, HttpChatClient, OfflineClient, SynthError, SynthOptions, SynthStats,
};

use super::analyze::load_table;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GenTask {
    Mos,
    Ab,
    Swd,
}

impl GenTask {
    fn key(self) -> &'static str {
        match self {
            GenTask::Mos => "mos",
            GenTask::Ab => "ab",
            GenTask::Swd => "swd",
        }
    }
}

pub struct GenerateArgs<'a> {
    pub task: GenTask,
    pub n: Option<usize>,
    pub ratings: Option<&'a Path>,
    pub transcripts: Option<&'a Path>,
}

/// The configured generation client: the offline fallback adapter, or the
/// chat-completion endpoint.
pub fn client(cfg: &RunConfig) -> CliResult<Arc<dyn GenerationClient>> {
    if cfg.offline {
        return Ok(Arc::new(OfflineClient {
            gap: Some(cfg.generation.options.gap),
        }));
    }
    match &cfg.client {
        Some(c) => Ok(Arc::new(HttpChatClient::new(c.clone()))),
        None => Err(CliError::dependency(
            "no generation endpoint configured: set [client] or pass --offline",
        )),
    }
}

fn synth_error(e: SynthError) -> CliError {
    match e {
        SynthError::InvalidParams(m) => CliError::input("bad generation parameters", m),
        e @ SynthError::NotEnoughRecords { .. } => CliError::input("ratings table too small", e.to_string()),
        e @ (SynthError::CannotFormPairs(_) | SynthError::Quality { .. }) => CliError::quality(e.to_string()),
    }
}

#[derive(Serialize)]
struct SwdDrops<'a> {
    requested: usize,
    produced: usize,
    skipped: Vec<DropLine<'a>>,
}

#[derive(Serialize)]
struct DropLine<'a> {
    id: &'a str,
    reason: &'a str,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let text = serde_json::to_string_pretty(value).expect("plain data") + "\n";
    io::write_text(dir, name, &text)
}

fn write_items(cfg: &RunConfig, task: GenTask, items: &[CorpusItem]) -> CliResult<PathBuf> {
    let (path, w) = io::create(&cfg.out_dir, &format!("{}_corpus.jsonl", task.key()))?;
    write_corpus(w, items).map_err(|e| io::write_error(&path, e))?;
    Ok(path)
}

fn synth_options(cfg: &RunConfig, label: &str) -> SynthOptions {
    SynthOptions {
        seed: seed::derive(cfg.seed, label, 0),
        ..cfg.generation.options.clone()
    }
}

fn write_stats(cfg: &RunConfig, task: GenTask, stats: &SynthStats) -> CliResult<PathBuf> {
    write_json(&cfg.out_dir, &format!("{}_drops.json", task.key()), stats)
}

pub fn run(cfg: &RunConfig, args: &GenerateArgs<'_>) -> CliResult<Vec<PathBuf>> {
    match args.task {
        GenTask::Mos | GenTask::Ab => {
            let n = args.n.ok_or_else(|| CliError::usage("-n is required for mos and ab"))?;
            let records = load_table(cfg, args.ratings)?;
            let client = client(cfg)?;
            let params = &cfg.generation.params;
            let (items, stats) = if args.task == GenTask::Mos {
                let demos = match &cfg.paths.mos_demos {
                    Some(dir) => load_mos_demos(dir).map_err(|e| CliError::input("bad demonstrations", e.to_string()))?,
                    None => Demonstration::builtin(),
                };
                let out = synth_mos_corpus(&records, &demos, client.as_ref(), params, n, &synth_options(cfg, "generate-mos"))
                    .map_err(synth_error)?;
                (out.items.iter().map(CorpusItem::from).collect::<Vec<_>>(), out.stats)
            } else {
                let demos = match &cfg.paths.ab_demos {
                    Some(dir) => load_ab_demos(dir).map_err(|e| CliError::input("bad demonstrations", e.to_string()))?,
                    None => AbDemonstration::builtin(),
                };
                let out = synth_ab_corpus(&records, &demos, client.as_ref(), params, n, &synth_options(cfg, "generate-ab"))
                    .map_err(synth_error)?;
                (out.items.iter().map(CorpusItem::from).collect::<Vec<_>>(), out.stats)
            };
            log::info!(
                "{}: {} items, {} regenerations, {} dropped",
                args.task.key(),
                items.len(),
                stats.regenerations,
                stats.dropped()
            );
            Ok(vec![write_items(cfg, args.task, &items)?, write_stats(cfg, args.task, &stats)?])
        }
        GenTask::Swd => run_swd(cfg, args.n, args.transcripts),
    }
}

fn rewriters(cfg: &RunConfig) -> CliResult<Vec<Box<dyn SpanRewriter>>> {
    if cfg.swd.planners.is_empty() {
        return Err(CliError::input("bad config", "swd.planners is empty"));
    }
    if !cfg.offline {
        let client = client(cfg)?;
        return Ok(cfg
            .swd
            .planners
            .iter()
            .map(|id| {
                Box::new(LlmRewriter::new(id, client.clone(), cfg.swd.params.clone(), cfg.swd.retry.clone()))
                    as Box<dyn SpanRewriter>
            })
            .collect());
    }
    let base = match &cfg.paths.synonyms {
        Some(p) => SubstitutionPlanner::from_tsv("", io::open(p)?)
            .map_err(|e| CliError::input("bad substitution table", format!("{}: {e}", p.display())))?,
        None => SubstitutionPlanner::builtin(""),
    };
    Ok(cfg
        .swd
        .planners
        .iter()
        .map(|id| Box::new(base.with_id(id)) as Box<dyn SpanRewriter>)
        .collect())
}

fn run_swd(cfg: &RunConfig, n: Option<usize>, transcripts: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let path = transcripts
        .or(cfg.paths.transcripts.as_deref())
        .ok_or_else(|| CliError::usage("no transcripts: pass --transcripts or set paths.transcripts"))?;
    let mut utterances = load_transcripts(io::open(path)?)
        .map_err(|e| CliError::input("bad transcripts", format!("{}: {e}", path.display())))?;
    if let Some(n) = n {
        if n > utterances.len() {
            return Err(CliError::input(
                "transcripts file too small",
                format!("requested {n} utterances, file has {}", utterances.len()),
            ));
        }
        utterances.truncate(n);
    }
    if cfg.swd.editors.is_empty() {
        return Err(CliError::input("bad config", "swd.editors is empty"));
    }
    let dist = SpanCountDistribution::new(cfg.swd.span_probs).map_err(|e| CliError::input("bad config", e.to_string()))?;
    let owned = rewriters(cfg)?;
    let borrowed: Vec<&dyn SpanRewriter> = owned.iter().map(Box::as_ref).collect();
    let corpus = plan_corpus(&utterances, &borrowed, &dist, seed::derive(cfg.seed, "generate-swd", 0), cfg.swd.retry_cap)
        .map_err(|e| CliError::dependency(format!("span rewriting failed: {e}")))?;

    let audio = |id: &str| cfg.swd.audio_template.replace("{id}", id);
    let entries = emit_edit_manifest(&corpus.plans, &cfg.swd.editors, audio);
    let items: Vec<CorpusItem> = entries
        .iter()
        .map(|e| {
            let edited = cfg
                .swd
                .edited_audio_template
                .replace("{editor}", &e.editor_id)
                .replace("{id}", &e.utterance_id);
            format_swd_example(&e.plan, &edited).into()
        })
        .collect();
    log::info!("swd: {} plans, {} skipped", corpus.plans.len(), corpus.skipped.len());

    let corpus_path = write_items(cfg, GenTask::Swd, &items)?;
    let (manifest_path, w) = io::create(&cfg.out_dir, "swd_edit_manifest.jsonl")?;
    write_manifest(w, &entries).map_err(|e| io::write_error(&manifest_path, e))?;
    let drops = SwdDrops {
        requested: utterances.len(),
        produced: items.len(),
        skipped: corpus
            .skipped
            .iter()
            .map(|(id, reason)| DropLine { id, reason })
            .collect(),
    };
    let drops_path = write_json(&cfg.out_dir, "swd_drops.json", &drops)?;
    Ok(vec![corpus_path, manifest_path, drops_path])
}
