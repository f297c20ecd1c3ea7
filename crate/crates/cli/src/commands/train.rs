use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;
use speechjudge::alld::toy::{render_output, ToyTask};
use speechjudge::alld::{
    build_preference_dataset, greedy, greedy_exact_match, load_checkpoint, pretrain_reference, read_preferences,
    save_checkpoint, train_alld, warmup_train, write_log, write_preferences, LogRecord, Side, TableScorer,
    TrainError, TrainingExample, Vocabulary,
};
use speechjudge::corpus::{read_corpus, write_corpus, write_jsonl, CorpusItem};
use speechjudge::eval::Prediction;
use speechjudge::seed;

use crate::config::RunConfig;
use crate::error::{Category, CliError, CliResult};
use crate::io;

pub const TOY_TASK: &str = "toy_task.json";
pub const REFERENCE_CKPT: &str = "reference.ckpt";
pub const WARMUP_CKPT: &str = "warmup.ckpt";
pub const ALLD_CKPT: &str = "alld.ckpt";

fn train_error(e: TrainError) -> CliError {
    match e {
        e @ TrainError::Divergence { .. } => CliError::new(Category::Divergence, "training diverged", e.to_string()),
        e @ (TrainError::Quality { .. } | TrainError::MarginNotIncreasing { .. }) => CliError::quality(e.to_string()),
        e @ TrainError::Loss(_) => CliError::new(Category::Divergence, "training diverged", e.to_string()),
        e @ (TrainError::Config(_) | TrainError::Empty(_)) => CliError::input("bad training input", e.to_string()),
        TrainError::Io(e) => CliError::input("i/o error", e.to_string()),
    }
}

fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("unix:{secs}")
}

fn toy_task(cfg: &RunConfig, corpus: Option<&Path>) -> CliResult<ToyTask> {
    let split_seed = seed::derive(cfg.seed, "toy-task", 0);
    let Some(path) = corpus.or(cfg.paths.toy_corpus.as_deref()) else {
        return Ok(ToyTask::random(cfg.toy.items, cfg.toy.heldout_fraction, split_seed));
    };
    let items = read_corpus(io::open(path)?).map_err(|e| CliError::input("bad corpus", format!("{}: {e}", path.display())))?;
    let scored: Vec<_> = items
        .into_iter()
        .filter_map(|item| match item {
            CorpusItem::Mos { id, meta, .. } => Some((id, meta)),
            _ => None,
        })
        .collect();
    if scored.len() < 10 {
        return Err(CliError::input(
            "bad corpus",
            format!("{}: need at least 10 MOS items, found {}", path.display(), scored.len()),
        ));
    }
    Ok(ToyTask::build(scored, cfg.toy.heldout_fraction, split_seed))
}

fn save(cfg: &RunConfig, name: &str, model: &TableScorer, vocab: &Vocabulary, phase: &str) -> CliResult<PathBuf> {
    let (path, w) = io::create(&cfg.out_dir, name)?;
    let meta = json!({"phase": phase, "seed": cfg.seed});
    save_checkpoint(w, model, vocab, meta).map_err(|e| io::write_error(&path, e))?;
    Ok(path)
}

fn load(path: &Path, vocab: &Vocabulary) -> CliResult<TableScorer> {
    let (model, header) =
        load_checkpoint(io::open(path)?).map_err(|e| CliError::input("bad checkpoint", format!("{}: {e}", path.display())))?;
    if &header.vocab != vocab {
        return Err(CliError::input(
            "bad checkpoint",
            format!("{}: vocabulary differs from the toy task", path.display()),
        ));
    }
    Ok(model)
}

fn write_training_log(cfg: &RunConfig, name: &str, records: &[LogRecord]) -> CliResult<PathBuf> {
    let (path, w) = io::create(&cfg.out_dir, name)?;
    write_log(w, &timestamp(), &cfg.trainer, records).map_err(|e| io::write_error(&path, e))?;
    Ok(path)
}

fn gold_item(task: &ToyTask, i: usize) -> CorpusItem {
    let item = &task.items[i];
    CorpusItem::Mos {
        id: item.example.id.clone(),
        meta: item.scores,
        response: render_output(&task.vocab, &item.example.y_t),
        label: item.scores.mos,
    }
}

#[derive(Debug, Serialize)]
struct WarmupSummary {
    items: usize,
    train_items: usize,
    heldout_items: usize,
    warmup_items: usize,
    reference_final_loss: f64,
    warmup_initial_loss: f64,
    warmup_final_loss: f64,
    reference_heldout_exact_match: f64,
    warmup_heldout_exact_match: f64,
}

pub fn warmup(cfg: &RunConfig, corpus: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let task = toy_task(cfg, corpus)?;
    let train = task.train_examples();
    let heldout = task.heldout_examples();
    let mut reference = TableScorer::zeros(task.shape());
    let ref_report = pretrain_reference(&mut reference, &train, &cfg.trainer).map_err(train_error)?;
    let mut policy = TableScorer::zeros(task.shape());
    let warm = warmup_train(&mut policy, &train, &cfg.trainer).map_err(train_error)?;

    let summary = WarmupSummary {
        items: task.items.len(),
        train_items: train.len(),
        heldout_items: heldout.len(),
        warmup_items: ((train.len() as f64) * cfg.trainer.warmup_fraction).floor() as usize,
        reference_final_loss: ref_report.final_loss,
        warmup_initial_loss: warm.initial_loss,
        warmup_final_loss: warm.final_loss,
        reference_heldout_exact_match: greedy_exact_match(&reference, &heldout, Side::Meta),
        warmup_heldout_exact_match: greedy_exact_match(&policy, &heldout, Side::Audio),
    };
    log::info!(
        "warm-up: loss {:.4} -> {:.4}, held-out exact match {:.3}",
        warm.initial_loss,
        warm.final_loss,
        summary.warmup_heldout_exact_match
    );

    let task_text = serde_json::to_string(&task).expect("plain data") + "\n";
    let mut out = vec![io::write_text(&cfg.out_dir, TOY_TASK, &task_text)?];
    out.push(save(cfg, REFERENCE_CKPT, &reference, &task.vocab, "reference")?);
    out.push(save(cfg, WARMUP_CKPT, &policy, &task.vocab, "warmup")?);
    let records: Vec<LogRecord> = ref_report.log.into_iter().chain(warm.log).collect();
    out.push(write_training_log(cfg, "warmup_log.jsonl", &records)?);
    let gold: Vec<CorpusItem> = task.heldout.iter().map(|&i| gold_item(&task, i)).collect();
    let (gold_path, w) = io::create(&cfg.out_dir, "heldout_gold.jsonl")?;
    write_corpus(w, &gold).map_err(|e| io::write_error(&gold_path, e))?;
    out.push(gold_path);
    out.push(io::write_text(
        &cfg.out_dir,
        "warmup_summary.toml",
        &toml::to_string(&summary).expect("plain data"),
    )?);
    Ok(out)
}

#[derive(Debug, Serialize)]
struct AlldSummary {
    pairs: usize,
    dropped_samples: usize,
    heldout_pairs: usize,
    initial_heldout_margin: f64,
    final_heldout_margin: f64,
    margin_curve: Vec<f64>,
    warmup_heldout_exact_match: f64,
    alld_heldout_exact_match: f64,
}

fn predictions(model: &TableScorer, vocab: &Vocabulary, examples: &[TrainingExample]) -> Vec<Prediction> {
    examples
        .iter()
        .map(|e| Prediction {
            id: e.id.clone(),
            response_text: render_output(vocab, &greedy(model, &e.x_a)),
        })
        .collect()
}

pub fn alld(cfg: &RunConfig, preferences: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let dir = &cfg.out_dir;
    let task_path = io::require(dir, TOY_TASK, "warmup")?;
    let reference_path = io::require(dir, REFERENCE_CKPT, "warmup")?;
    let warmup_path = io::require(dir, WARMUP_CKPT, "warmup")?;
    let task: ToyTask = serde_json::from_str(&io::read_text(&task_path)?)
        .map_err(|e| CliError::input("bad toy task", format!("{}: {e}", task_path.display())))?;
    let reference = load(&reference_path, &task.vocab)?;
    let mut policy = load(&warmup_path, &task.vocab)?;
    let train = task.train_examples();
    let heldout = task.heldout_examples();

    let mut out = Vec::new();
    let (pairs, dropped) = match preferences {
        Some(p) => {
            let pairs = read_preferences(io::open(p)?)
                .map_err(|e| CliError::input("bad preference dataset", format!("{}: {e}", p.display())))?;
            (pairs, 0)
        }
        None => {
            let build = build_preference_dataset(
                &policy,
                &train,
                &cfg.trainer.sampling,
                seed::derive(cfg.seed, "preferences", 0),
                cfg.trainer.max_drop_rate,
            )
            .map_err(train_error)?;
            let (path, w) = io::create(dir, "preferences.jsonl")?;
            write_preferences(w, &build.pairs, &task.vocab).map_err(|e| io::write_error(&path, e))?;
            out.push(path);
            (build.pairs, build.dropped.len())
        }
    };

    let baseline = greedy_exact_match(&policy, &heldout, Side::Audio);
    let report = train_alld(&mut policy, &reference, &pairs, &cfg.trainer).map_err(train_error)?;
    let summary = AlldSummary {
        pairs: pairs.len(),
        dropped_samples: dropped,
        heldout_pairs: report.heldout_ids.len(),
        initial_heldout_margin: report.initial_margin(),
        final_heldout_margin: report.final_margin(),
        margin_curve: report.margin_curve.clone(),
        warmup_heldout_exact_match: baseline,
        alld_heldout_exact_match: greedy_exact_match(&policy, &heldout, Side::Audio),
    };
    log::info!(
        "alld: margin {:.4} -> {:.4}, held-out exact match {:.3} -> {:.3}",
        summary.initial_heldout_margin,
        summary.final_heldout_margin,
        summary.warmup_heldout_exact_match,
        summary.alld_heldout_exact_match
    );

    out.push(save(cfg, ALLD_CKPT, &policy, &task.vocab, "alld")?);
    out.push(write_training_log(cfg, "alld_log.jsonl", &report.log)?);
    let (pred_path, w) = io::create(dir, "predictions.jsonl")?;
    write_jsonl(w, &predictions(&policy, &task.vocab, &heldout)).map_err(|e| io::write_error(&pred_path, e))?;
    out.push(pred_path);
    out.push(io::write_text(dir, "alld_summary.toml", &toml::to_string(&summary).expect("plain data"))?);
    Ok(out)
}
