use std::path::{Path, PathBuf};

use speechjudge::corpus::{read_corpus, write_jsonl};
use speechjudge::eval::{evaluate_corpus, EvalError, EvalOptions, Judge, Task};

use super::generate::client;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io;

pub fn run(cfg: &RunConfig, task: Task, predictions: &Path, gold: &Path, judge: bool) -> CliResult<Vec<PathBuf>> {
    let gold_items = read_corpus(io::open(gold)?).map_err(|e| CliError::input("bad gold corpus", format!("{}: {e}", gold.display())))?;
    let predictions = io::read_text(predictions)?;
    let use_judge = (judge || cfg.eval.judge) && task == Task::Ab;
    if use_judge && cfg.offline {
        return Err(CliError::dependency("the A/B judge needs a generation endpoint; offline mode is set"));
    }
    let judge_client = if use_judge { Some(client(cfg)?) } else { None };
    let judge = judge_client.as_deref().map(|c| Judge {
        client: c,
        params: cfg.eval.judge_params.clone(),
        retry: cfg.eval.judge_retry.clone(),
    });
    let options = EvalOptions { bleu: cfg.eval.bleu };
    let evaluation = evaluate_corpus(&predictions, &gold_items, task, judge.as_ref(), &options).map_err(|e| match e {
        EvalError::EmptyGold => CliError::input("bad gold corpus", e.to_string()),
        e => CliError::input("predictions do not match gold", e.to_string()),
    })?;
    let m = &evaluation.metrics;
    log::info!(
        "{}: {} items, {} parse failures, {} judge calls",
        task.as_str(),
        m.n_items,
        m.n_parse_failures,
        m.judge_calls
    );
    let report = io::write_text(&cfg.out_dir, &format!("{}_report.toml", task.as_str()), &evaluation.to_text())?;
    let (items_path, w) = io::create(&cfg.out_dir, &format!("{}_items.jsonl", task.as_str()))?;
    write_jsonl(w, &evaluation.items).map_err(|e| io::write_error(&items_path, e))?;
    Ok(vec![report, items_path])
}
