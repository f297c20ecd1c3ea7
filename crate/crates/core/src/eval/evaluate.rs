//! Corpus-level scoring of model predictions against a gold corpus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusItem;
use crate::meta_corpus::{pearson, spearman};
use crate::swd::{parse_predicted_words, swd_item_score};
use crate::synth::AbChoice;

use super::bleu::{corpus_bleu, BleuConfig};
use super::extract::{extract_ab_choice, extract_mos, ExtractionStage, Judge};
use super::metrics::{ab_accuracy, mse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Mos,
    Ab,
    Swd,
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mos" => Ok(Task::Mos),
            "ab" => Ok(Task::Ab),
            "swd" => Ok(Task::Swd),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Mos => "mos",
            Task::Ab => "ab",
            Task::Swd => "swd",
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions do not align with gold corpus; missing ids: {missing:?}; unexpected ids: {unexpected:?}")]
    Alignment {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
    #[error("gold item `{id}` is a {found} item, expected {expected}")]
    WrongTask {
        id: String,
        found: &'static str,
        expected: &'static str,
    },
    #[error("gold corpus is empty")]
    EmptyGold,
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub response_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDiagnostic {
    pub id: String,
    pub parsed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_mos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_mos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_choice: Option<AbChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_choice: Option<AbChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<ExtractionStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ItemDiagnostic {
    fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            parsed: false,
            predicted_mos: None,
            gold_mos: None,
            predicted_choice: None,
            gold_choice: None,
            stage: None,
            correct: None,
            failure: None,
        }
    }
}

/// Metric bundle. Correlations, MSE and BLEU are computed over parsed items
/// only; accuracy counts parse failures as wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: Task,
    pub n_items: usize,
    pub n_parse_failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lcc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub srcc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub judge_calls: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub bleu: BleuConfig,
    pub mos_extraction: String,
    pub ab_extraction: String,
    pub swd_matching: String,
    pub alignment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub reason: String,
}

/// The structured report document: metric block, config block, failure list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: MetricReport,
    pub config: ReportConfig,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub items: Vec<ItemDiagnostic>,
}

impl Evaluation {
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("report is plain data")
    }

    pub fn from_text(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub bleu: BleuConfig,
}

enum Line {
    Ok(Prediction),
    Malformed(String),
}

fn parse_lines(predictions: &str) -> Vec<Line> {
    predictions
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| match serde_json::from_str::<Prediction>(l) {
            Ok(p) => Line::Ok(p),
            Err(e) => Line::Malformed(e.to_string()),
        })
        .collect()
}

fn check_alignment(lines: &[Line], gold: &[CorpusItem]) -> Result<(), EvalError> {
    let mut missing = Vec::new();
    let mut unexpected = Vec::new();
    for (i, g) in gold.iter().enumerate() {
        match lines.get(i) {
            None => missing.push(g.id().to_string()),
            Some(Line::Ok(p)) if p.id != g.id() => {
                missing.push(g.id().to_string());
                unexpected.push(p.id.clone());
            }
            _ => {}
        }
    }
    for line in lines.iter().skip(gold.len()) {
        if let Line::Ok(p) = line {
            unexpected.push(p.id.clone());
        } else {
            unexpected.push("<malformed>".into());
        }
    }
    if missing.is_empty() && unexpected.is_empty() {
        Ok(())
    } else {
        Err(EvalError::Alignment {
            missing,
            unexpected,
        })
    }
}

/// Score a predictions file (one `{id, response_text}` JSON object per line)
/// against `gold`.
///
/// Lines align with gold items by position and must carry the same id. A line
/// that is not valid JSON is a parse failure for its gold item, not an error.
pub fn evaluate_corpus(
    predictions: &str,
    gold: &[CorpusItem],
    task: Task,
    judge: Option<&Judge<'_>>,
    options: &EvalOptions,
) -> Result<Evaluation, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    for g in gold {
        if g.kind() != task.as_str() {
            return Err(EvalError::WrongTask {
                id: g.id().to_string(),
                found: g.kind(),
                expected: task.as_str(),
            });
        }
    }
    let lines = parse_lines(predictions);
    check_alignment(&lines, gold)?;

    let mut items = Vec::with_capacity(gold.len());
    let mut notes = Vec::new();
    let mut judge_calls = 0;
    // (candidate text, gold reference) of parsed items for BLEU
    let mut texts: Vec<(String, String)> = Vec::new();
    let mut mos_pairs: Vec<(f64, f64)> = Vec::new();
    let mut choices: Vec<(Option<AbChoice>, AbChoice)> = Vec::new();
    let mut swd_scores: Vec<f64> = Vec::new();

    for (line, g) in lines.iter().zip(gold) {
        let mut diag = ItemDiagnostic::new(g.id());
        let text = match line {
            Line::Ok(p) => Some(p.response_text.as_str()),
            Line::Malformed(reason) => {
                diag.failure = Some(format!("malformed prediction line: {reason}"));
                None
            }
        };
        match g {
            CorpusItem::Mos { label, .. } => {
                diag.gold_mos = Some(*label);
                if let Some(text) = text {
                    diag.predicted_mos = extract_mos(text);
                    match diag.predicted_mos {
                        Some(p) => {
                            diag.parsed = true;
                            mos_pairs.push((p, *label));
                        }
                        None => diag.failure = Some("no in-range mos in response".into()),
                    }
                }
            }
            CorpusItem::Ab { label, .. } => {
                diag.gold_choice = Some(*label);
                let mut extracted = None;
                if let Some(text) = text {
                    let ex = extract_ab_choice(text, judge);
                    judge_calls += usize::from(ex.judge_called);
                    diag.stage = Some(ex.stage);
                    extracted = ex.choice;
                    if extracted.is_some() {
                        diag.parsed = true;
                    } else {
                        diag.failure = Some("no unambiguous verdict".into());
                    }
                }
                diag.predicted_choice = extracted;
                diag.correct = Some(extracted == Some(*label));
                choices.push((extracted, *label));
            }
            CorpusItem::Swd { gold_words, .. } => {
                let score = match text {
                    Some(t) => {
                        diag.parsed = true;
                        swd_item_score(&parse_predicted_words(t), gold_words)
                    }
                    None => 0.0,
                };
                diag.correct = Some(score == 1.0);
                swd_scores.push(score);
            }
        }
        if diag.parsed {
            if let Some(t) = text {
                texts.push((t.to_string(), g.reference_text()));
            }
        }
        items.push(diag);
    }

    let n_parse_failures = items.iter().filter(|d| !d.parsed).count();
    let mut report = MetricReport {
        task,
        n_items: gold.len(),
        n_parse_failures,
        lcc: None,
        srcc: None,
        mse: None,
        bleu: None,
        accuracy: None,
        judge_calls,
        notes: Vec::new(),
    };

    if task != Task::Swd {
        let usable: Vec<(&str, Vec<&str>)> = texts
            .iter()
            .filter(|(c, r)| !c.trim().is_empty() && !r.trim().is_empty())
            .map(|(c, r)| (c.as_str(), vec![r.as_str()]))
            .collect();
        match corpus_bleu(&usable, &options.bleu) {
            Ok(b) => report.bleu = Some(b),
            Err(e) => notes.push(format!("bleu undefined: {e}")),
        }
    }

    match task {
        Task::Mos => {
            let pred: Vec<f64> = mos_pairs.iter().map(|p| p.0).collect();
            let gold_mos: Vec<f64> = mos_pairs.iter().map(|p| p.1).collect();
            report.mse = mse(&pred, &gold_mos).ok();
            match pearson(&pred, &gold_mos) {
                Ok(r) => report.lcc = Some(r),
                Err(e) => notes.push(format!("lcc undefined: {e}")),
            }
            match spearman(&pred, &gold_mos) {
                Ok(r) => report.srcc = Some(r),
                Err(e) => notes.push(format!("srcc undefined: {e}")),
            }
        }
        Task::Ab => {
            let (ex, g): (Vec<_>, Vec<_>) = choices.into_iter().unzip();
            report.accuracy = ab_accuracy(&ex, &g).ok();
        }
        Task::Swd => {
            report.accuracy = Some(swd_scores.iter().sum::<f64>() / swd_scores.len() as f64);
        }
    }
    report.notes = notes;

    let failures = items
        .iter()
        .filter_map(|d| {
            d.failure.as_ref().map(|reason| Failure {
                id: d.id.clone(),
                reason: reason.clone(),
            })
        })
        .collect();

    Ok(Evaluation {
        metrics: report,
        config: ReportConfig {
            bleu: options.bleu,
            mos_extraction: "last decimal number in [1,5]".into(),
            ab_extraction: if judge.is_some() {
                "rule-based, then judge prompt".into()
            } else {
                "rule-based only".into()
            },
            swd_matching: "exact set match, case-folded, edge punctuation stripped".into(),
            alignment: "by line position, ids must match".into(),
        },
        failures,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta_corpus::ScoreTuple;

    fn mos_gold() -> Vec<CorpusItem> {
        [(1.5, "a"), (2.4, "b"), (3.9, "c"), (4.6, "d")]
            .iter()
            .map(|&(m, id)| CorpusItem::Mos {
                id: id.into(),
                meta: ScoreTuple::new(m, 3.0, 3.0, 3.0, 3.0),
                response: format!("The voice is fine. The overall MOS score is {m}."),
                label: m,
            })
            .collect()
    }

    fn preds_from(gold: &[CorpusItem]) -> String {
        gold.iter()
            .map(|g| {
                serde_json::to_string(&Prediction {
                    id: g.id().into(),
                    response_text: g.reference_text(),
                })
                .unwrap()
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn gold_against_gold_is_perfect() {
        let gold = mos_gold();
        let ev = evaluate_corpus(&preds_from(&gold), &gold, Task::Mos, None, &EvalOptions::default()).unwrap();
        let m = &ev.metrics;
        assert_eq!(m.n_parse_failures, 0);
        assert_eq!(m.mse, Some(0.0));
        assert_eq!(m.bleu, Some(1.0));
        assert!((m.lcc.unwrap() - 1.0).abs() < 1e-12);
        assert!((m.srcc.unwrap() - 1.0).abs() < 1e-12);
        let parsed = Evaluation::from_text(&ev.to_text()).unwrap();
        assert_eq!(parsed.metrics, ev.metrics);
    }

    #[test]
    fn constant_labels_guard_lcc() {
        let gold: Vec<CorpusItem> = (0..3)
            .map(|i| CorpusItem::Mos {
                id: format!("x{i}"),
                meta: ScoreTuple::new(3.0, 3.0, 3.0, 3.0, 3.0),
                response: "the overall MOS score is 3.0".into(),
                label: 3.0,
            })
            .collect();
        let ev = evaluate_corpus(&preds_from(&gold), &gold, Task::Mos, None, &EvalOptions::default()).unwrap();
        assert_eq!(ev.metrics.lcc, None);
        assert_eq!(ev.metrics.mse, Some(0.0));
        assert!(ev.metrics.notes.iter().any(|n| n.contains("lcc undefined")));
    }

    #[test]
    fn shuffled_ids_fail_alignment() {
        let gold = mos_gold();
        let mut lines: Vec<String> = preds_from(&gold).lines().map(str::to_string).collect();
        lines.swap(0, 2);
        let err = evaluate_corpus(&lines.join("\n"), &gold, Task::Mos, None, &EvalOptions::default()).unwrap_err();
        match err {
            EvalError::Alignment { missing, .. } => assert_eq!(missing, vec!["a", "c"]),
            other => panic!("unexpected {other}"),
        }
        let short: Vec<_> = lines[..2].to_vec();
        assert!(evaluate_corpus(&short.join("\n"), &gold, Task::Mos, None, &EvalOptions::default()).is_err());
    }

    #[test]
    fn malformed_line_is_a_parse_failure() {
        let gold = mos_gold();
        let mut lines: Vec<String> = preds_from(&gold).lines().map(str::to_string).collect();
        lines[1] = "{not json".into();
        let ev = evaluate_corpus(&lines.join("\n"), &gold, Task::Mos, None, &EvalOptions::default()).unwrap();
        assert_eq!(ev.metrics.n_parse_failures, 1);
        assert_eq!(ev.failures.len(), 1);
        assert_eq!(ev.failures[0].id, "b");
        assert_eq!(ev.metrics.mse, Some(0.0));
    }

    #[test]
    fn ab_accuracy_counts_failures_as_wrong() {
        let gold: Vec<CorpusItem> = [AbChoice::A, AbChoice::B, AbChoice::A, AbChoice::B]
            .iter()
            .enumerate()
            .map(|(i, &label)| CorpusItem::Ab {
                id: format!("p{i}"),
                ids: [format!("a{i}"), format!("b{i}")],
                meta: [ScoreTuple::new(3.0, 3.0, 3.0, 3.0, 3.0); 2],
                contrast_aspects: vec![],
                response: format!("so my preference is {}.", label.token()),
                label,
            })
            .collect();
        let responses = [
            "so my preference is [SpeechA].",
            "so my preference is [SpeechA].",
            "[SpeechA] and [SpeechB] both exist",
            "so my preference is [SpeechB].",
        ];
        let preds: Vec<String> = responses
            .iter()
            .enumerate()
            .map(|(i, r)| serde_json::to_string(&Prediction { id: format!("p{i}"), response_text: r.to_string() }).unwrap())
            .collect();
        let ev = evaluate_corpus(&preds.join("\n"), &gold, Task::Ab, None, &EvalOptions::default()).unwrap();
        assert_eq!(ev.metrics.accuracy, Some(0.5));
        assert_eq!(ev.metrics.n_parse_failures, 1);
        assert_eq!(ev.metrics.judge_calls, 0);
    }

    #[test]
    fn wrong_task_rejected() {
        let gold = mos_gold();
        assert!(matches!(
            evaluate_corpus(&preds_from(&gold), &gold, Task::Ab, None, &EvalOptions::default()),
            Err(EvalError::WrongTask { .. })
        ));
    }
}
