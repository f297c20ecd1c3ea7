//! Pulling numeric MOS values and A/B verdicts out of free text.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::synth::{build_judge_prompt, generate, AbChoice, GenParams, GenerationClient, RetryPolicy};

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());

/// The last decimal number in `[1, 5]` appearing in `text`.
///
/// Numbers outside the scale are skipped. `None` means the text states no
/// usable score; callers must count it as a failure, never impute one.
pub fn extract_mos(text: &str) -> Option<f64> {
    NUMBER
        .find_iter(text)
        .filter_map(|m| m.as_str().parse::<f64>().ok())
        .filter(|v| (1.0..=5.0).contains(v))
        .last()
}

const SIDE: &str = r"\[?speech\s?([ab])\]?";

static VERDICTS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        format!(r"(?i)\bprefer(?:s|red|ence)?\b(?:\s+(?:is|goes\s+to|for))?\s+{SIDE}"),
        format!(r"(?i){SIDE}\s+(?:is|sounds|would\s+be|wins)\s+(?:clearly\s+|slightly\s+|much\s+|therefore\s+)?(?:better|preferred|superior|the\s+winner|the\s+better)"),
        format!(r"(?i)\b(?:winner|better\s+one|better\s+sample|better\s+speech)\s+is\s+{SIDE}"),
        format!(r"(?i)\b(?:choose|select|pick)\s+{SIDE}"),
    ]
    .iter()
    .map(|p| Regex::new(p).unwrap())
    .collect()
});

static TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[Speech([AB])\]").unwrap());

fn side(letter: &str) -> AbChoice {
    if letter.eq_ignore_ascii_case("a") {
        AbChoice::A
    } else {
        AbChoice::B
    }
}

fn unanimous(mut sides: impl Iterator<Item = AbChoice>) -> Option<Option<AbChoice>> {
    let first = sides.next()?;
    Some(sides.all(|s| s == first).then_some(first))
}

/// Rule-based verdict extraction.
///
/// Verdict phrases ("my preference is [SpeechA]", "SpeechB is better") decide
/// when they agree. Without any verdict phrase, a lone kind of bracketed
/// `[SpeechX]` token decides. Everything else is ambiguous.
pub fn extract_ab_rule(text: &str) -> Option<AbChoice> {
    let phrases = VERDICTS
        .iter()
        .flat_map(|re| re.captures_iter(text).map(|c| side(&c[1])))
        .collect::<Vec<_>>();
    if let Some(decision) = unanimous(phrases.into_iter()) {
        return decision;
    }
    let tokens = TOKEN.captures_iter(text).map(|c| side(&c[1])).collect::<Vec<_>>();
    unanimous(tokens.into_iter()).flatten()
}

/// Which stage produced an A/B verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionStage {
    Rule,
    Judge,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbExtraction {
    pub choice: Option<AbChoice>,
    pub stage: ExtractionStage,
    pub judge_called: bool,
}

/// A judge service for the second extraction stage.
pub struct Judge<'a> {
    pub client: &'a dyn GenerationClient,
    pub params: GenParams,
    pub retry: RetryPolicy,
}

/// Two-stage verdict extraction: rules first, then the judge prompt when a
/// judge is configured. Ambiguity in both stages is a parse failure.
pub fn extract_ab_choice(response: &str, judge: Option<&Judge<'_>>) -> AbExtraction {
    if let Some(choice) = extract_ab_rule(response) {
        return AbExtraction {
            choice: Some(choice),
            stage: ExtractionStage::Rule,
            judge_called: false,
        };
    }
    let Some(judge) = judge else {
        return AbExtraction {
            choice: None,
            stage: ExtractionStage::Failed,
            judge_called: false,
        };
    };
    let answer = generate(
        &build_judge_prompt(response),
        judge.client,
        &judge.params,
        &judge.retry,
    );
    let choice = answer.ok().and_then(|a| parse_judge_answer(&a));
    AbExtraction {
        choice,
        stage: if choice.is_some() {
            ExtractionStage::Judge
        } else {
            ExtractionStage::Failed
        },
        judge_called: true,
    }
}

/// The judge is asked for exactly one token; accept it with or without brackets.
pub fn parse_judge_answer(answer: &str) -> Option<AbChoice> {
    static BARE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bspeech\s?([ab])\b").unwrap());
    let sides: Vec<AbChoice> = BARE.captures_iter(answer).map(|c| side(&c[1])).collect();
    unanimous(sides.into_iter()).flatten()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::client::ScriptedClient;

    #[test]
    fn mos_extraction() {
        assert_eq!(extract_mos("Taking into account all factors, the overall MOS score is only 2.4."), Some(2.4));
        assert_eq!(extract_mos("score is 3, maybe 3.5 overall"), Some(3.5));
        assert_eq!(extract_mos("no numeric content"), None);
        assert_eq!(extract_mos("rated 4.2 out of 10"), Some(4.2));
        assert_eq!(extract_mos("between 0.5 and 7"), None);
        assert_eq!(extract_mos("final: 5."), Some(5.0));
    }

    #[test]
    fn rule_stage() {
        assert_eq!(extract_ab_rule("SpeechB is noisier, therefore [SpeechA] is preferred"), Some(AbChoice::A));
        assert_eq!(extract_ab_rule("so my preference is [SpeechB]."), Some(AbChoice::B));
        assert_eq!(extract_ab_rule("[SpeechB]"), Some(AbChoice::B));
        assert_eq!(extract_ab_rule("SpeechA is better than SpeechB"), Some(AbChoice::A));
        assert_eq!(extract_ab_rule("[SpeechA] has less noise, [SpeechB] is louder."), None);
        assert_eq!(extract_ab_rule("I prefer SpeechA, though SpeechB is better in loudness"), None);
        assert_eq!(extract_ab_rule("no verdict here"), None);
    }

    #[test]
    fn ambiguous_without_judge_fails() {
        let out = extract_ab_choice("[SpeechA] is quiet while [SpeechB] is noisy.", None);
        assert_eq!(out.choice, None);
        assert_eq!(out.stage, ExtractionStage::Failed);
        assert!(!out.judge_called);
    }

    #[test]
    fn judge_stage_resolves_ambiguity() {
        let client = ScriptedClient::new(vec![Ok("[SpeechB]".into())]);
        let judge = Judge { client: &client, params: GenParams::default(), retry: RetryPolicy::no_delay(1) };
        let out = extract_ab_choice("[SpeechA] is quiet while [SpeechB] is noisy.", Some(&judge));
        assert_eq!(out.choice, Some(AbChoice::B));
        assert_eq!(out.stage, ExtractionStage::Judge);
        let seen = client.seen.lock().unwrap();
        assert!(seen[0].user.ends_with("Only output '[SpeechA]' or '[SpeechB]', do not give any analysis."));
    }

    #[test]
    fn judge_not_called_when_rules_decide() {
        let client = ScriptedClient::new(vec![]);
        let judge = Judge { client: &client, params: GenParams::default(), retry: RetryPolicy::no_delay(1) };
        let out = extract_ab_choice("my preference is [SpeechA]", Some(&judge));
        assert_eq!(out.stage, ExtractionStage::Rule);
        assert_eq!(client.calls.load(std::sync::atomic::Ordering::SeqCst), 0);
    }

    #[test]
    fn judge_answer_parsing() {
        assert_eq!(parse_judge_answer("[SpeechA]"), Some(AbChoice::A));
        assert_eq!(parse_judge_answer("SpeechB"), Some(AbChoice::B));
        assert_eq!(parse_judge_answer("[SpeechA] or [SpeechB]"), None);
        assert_eq!(parse_judge_answer("neither"), None);
    }
}
