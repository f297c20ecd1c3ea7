//! Prompt templates for description and comparison generation, plus the
//! judge prompt used for A/B verdict extraction.

use std::sync::LazyLock;

use regex::Regex;

use crate::meta_corpus::ScoreTuple;

use super::demos::{AbDemonstration, Demonstration};

const INTRO: &str = "I will give you a tuple of meta information for speech quality evaluation, it contains 5 factors are rating from 1 to 5. For all these factors, higher is better.";

const FACTORS: [&str; 5] = [
    "(1) mos: the overall quality. 1 is very bad, 2 is poor, 3 is fair, 4 is good, 5 is excellent.",
    "(2) noi: the level of noise in the audio, reflecting the impact of background noise or other non-speech interference on audio quality. 1 is very noisy, 2 is somewhat noisy, 3 is neither noisy nor clean, 4 is somewhat clean, and 5 is completely clean.",
    "(3) col: the alterations in the natural sound of speech caused by distortions or unwanted modifications. 1 is severely distorted, 2 is significantly distorted, 3 is moderately distorted, 4 is slightly distorted, and 5 is no distortion.",
    "(4) dis: the discontinuity in the audio, reflecting whether there are breaks, stutters, or incoherence during playback. 1 is severely discontinuous, 2 is significantly discontinuous, 3 is moderately discontinuous, 4 is slightly discontinuous, and 5 is no discontinuity.",
    "(5) loud: the perceived volume or loudness of the audio. 1 is extremely quiet, 2 is significantly quiet, 3 is soft but understandable, 4 is clearly loud, and 5 is perfectly loud.",
];

const MOS_TASK: &str = "I need you to generate a descriptive evaluation for this speech, including a description according to the score from (2) to (5), analyze how they influence the overall quality, and add the mos in the end.";

pub(crate) const AB_TASK: &str = "I need you to perform A/B test according to their mos (mos higher means winner. You can flexibly select 1~3 aspects from (2)~(5) with an obvious gap (usually score difference more than 0.5), then compare them according to these distinctions. Finally, please give your preference with a reasonable analysis.";

const MOS_CLOSING: &str = "Please only output the evaluation:";
const AB_CLOSING: &str = "Please only output the comparison:";

pub const JUDGE_INSTRUCTION: &str = "According to the context, please judge if SpeechA is better or SpeechB is better. Only output '[SpeechA]' or '[SpeechB]', do not give any analysis.";

/// Score formatting used in prompts and generated text.
///
/// Integral values keep one decimal (`5.0`); everything else uses the shortest
/// representation that parses back to the identical `f64`.
pub fn fmt_score(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

pub fn fmt_tuple(t: &ScoreTuple) -> String {
    format!(
        "{{mos: {}, noi: {}, col: {}, dis: {}, loud: {}}}",
        fmt_score(t.mos),
        fmt_score(t.noi),
        fmt_score(t.col),
        fmt_score(t.dis),
        fmt_score(t.loud)
    )
}

fn fmt_pair(a: &ScoreTuple, b: &ScoreTuple) -> String {
    format!("SpeechA: {}, SpeechB: {}", fmt_tuple(a), fmt_tuple(b))
}

fn preamble(out: &mut String) {
    out.push_str(INTRO);
    out.push('\n');
    for f in FACTORS {
        out.push_str(f);
        out.push('\n');
    }
}

/// The MOS-description prompt: factor rubrics, one `For example` block per
/// demonstration, then the current tuple.
pub fn build_mos_prompt(meta: &ScoreTuple, demos: &[Demonstration]) -> String {
    let mut out = String::new();
    preamble(&mut out);
    out.push_str(MOS_TASK);
    out.push('\n');
    for demo in demos {
        out.push_str(&format!(
            "For example, input is {}, then you should output: {}\n",
            fmt_tuple(&demo.meta),
            demo.response.trim()
        ));
    }
    out.push_str(&format!("Now the input is {}. {MOS_CLOSING}", fmt_tuple(meta)));
    out
}

/// The A/B comparison prompt. Same preamble, A/B instruction block instead of
/// the description task.
pub fn build_ab_prompt(meta_a: &ScoreTuple, meta_b: &ScoreTuple, demos: &[AbDemonstration]) -> String {
    let mut out = String::new();
    preamble(&mut out);
    out.push_str(AB_TASK);
    out.push('\n');
    for demo in demos {
        out.push_str(&format!(
            "For example, input is {}, then you should output: {}\n",
            fmt_pair(&demo.meta_a, &demo.meta_b),
            demo.response.trim()
        ));
    }
    out.push_str(&format!(
        "Now the input is {}. {AB_CLOSING}",
        fmt_pair(meta_a, meta_b)
    ));
    out
}

/// Judge prompt for the second extraction stage.
pub fn build_judge_prompt(response: &str) -> String {
    format!("{}\n\n{JUDGE_INSTRUCTION}", response.trim())
}

const TUPLE_RE: &str = r"\{mos: ([0-9.]+), noi: ([0-9.]+), col: ([0-9.]+), dis: ([0-9.]+), loud: ([0-9.]+)\}";

static MOS_QUERY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"Now the input is {TUPLE_RE}\. {}", regex::escape(MOS_CLOSING))).unwrap()
});

static AB_QUERY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"Now the input is SpeechA: {TUPLE_RE}, SpeechB: {TUPLE_RE}\. {}",
        regex::escape(AB_CLOSING)
    ))
    .unwrap()
});

fn tuple_from(caps: &regex::Captures<'_>, offset: usize) -> Option<ScoreTuple> {
    let mut v = [0.0; 5];
    for (i, slot) in v.iter_mut().enumerate() {
        *slot = caps.get(offset + i)?.as_str().parse().ok()?;
    }
    Some(ScoreTuple::new(v[0], v[1], v[2], v[3], v[4]))
}

/// Current tuple of a prompt produced by [`build_mos_prompt`].
pub fn parse_mos_query(prompt: &str) -> Option<ScoreTuple> {
    let caps = MOS_QUERY.captures(prompt)?;
    tuple_from(&caps, 1)
}

/// Current pair of a prompt produced by [`build_ab_prompt`].
pub fn parse_ab_query(prompt: &str) -> Option<(ScoreTuple, ScoreTuple)> {
    let caps = AB_QUERY.captures(prompt)?;
    Some((tuple_from(&caps, 1)?, tuple_from(&caps, 6)?))
}
