//! Deterministic offline substitute for the generation service.
//!
//! Phrase banks are keyed by the integer rubric band of each score
//! (`round(s)`, halves rounded up), mirroring the 1-5 rubric sentences of the
//! prompt. The seed only chooses between equivalent phrasings.

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::meta_corpus::{Dimension, ScoreTuple, SUB_DIMENSIONS};

use super::prompts::fmt_score;

/// Rubric band of a score: nearest integer with halves rounded up, in `1..=5`.
pub fn rubric_band(score: f64) -> usize {
    ((score + 0.5).floor() as i64).clamp(1, 5) as usize
}

const NOI: [[&str; 2]; 5] = [
    [
        "The recording is very noisy, and heavy background interference competes with the voice.",
        "Heavy background noise nearly buries the speech.",
    ],
    [
        "The recording is somewhat noisy, with clearly audible background interference.",
        "Noticeable background noise intrudes on the speech.",
    ],
    [
        "The background is neither noisy nor clean, with a steady layer of noise behind the voice.",
        "Some background noise is present and can be heard throughout.",
    ],
    [
        "The background is somewhat clean, with only faint noise.",
        "There is a trace of background noise, but the signal stays mostly clean.",
    ],
    [
        "The recording is completely clean, without any audible background.",
        "The background is entirely silent behind the voice.",
    ],
];

const COL: [[&str; 2]; 5] = [
    [
        "The voice is severely distorted and hardly sounds natural.",
        "Severe distortion dominates the voice.",
    ],
    [
        "The voice is significantly distorted and sounds clearly unnatural.",
        "Significant distortion changes the character of the voice.",
    ],
    [
        "The voice is moderately distorted, and its natural timbre is partly altered.",
        "Moderate distortion alters the natural sound of the voice.",
    ],
    [
        "The voice is slightly distorted but remains mostly natural.",
        "Only slight distortion colors the voice.",
    ],
    [
        "The voice keeps its fully natural timbre.",
        "The timbre of the voice is entirely natural.",
    ],
];

const DIS: [[&str; 2]; 5] = [
    [
        "The speech is severely discontinuous, and playback keeps falling apart.",
        "Constant breaks and stutters make the playback incoherent.",
    ],
    [
        "The speech is significantly discontinuous, with frequent breaks and stutters.",
        "Frequent interruptions break up the flow of the speech.",
    ],
    [
        "The speech is moderately discontinuous, with several noticeable breaks.",
        "Several short breaks interrupt the playback.",
    ],
    [
        "The speech is slightly discontinuous, with a rare short break.",
        "A minor hiccup in continuity is barely noticeable.",
    ],
    [
        "Playback flows smoothly from start to end.",
        "The speech runs continuously without any interruption.",
    ],
];

const LOUD: [[&str; 2]; 5] = [
    [
        "The speech is extremely quiet and barely audible.",
        "The level is so low that the speech is barely audible.",
    ],
    [
        "The speech is significantly quiet and takes effort to follow.",
        "The low volume makes the speech hard to follow.",
    ],
    [
        "The speech is soft but understandable.",
        "The volume is on the soft side, yet the words remain understandable.",
    ],
    [
        "The speech is clearly loud.",
        "The volume is clear and adequate.",
    ],
    [
        "The loudness is perfect and comfortable.",
        "The speech comes through at an ideal level.",
    ],
];

const CLOSING: [&str; 2] = [
    "Taking all factors into account, the overall MOS score is",
    "Considering all of these factors, the overall MOS score is",
];

fn bank(dim: Dimension) -> &'static [[&'static str; 2]; 5] {
    match dim {
        Dimension::Noi => &NOI,
        Dimension::Col => &COL,
        Dimension::Dis => &DIS,
        Dimension::Loud => &LOUD,
        Dimension::Mos => unreachable!("mos has no phrase bank"),
    }
}

/// Lowest-scoring sub-dimension; ties resolve to rubric order.
pub fn weakest_dimension(meta: &ScoreTuple) -> Dimension {
    SUB_DIMENSIONS
        .into_iter()
        .fold(Dimension::Noi, |best, d| {
            if meta.get(d) < meta.get(best) {
                d
            } else {
                best
            }
        })
}

fn impact_sentence(meta: &ScoreTuple, pick: usize) -> String {
    let weakest = weakest_dimension(meta);
    let noun = weakest.noun();
    match rubric_band(meta.get(weakest)) {
        1..=3 => [
            format!("The {noun} is the dominant degradation and pulls the overall quality down considerably."),
            format!("Among all aspects, the {noun} is the dominant degradation and weighs most heavily on the perceived quality."),
        ][pick]
            .clone(),
        4 => [
            format!("Only minor flaws are present, with the {noun} being the weakest aspect."),
            format!("The {noun} is the weakest aspect, although its effect on the overall quality is small."),
        ][pick]
            .clone(),
        _ => [
            "None of the aspects shows a noticeable problem.".to_string(),
            "Every aspect is at its best level.".to_string(),
        ][pick]
            .clone(),
    }
}

/// A generated (or fallback-rendered) MOS description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveEvaluation {
    pub sample_id: String,
    pub meta: ScoreTuple,
    pub response_text: String,
    pub final_mos_label: f64,
}

/// Render a description of `meta` covering every sub-dimension, the impact of
/// the weakest one and a closing sentence stating the exact MOS.
///
/// The returned evaluation has an empty `sample_id`; callers attach one.
pub fn render_fallback_description(meta: &ScoreTuple, seed: u64) -> DescriptiveEvaluation {
    let mut rng = crate::seed::rng(seed, "fallback-description", 0);
    let mut pick = || *[0usize, 1].choose(&mut rng).expect("non-empty");
    let mut sentences: Vec<String> = SUB_DIMENSIONS
        .iter()
        .map(|&d| bank(d)[rubric_band(meta.get(d)) - 1][pick()].to_string())
        .collect();
    sentences.push(impact_sentence(meta, pick()));
    sentences.push(format!("{} {}.", CLOSING[pick()], fmt_score(meta.mos)));
    DescriptiveEvaluation {
        sample_id: String::new(),
        meta: *meta,
        response_text: sentences.join(" "),
        final_mos_label: meta.mos,
    }
}

/// Sub-dimensions whose scores differ by more than `gap`, largest gap first,
/// at most `max_aspects`. MOS is never listed.
pub fn select_contrast_aspects(
    a: &ScoreTuple,
    b: &ScoreTuple,
    gap: f64,
    max_aspects: usize,
) -> Vec<Dimension> {
    let mut diffs: Vec<(Dimension, f64)> = SUB_DIMENSIONS
        .iter()
        .map(|&d| (d, (a.get(d) - b.get(d)).abs()))
        .filter(|&(_, delta)| delta > gap)
        .collect();
    // stable sort keeps rubric order among equal gaps
    diffs.sort_by(|x, y| y.1.total_cmp(&x.1));
    diffs.truncate(max_aspects);
    diffs.into_iter().map(|(d, _)| d).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AbChoice {
    A,
    B,
}

impl AbChoice {
    pub fn token(self) -> &'static str {
        match self {
            AbChoice::A => "[SpeechA]",
            AbChoice::B => "[SpeechB]",
        }
    }

    fn name(self) -> &'static str {
        match self {
            AbChoice::A => "SpeechA",
            AbChoice::B => "SpeechB",
        }
    }

    fn other(self) -> Self {
        match self {
            AbChoice::A => AbChoice::B,
            AbChoice::B => AbChoice::A,
        }
    }
}

/// Higher MOS wins; an exact tie goes to A.
pub fn winner(a: &ScoreTuple, b: &ScoreTuple) -> AbChoice {
    if a.mos >= b.mos {
        AbChoice::A
    } else {
        AbChoice::B
    }
}

fn comparative(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Noi => "cleaner",
        Dimension::Col => "more natural",
        Dimension::Dis => "more continuous",
        Dimension::Loud => "louder",
        Dimension::Mos => unreachable!(),
    }
}

/// Render an A/B comparison of the contrast aspects ending in the verdict token.
pub fn render_fallback_comparison(a: &ScoreTuple, b: &ScoreTuple, gap: f64, seed: u64) -> String {
    let mut rng = crate::seed::rng(seed, "fallback-comparison", 0);
    let mut pick = || *[0usize, 1].choose(&mut rng).expect("non-empty");
    let aspects = select_contrast_aspects(a, b, gap, 3);
    let win = winner(a, b);
    let mut sentences = Vec::new();
    if aspects.is_empty() {
        sentences.push("The two samples show no obvious gap in any single aspect.".to_string());
    } else {
        let names: Vec<&str> = aspects.iter().map(|d| d.noun()).collect();
        sentences.push(
            [
                format!("The two samples differ mainly in {}.", join_list(&names)),
                format!("The clearest contrasts between the two samples are in {}.", join_list(&names)),
            ][pick()]
            .clone(),
        );
        for &d in &aspects {
            let (hi, lo) = if a.get(d) > b.get(d) {
                (AbChoice::A, AbChoice::B)
            } else {
                (AbChoice::B, AbChoice::A)
            };
            sentences.push(format!(
                "In terms of {}, {} is {} than {}.",
                d.noun(),
                hi.name(),
                comparative(d),
                lo.name()
            ));
        }
    }
    sentences.push(
        [
            format!(
                "Overall, {} has the higher quality than {}, so my preference is {}.",
                win.name(),
                win.other().name(),
                win.token()
            ),
            format!(
                "Weighing these differences, {} comes out ahead of {}, so my preference is {}.",
                win.name(),
                win.other().name(),
                win.token()
            ),
        ][pick()]
        .clone(),
    );
    sentences.join(" ")
}

fn join_list(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}
