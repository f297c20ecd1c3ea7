//! MOS-description and A/B-comparison corpus synthesis.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusItem;
use crate::eval::{extract_ab_rule, extract_mos};
use crate::meta_corpus::{Dimension, RatingRecord, ScoreTuple};
use crate::seed;

use super::client::{generate, ClientError, GenParams, GenerationClient, RetryPolicy};
use super::demos::{AbDemonstration, Demonstration};
use super::fallback::{select_contrast_aspects, winner, AbChoice, DescriptiveEvaluation};
use super::prompts::{build_ab_prompt, build_mos_prompt};

/// Tolerance between the MOS stated in a generated text and the label.
pub const MOS_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("requested {requested} items from {available} records without replacement")]
    NotEnoughRecords { requested: usize, available: usize },
    #[error("cannot form comparison pairs: {0}")]
    CannotFormPairs(String),
    #[error("quality threshold exceeded: dropped {} of {} items (max rate {max_drop_rate})", .stats.dropped(), .stats.requested)]
    Quality {
        stats: Box<SynthStats>,
        max_drop_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthOptions {
    pub seed: u64,
    /// Regenerations allowed after the first inconsistent completion.
    pub regenerate_cap: u32,
    pub max_drop_rate: f64,
    pub with_replacement: bool,
    pub retry: RetryPolicy,
    /// A/B: a sub-dimension is a contrast aspect when its gap exceeds this.
    pub gap: f64,
    /// A/B: pairs with `|mos_a - mos_b| <= tie_threshold` are resampled.
    pub tie_threshold: f64,
    /// A/B: draws attempted per pair before giving up on it.
    pub max_pair_draws: u32,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            regenerate_cap: 3,
            max_drop_rate: 0.05,
            with_replacement: false,
            retry: RetryPolicy::default(),
            gap: super::DEFAULT_GAP,
            tie_threshold: 0.1,
            max_pair_draws: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub id: String,
    pub reason: String,
}

/// Bookkeeping written next to every generated corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthStats {
    pub requested: usize,
    pub produced: usize,
    pub regenerations: usize,
    pub resampled_pairs: usize,
    pub drops: Vec<DropRecord>,
}

impl SynthStats {
    pub fn dropped(&self) -> usize {
        self.drops.len()
    }

    pub fn drop_rate(&self) -> f64 {
        if self.requested == 0 {
            0.0
        } else {
            self.dropped() as f64 / self.requested as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbComparison {
    pub sample_id_a: String,
    pub sample_id_b: String,
    pub meta_a: ScoreTuple,
    pub meta_b: ScoreTuple,
    pub contrast_aspects: Vec<Dimension>,
    pub response_text: String,
    pub winner_label: AbChoice,
}

impl AbComparison {
    pub fn id(&self) -> String {
        format!("{}__{}", self.sample_id_a, self.sample_id_b)
    }
}

impl From<&DescriptiveEvaluation> for CorpusItem {
    fn from(e: &DescriptiveEvaluation) -> Self {
        CorpusItem::Mos {
            id: e.sample_id.clone(),
            meta: e.meta,
            response: e.response_text.clone(),
            label: e.final_mos_label,
        }
    }
}

impl From<&AbComparison> for CorpusItem {
    fn from(c: &AbComparison) -> Self {
        CorpusItem::Ab {
            id: c.id(),
            ids: [c.sample_id_a.clone(), c.sample_id_b.clone()],
            meta: [c.meta_a, c.meta_b],
            contrast_aspects: c.contrast_aspects.clone(),
            response: c.response_text.clone(),
            label: c.winner_label,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput<T> {
    pub items: Vec<T>,
    pub stats: SynthStats,
}

enum Attempt<T> {
    Accepted { item: T, regenerations: usize },
    Dropped { reason: String, regenerations: usize },
}

/// Generate until `accept` returns `Some`, up to `1 + cap` completions.
fn generate_checked<T>(
    prompt: &str,
    client: &dyn GenerationClient,
    params: &GenParams,
    options: &SynthOptions,
    item_seed: u64,
    accept: impl Fn(&str) -> Result<T, String>,
) -> Attempt<T> {
    let mut last_reason = String::new();
    for attempt in 0..=options.regenerate_cap {
        let mut p = params.clone();
        p.seed = Some(seed::derive(item_seed, "attempt", u64::from(attempt)));
        if attempt == 0 {
            p.seed = Some(item_seed);
        }
        let outcome = generate(prompt, client, &p, &options.retry)
            .map_err(|e: ClientError| e.to_string())
            .and_then(|text| accept(&text));
        match outcome {
            Ok(item) => {
                return Attempt::Accepted {
                    item,
                    regenerations: attempt as usize,
                }
            }
            Err(reason) => last_reason = reason,
        }
    }
    Attempt::Dropped {
        reason: last_reason,
        regenerations: options.regenerate_cap as usize,
    }
}

fn finish<T>(
    attempts: Vec<(String, Attempt<T>)>,
    mut stats: SynthStats,
    options: &SynthOptions,
) -> Result<SynthOutput<T>, SynthError> {
    let mut items = Vec::new();
    for (id, attempt) in attempts {
        match attempt {
            Attempt::Accepted { item, regenerations } => {
                stats.regenerations += regenerations;
                items.push(item);
            }
            Attempt::Dropped { reason, regenerations } => {
                stats.regenerations += regenerations;
                log::warn!("dropping {id}: {reason}");
                stats.drops.push(DropRecord { id, reason });
            }
        }
    }
    stats.produced = items.len();
    if stats.drop_rate() > options.max_drop_rate {
        return Err(SynthError::Quality {
            stats: Box::new(stats),
            max_drop_rate: options.max_drop_rate,
        });
    }
    Ok(SynthOutput { items, stats })
}

/// Indices of the records to describe, in corpus order.
fn select_records(n: usize, available: usize, options: &SynthOptions) -> Result<Vec<usize>, SynthError> {
    if options.with_replacement {
        if available == 0 && n > 0 {
            return Err(SynthError::NotEnoughRecords { requested: n, available });
        }
        let mut rng = seed::rng(options.seed, "mos-select", 0);
        return Ok((0..n).map(|_| rng.random_range(0..available)).collect());
    }
    if n > available {
        return Err(SynthError::NotEnoughRecords { requested: n, available });
    }
    let mut rng = seed::rng(options.seed, "mos-select", 0);
    let mut picked = rand::seq::index::sample(&mut rng, available, n).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Unique item ids: repeated sample ids get a `#k` suffix.
fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    ids.map(|id| {
        let count = seen.entry(id).or_insert(0);
        *count += 1;
        if *count == 1 {
            id.to_string()
        } else {
            format!("{id}#{count}")
        }
    })
    .collect()
}

/// Synthesize `n` MOS descriptions.
///
/// Completions whose final MOS does not match the label within
/// [`MOS_TOLERANCE`] are regenerated, then dropped.
pub fn synth_mos_corpus(
    records: &[RatingRecord],
    demos: &[Demonstration],
    client: &dyn GenerationClient,
    params: &GenParams,
    n: usize,
    options: &SynthOptions,
) -> Result<SynthOutput<DescriptiveEvaluation>, SynthError> {
    params.validate().map_err(SynthError::InvalidParams)?;
    let picked = select_records(n, records.len(), options)?;
    let ids = unique_ids(picked.iter().map(|&i| records[i].sample_id.as_str()));

    let attempts: Vec<(String, Attempt<DescriptiveEvaluation>)> = picked
        .par_iter()
        .zip(ids.par_iter())
        .enumerate()
        .map(|(k, (&idx, id))| {
            let meta = records[idx].scores;
            let prompt = build_mos_prompt(&meta, demos);
            let item_seed = seed::derive(options.seed, "mos-item", k as u64);
            let attempt = generate_checked(&prompt, client, params, options, item_seed, |text| {
                match extract_mos(text) {
                    Some(v) if (v - meta.mos).abs() <= MOS_TOLERANCE => Ok(DescriptiveEvaluation {
                        sample_id: id.clone(),
                        meta,
                        response_text: text.to_string(),
                        final_mos_label: meta.mos,
                    }),
                    Some(v) => Err(format!("stated mos {v} differs from label {}", meta.mos)),
                    None => Err("no final mos in completion".to_string()),
                }
            });
            (id.clone(), attempt)
        })
        .collect();

    let stats = SynthStats {
        requested: n,
        ..SynthStats::default()
    };
    finish(attempts, stats, options)
}

fn draw_pairs(
    records: &[RatingRecord],
    n_pairs: usize,
    options: &SynthOptions,
    stats: &mut SynthStats,
) -> Result<Vec<Option<(usize, usize)>>, SynthError> {
    if records.len() < 2 {
        return Err(SynthError::CannotFormPairs(format!(
            "need at least 2 records, got {}",
            records.len()
        )));
    }
    let mut used = HashSet::new();
    let mut pairs = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs {
        let mut rng = seed::rng(options.seed, "ab-pair", k as u64);
        let mut found = None;
        for draw in 0..options.max_pair_draws {
            let a = rng.random_range(0..records.len());
            let b = rng.random_range(0..records.len());
            if a == b {
                continue;
            }
            let (ma, mb) = (&records[a].scores, &records[b].scores);
            let usable = (ma.mos - mb.mos).abs() > options.tie_threshold
                && !select_contrast_aspects(ma, mb, options.gap, 3).is_empty()
                && !used.contains(&(a.min(b), a.max(b)));
            if usable {
                stats.resampled_pairs += draw as usize;
                used.insert((a.min(b), a.max(b)));
                found = Some((a, b));
                break;
            }
        }
        pairs.push(found);
    }
    Ok(pairs)
}

/// Synthesize `n_pairs` A/B comparisons.
///
/// Pairs are drawn from distinct records; tied pairs (`|Δmos| <= tie_threshold`),
/// pairs without a contrast aspect and repeated pairs are resampled. The winner
/// label always follows MOS, and a completion is kept only when rule-based
/// verdict extraction agrees with it.
pub fn synth_ab_corpus(
    records: &[RatingRecord],
    demos: &[AbDemonstration],
    client: &dyn GenerationClient,
    params: &GenParams,
    n_pairs: usize,
    options: &SynthOptions,
) -> Result<SynthOutput<AbComparison>, SynthError> {
    params.validate().map_err(SynthError::InvalidParams)?;
    let mut stats = SynthStats {
        requested: n_pairs,
        ..SynthStats::default()
    };
    let pairs = draw_pairs(records, n_pairs, options, &mut stats)?;
    if n_pairs > 0 && pairs.iter().all(Option::is_none) {
        return Err(SynthError::CannotFormPairs(
            "no pair of records differs beyond the tie and gap thresholds".into(),
        ));
    }

    let attempts: Vec<(String, Attempt<AbComparison>)> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, pair)| {
            let Some((a, b)) = *pair else {
                return (
                    format!("pair{k}"),
                    Attempt::Dropped {
                        reason: "no usable pair found".into(),
                        regenerations: 0,
                    },
                );
            };
            let (ra, rb) = (&records[a], &records[b]);
            let label = winner(&ra.scores, &rb.scores);
            let aspects = select_contrast_aspects(&ra.scores, &rb.scores, options.gap, 3);
            let prompt = build_ab_prompt(&ra.scores, &rb.scores, demos);
            let item_seed = seed::derive(options.seed, "ab-item", k as u64);
            let id = format!("{}__{}", ra.sample_id, rb.sample_id);
            let attempt = generate_checked(&prompt, client, params, options, item_seed, |text| {
                match extract_ab_rule(text) {
                    Some(choice) if choice == label => Ok(AbComparison {
                        sample_id_a: ra.sample_id.clone(),
                        sample_id_b: rb.sample_id.clone(),
                        meta_a: ra.scores,
                        meta_b: rb.scores,
                        contrast_aspects: aspects.clone(),
                        response_text: text.to_string(),
                        winner_label: label,
                    }),
                    Some(choice) => Err(format!("verdict {choice:?} contradicts mos winner {label:?}")),
                    None => Err("no unambiguous verdict in completion".to_string()),
                }
            });
            (id, attempt)
        })
        .collect();

    finish(attempts, stats, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta_corpus::SplitTag;
    use crate::synth::client::{OfflineClient, ScriptedClient};

    fn records(n: usize, seed_: u64) -> Vec<RatingRecord> {
        let mut rng = seed::rng(seed_, "test-records", 0);
        (0..n)
            .map(|i| {
                let mut s = ScoreTuple::new(0.0, 0.0, 0.0, 0.0, 0.0);
                for d in Dimension::ALL {
                    s.set(d, (rng.random_range(10..=50) as f64) / 10.0);
                }
                RatingRecord {
                    sample_id: format!("r{i:03}"),
                    audio_ref: None,
                    scores: s,
                    vote_count: 5,
                    split: SplitTag::Train,
                }
            })
            .collect()
    }

    fn quick() -> SynthOptions {
        SynthOptions {
            retry: RetryPolicy::no_delay(2),
            ..SynthOptions::default()
        }
    }

    #[test]
    fn offline_mos_corpus_has_no_drops() {
        let recs = records(30, 1);
        let out = synth_mos_corpus(&recs, &Demonstration::builtin(), &OfflineClient::default(), &GenParams::default(), 10, &quick()).unwrap();
        assert_eq!(out.items.len(), 10);
        assert_eq!(out.stats.dropped(), 0);
        for item in &out.items {
            assert_eq!(extract_mos(&item.response_text), Some(item.meta.mos));
        }
    }

    #[test]
    fn offline_adapter_matches_fallback() {
        let recs = records(5, 2);
        let opts = quick();
        let out = synth_mos_corpus(&recs, &[], &OfflineClient::default(), &GenParams::default(), 5, &opts).unwrap();
        for (k, item) in out.items.iter().enumerate() {
            let direct = super::super::render_fallback_description(
                &item.meta,
                seed::derive(opts.seed, "mos-item", k as u64),
            );
            assert_eq!(direct.response_text, item.response_text);
        }
    }

    #[test]
    fn numberless_completions_are_dropped_and_abort() {
        let recs = records(3, 3);
        let script = (0..20).map(|_| Ok("it sounds fine".to_string())).collect();
        let client = ScriptedClient::new(script);
        let err = synth_mos_corpus(&recs, &[], &client, &GenParams::default(), 1, &quick()).unwrap_err();
        match err {
            SynthError::Quality { stats, .. } => {
                assert_eq!(stats.dropped(), 1);
                assert_eq!(stats.regenerations, 3);
                assert!(stats.drops[0].reason.contains("no final mos"));
            }
            other => panic!("unexpected {other:?}"),
        }
        // 1 + 3 regenerations
        assert_eq!(client.calls.load(std::sync::atomic::Ordering::SeqCst), 4);
    }

    #[test]
    fn drops_below_threshold_are_tolerated() {
        let recs = records(3, 3);
        let opts = SynthOptions { max_drop_rate: 1.0, ..quick() };
        let client = ScriptedClient::new((0..20).map(|_| Ok("nothing".to_string())).collect());
        let out = synth_mos_corpus(&recs, &[], &client, &GenParams::default(), 1, &opts).unwrap();
        assert!(out.items.is_empty());
        assert_eq!(out.stats.dropped(), 1);
    }

    #[test]
    fn without_replacement_bounds_n() {
        let recs = records(3, 4);
        assert!(matches!(
            synth_mos_corpus(&recs, &[], &OfflineClient::default(), &GenParams::default(), 4, &quick()),
            Err(SynthError::NotEnoughRecords { .. })
        ));
        let opts = SynthOptions { with_replacement: true, ..quick() };
        let out = synth_mos_corpus(&recs, &[], &OfflineClient::default(), &GenParams::default(), 9, &opts).unwrap();
        assert_eq!(out.items.len(), 9);
        let ids: HashSet<_> = out.items.iter().map(|e| e.sample_id.clone()).collect();
        assert_eq!(ids.len(), 9);
    }

    #[test]
    fn reproducible_streams() {
        let recs = records(40, 5);
        let run = || {
            synth_ab_corpus(&recs, &AbDemonstration::builtin(), &OfflineClient::default(), &GenParams::default(), 15, &quick())
                .unwrap()
                .items
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn ab_labels_follow_mos() {
        let recs = records(40, 6);
        let out = synth_ab_corpus(&recs, &[], &OfflineClient::default(), &GenParams::default(), 20, &quick()).unwrap();
        assert_eq!(out.items.len(), 20);
        for c in &out.items {
            assert!((c.meta_a.mos - c.meta_b.mos).abs() > 0.1);
            let expect = if c.meta_a.mos > c.meta_b.mos { AbChoice::A } else { AbChoice::B };
            assert_eq!(c.winner_label, expect);
            assert!(!c.contrast_aspects.is_empty() && c.contrast_aspects.len() <= 3);
            for d in &c.contrast_aspects {
                assert!((c.meta_a.get(*d) - c.meta_b.get(*d)).abs() > 0.5);
            }
            assert_eq!(extract_ab_rule(&c.response_text), Some(c.winner_label));
        }
    }

    #[test]
    fn tied_pair_is_resampled() {
        let mut recs = records(3, 7);
        recs[0].scores = ScoreTuple::new(3.0, 2.0, 3.0, 3.0, 3.0);
        recs[1].scores = ScoreTuple::new(3.0, 4.0, 3.0, 3.0, 3.0);
        recs[2].scores = ScoreTuple::new(4.1, 4.5, 3.0, 4.0, 4.0);
        let out = synth_ab_corpus(&recs, &[], &OfflineClient::default(), &GenParams::default(), 2, &quick()).unwrap();
        for c in &out.items {
            assert!(c.sample_id_a == "r002" || c.sample_id_b == "r002");
        }
    }

    #[test]
    fn all_tied_table_cannot_form_pairs() {
        let mut recs = records(5, 8);
        for r in &mut recs {
            r.scores = ScoreTuple::new(3.0, 3.0, 3.0, 3.0, 3.0);
        }
        assert!(matches!(
            synth_ab_corpus(&recs, &[], &OfflineClient::default(), &GenParams::default(), 4, &SynthOptions { max_pair_draws: 50, ..quick() }),
            Err(SynthError::CannotFormPairs(_))
        ));
    }
}
