use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;
use speechjudge::eval::{bleu, corpus_bleu, extract_ab_choice, extract_mos, BleuConfig};
use speechjudge::meta_corpus::planted_correlation_records;
use speechjudge::synth::{render_fallback_comparison, render_fallback_description, DEFAULT_GAP};
use speechjudge::{correlation_report, pearson, seed, spearman, ScoreTuple};
use std::hint::black_box;

fn tuple<R: Rng>(rng: &mut R) -> ScoreTuple {
    let mut s = || rng.random_range(1.0..=5.0);
    ScoreTuple::new(s(), s(), s(), s(), s())
}

fn correlations(c: &mut Criterion) {
    let mut group = c.benchmark_group("correlation");
    for n in [1_000usize, 10_000, 100_000] {
        let mut rng = seed::rng(1, "bench", 0);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random::<f64>()).collect();
        group.bench_with_input(BenchmarkId::new("pearson", n), &n, |b, _| b.iter(|| pearson(black_box(&x), black_box(&y))));
        group.bench_with_input(BenchmarkId::new("spearman", n), &n, |b, _| b.iter(|| spearman(black_box(&x), black_box(&y))));
    }
    let records = planted_correlation_records(10_000, 0.5, &mut seed::rng(2, "bench", 0));
    group.bench_function("report_10k", |b| b.iter(|| correlation_report(black_box(&records))));
    group.finish();
}

fn text_metrics(c: &mut Criterion) {
    let mut rng = seed::rng(3, "bench", 0);
    let texts: Vec<String> = (0..1_000)
        .map(|i| render_fallback_description(&tuple(&mut rng), i).response_text)
        .collect();
    let cfg = BleuConfig::default();
    c.bench_function("bleu/sentence", |b| b.iter(|| bleu(black_box(&texts[0]), &[texts[1].as_str()], &cfg)));
    let items: Vec<(&str, Vec<&str>)> = texts.chunks(2).map(|p| (p[0].as_str(), vec![p[1].as_str()])).collect();
    c.bench_function("bleu/corpus_500", |b| b.iter(|| corpus_bleu(black_box(&items), &cfg)));
    c.bench_function("extract/mos_1000", |b| {
        b.iter(|| texts.iter().filter_map(|t| extract_mos(black_box(t))).count())
    });
    let comparisons: Vec<String> = (0..1_000)
        .map(|i| render_fallback_comparison(&tuple(&mut rng), &tuple(&mut rng), DEFAULT_GAP, i))
        .collect();
    c.bench_function("extract/ab_1000", |b| {
        b.iter(|| comparisons.iter().filter(|t| extract_ab_choice(black_box(t), None).choice.is_some()).count())
    });
}

criterion_group!(benches, correlations, text_metrics);
criterion_main!(benches);
