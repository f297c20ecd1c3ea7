use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use speechjudge::corpus::{read_corpus, write_corpus, CorpusItem};
use speechjudge::eval::{Evaluation, Prediction};
use speechjudge::meta_corpus::{planted_correlation_records, write_ratings};
use speechjudge::swd::read_manifest;
use speechjudge::{seed, ColumnMap, RatingRecord, ScoreTuple, SplitTag};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speechjudge"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_table(dir: &Path, records: &[RatingRecord]) {
    let file = std::fs::File::create(dir.join("ratings.csv")).unwrap();
    write_ratings(file, records, &ColumnMap::default()).unwrap();
}

fn ratings(dir: &Path, n: usize) {
    write_table(dir, &planted_correlation_records(n, 0.6, &mut seed::rng(3, "cli-test", 0)));
}

const SMALL_TRAINER: &str = "offline = true\n[toy]\nitems = 200\n[trainer]\nepochs = 5\nreference_epochs = 10\nwarmup_epochs = 4\n";

#[test]
fn help_and_usage_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(dir.path(), &["evaluate", "--task", "mos"])), 1);
    assert_eq!(code(&run(dir.path(), &["evaluate", "--task", "wer", "--predictions", "p", "--gold", "g"])), 1);
}

#[test]
fn analyze_writes_report_and_scatter() {
    let dir = tempfile::tempdir().unwrap();
    ratings(dir.path(), 500);
    let out = run(dir.path(), &["--out-dir", "o", "analyze", "--ratings", "ratings.csv", "--dump-scatter"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("o/correlation_report.toml")).unwrap();
    for block in ["[noi]", "[col]", "[dis]", "[loud]"] {
        assert!(text.contains(block), "{text}");
    }
    for dim in ["noi", "col", "dis", "loud"] {
        let scatter = std::fs::read_to_string(dir.path().join(format!("o/scatter_{dim}.csv"))).unwrap();
        assert_eq!(scatter.lines().count(), 501);
    }
}

#[test]
fn analyze_missing_file_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["analyze", "--ratings", "nope.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("input not found"), "{}", stderr(&out));
}

#[test]
fn bad_config_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "seeed = 3\n").unwrap();
    let out = run(dir.path(), &["--config", "run.toml", "analyze"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad config"));
}

#[test]
fn generate_mos_offline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    ratings(dir.path(), 300);
    for o in ["a", "b"] {
        let out = run(
            dir.path(),
            &["--offline", "--seed", "4", "--out-dir", o, "generate", "--task", "mos", "-n", "100", "--ratings", "ratings.csv"],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a/mos_corpus.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/mos_corpus.jsonl")).unwrap());
    let items = read_corpus(a.as_slice()).unwrap();
    assert_eq!(items.len(), 100);
    assert!(items.iter().all(|i| i.kind() == "mos"));
    let drops: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/mos_drops.json")).unwrap()).unwrap();
    assert_eq!(drops["requested"], 100);
    assert_eq!(drops["drops"].as_array().unwrap().len(), 0);
}

#[test]
fn generate_without_endpoint_is_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    ratings(dir.path(), 20);
    let out = run(dir.path(), &["generate", "--task", "mos", "-n", "5", "--ratings", "ratings.csv"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn generate_too_many_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    ratings(dir.path(), 20);
    let out = run(dir.path(), &["--offline", "generate", "--task", "mos", "-n", "50", "--ratings", "ratings.csv"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn generate_ab_on_tied_table_is_quality_error() {
    let dir = tempfile::tempdir().unwrap();
    let tied: Vec<RatingRecord> = (0..30)
        .map(|i| RatingRecord {
            sample_id: format!("t{i}"),
            audio_ref: None,
            scores: ScoreTuple::new(3.0, 3.0, 3.0, 3.0, 3.0),
            vote_count: 0,
            split: SplitTag::Other,
        })
        .collect();
    write_table(dir.path(), &tied);
    let out = run(dir.path(), &["--offline", "generate", "--task", "ab", "-n", "10", "--ratings", "ratings.csv"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("quality"));
}

#[test]
fn swd_gen_writes_corpus_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [
        "u1\tthe quick brown fox jumps over the lazy dog near the river bank",
        "u2\tshe said that the weather would be cold and wet tomorrow morning",
        "u3\twe should meet at the old house before the long night begins",
        "u4\tok then",
    ];
    std::fs::write(dir.path().join("tr.tsv"), lines.join("\n")).unwrap();
    let out = run(dir.path(), &["--offline", "--out-dir", "o", "swd-gen", "--transcripts", "tr.tsv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let corpus = read_corpus(std::fs::File::open(dir.path().join("o/swd_corpus.jsonl")).map(std::io::BufReader::new).unwrap()).unwrap();
    let manifest = read_manifest(std::fs::File::open(dir.path().join("o/swd_edit_manifest.jsonl")).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!(corpus.len(), 3);
    assert_eq!(manifest.len(), 3);
    for (item, entry) in corpus.iter().zip(&manifest) {
        let CorpusItem::Swd { id, n, gold_words, audio_ref, .. } = item else {
            panic!("not an swd item")
        };
        assert_eq!(id, &entry.utterance_id);
        assert_eq!(*n, entry.plan.span_len);
        assert_eq!(gold_words, &entry.plan.replacement_words);
        assert!(audio_ref.contains(&entry.editor_id));
        assert_eq!(&entry.modified_transcript[entry.char_start..entry.char_end], gold_words.join(" "));
    }
    let drops = std::fs::read_to_string(dir.path().join("o/swd_drops.json")).unwrap();
    assert!(drops.contains("u4"));

    let same = run(dir.path(), &["--offline", "--out-dir", "p", "generate", "--task", "swd", "--transcripts", "tr.tsv"]);
    assert_eq!(code(&same), 0);
    assert_eq!(
        std::fs::read(dir.path().join("o/swd_edit_manifest.jsonl")).unwrap(),
        std::fs::read(dir.path().join("p/swd_edit_manifest.jsonl")).unwrap()
    );
}

#[test]
fn train_alld_requires_warmup_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--out-dir", "o", "train-alld"]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("toy_task.json"), "{}", stderr(&out));
}

#[test]
fn warmup_then_alld_increases_margin_with_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL_TRAINER).unwrap();
    for o in ["a", "b"] {
        for cmd in ["warmup", "train-alld"] {
            let out = run(dir.path(), &["--config", "run.toml", "--out-dir", o, cmd]);
            assert_eq!(code(&out), 0, "{cmd}: {}", stderr(&out));
        }
    }
    let log = std::fs::read_to_string(dir.path().join("a/alld_log.jsonl")).unwrap();
    let evals: Vec<f64> = log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["kind"] == "alld_eval")
        .map(|v| v["heldout_margin"].as_f64().unwrap())
        .collect();
    assert_eq!(evals.len(), 6);
    assert!(evals.last() > evals.first(), "{evals:?}");
    for name in ["warmup_log.jsonl", "alld_log.jsonl"] {
        let body = |o: &str| {
            let text = std::fs::read_to_string(dir.path().join(o).join(name)).unwrap();
            assert!(text.lines().next().unwrap().contains("\"timestamp\""));
            text.lines().skip(1).map(str::to_string).collect::<Vec<_>>()
        };
        assert_eq!(body("a"), body("b"), "{name}");
    }
}

fn gold_corpus(dir: &Path) -> Vec<CorpusItem> {
    ratings(dir, 60);
    let out = run(dir, &["--offline", "--out-dir", "g", "generate", "--task", "mos", "-n", "40", "--ratings", "ratings.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    read_corpus(std::fs::read(dir.join("g/mos_corpus.jsonl")).unwrap().as_slice()).unwrap()
}

fn write_predictions(path: &Path, lines: &[String]) {
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn report(dir: &Path, task: &str) -> Evaluation {
    Evaluation::from_text(&std::fs::read_to_string(dir.join(format!("e/{task}_report.toml"))).unwrap()).unwrap()
}

fn prediction_line(item: &CorpusItem) -> String {
    serde_json::to_string(&Prediction {
        id: item.id().to_string(),
        response_text: item.reference_text(),
    })
    .unwrap()
}

#[test]
fn evaluate_gold_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let gold = gold_corpus(dir.path());
    write_predictions(&dir.path().join("pred.jsonl"), &gold.iter().map(prediction_line).collect::<Vec<_>>());
    let out = run(
        dir.path(),
        &["--out-dir", "e", "evaluate", "--task", "mos", "--predictions", "pred.jsonl", "--gold", "g/mos_corpus.jsonl"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(dir.path(), "mos").metrics;
    assert_eq!((r.n_items, r.n_parse_failures), (40, 0));
    assert_eq!(r.mse, Some(0.0));
    assert_eq!(r.bleu, Some(1.0));
    assert!((r.lcc.unwrap() - 1.0).abs() < 1e-12 && (r.srcc.unwrap() - 1.0).abs() < 1e-12);
    let items = std::fs::read_to_string(dir.path().join("e/mos_items.jsonl")).unwrap();
    assert_eq!(items.lines().count(), 40);
}

#[test]
fn malformed_prediction_line_is_counted_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let gold = gold_corpus(dir.path());
    let mut lines: Vec<String> = gold.iter().map(prediction_line).collect();
    lines[7] = "{not json".into();
    write_predictions(&dir.path().join("pred.jsonl"), &lines);
    let out = run(
        dir.path(),
        &["--out-dir", "e", "evaluate", "--task", "mos", "--predictions", "pred.jsonl", "--gold", "g/mos_corpus.jsonl"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(dir.path(), "mos");
    assert_eq!(r.metrics.n_parse_failures, 1);
    assert_eq!(r.failures.len(), 1);
}

#[test]
fn shuffled_predictions_are_alignment_error() {
    let dir = tempfile::tempdir().unwrap();
    let gold = gold_corpus(dir.path());
    let mut lines: Vec<String> = gold.iter().map(prediction_line).collect();
    lines.swap(0, 1);
    write_predictions(&dir.path().join("pred.jsonl"), &lines);
    let out = run(
        dir.path(),
        &["--out-dir", "e", "evaluate", "--task", "mos", "--predictions", "pred.jsonl", "--gold", "g/mos_corpus.jsonl"],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn ab_evaluation_without_judge_needs_no_network() {
    let dir = tempfile::tempdir().unwrap();
    ratings(dir.path(), 80);
    let out = run(dir.path(), &["--offline", "--out-dir", "g", "generate", "--task", "ab", "-n", "25", "--ratings", "ratings.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let gold = read_corpus(std::fs::read(dir.path().join("g/ab_corpus.jsonl")).unwrap().as_slice()).unwrap();
    write_predictions(&dir.path().join("pred.jsonl"), &gold.iter().map(prediction_line).collect::<Vec<_>>());
    let out = run(
        dir.path(),
        &["--offline", "--out-dir", "e", "evaluate", "--task", "ab", "--predictions", "pred.jsonl", "--gold", "g/ab_corpus.jsonl"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(dir.path(), "ab").metrics;
    assert_eq!(r.accuracy, Some(1.0));
    assert_eq!(r.judge_calls, 0);

    let judged = run(
        dir.path(),
        &["--offline", "--out-dir", "e", "evaluate", "--task", "ab", "--judge", "--predictions", "pred.jsonl", "--gold", "g/ab_corpus.jsonl"],
    );
    assert_eq!(code(&judged), 4);
}

/// Accepts and immediately closes connections, counting them.
fn counting_listener() -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            counter.fetch_add(1, Ordering::SeqCst);
            drop(stream);
        }
    });
    (url, hits)
}

fn endpoint_config(url: &str, max_drop_rate: f64) -> String {
    format!(
        "[client]\nbase_url = \"{url}\"\ntimeout_secs = 2\n[generation]\nmax_drop_rate = {max_drop_rate:?}\nregenerate_cap = 0\n[generation.retry]\nmax_attempts = 1\n"
    )
}

#[test]
fn offline_mode_opens_no_sockets() {
    let dir = tempfile::tempdir().unwrap();
    ratings(dir.path(), 30);
    let (url, hits) = counting_listener();
    std::fs::write(dir.path().join("run.toml"), endpoint_config(&url, 1.0)).unwrap();
    for task in ["mos", "ab"] {
        let out = run(
            dir.path(),
            &["--config", "run.toml", "--offline", "generate", "--task", task, "-n", "5", "--ratings", "ratings.csv"],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    std::thread::sleep(std::time::Duration::from_millis(200));
    assert_eq!(hits.load(Ordering::SeqCst), 0);
}

#[test]
fn online_mode_reaches_the_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    ratings(dir.path(), 30);
    let (url, hits) = counting_listener();
    std::fs::write(dir.path().join("run.toml"), endpoint_config(&url, 0.0)).unwrap();
    let out = run(dir.path(), &["--config", "run.toml", "generate", "--task", "mos", "-n", "3", "--ratings", "ratings.csv"]);
    // every completion fails, so every item is dropped
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(hits.load(Ordering::SeqCst) >= 3);
}

#[test]
fn toy_task_from_generated_corpus() {
    let dir = tempfile::tempdir().unwrap();
    ratings(dir.path(), 120);
    std::fs::write(dir.path().join("run.toml"), SMALL_TRAINER).unwrap();
    let out = run(dir.path(), &["--config", "run.toml", "--out-dir", "o", "generate", "--task", "mos", "-n", "100", "--ratings", "ratings.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(dir.path(), &["--config", "run.toml", "--out-dir", "o", "warmup", "--corpus", "o/mos_corpus.jsonl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let gold = read_corpus(std::fs::read(dir.path().join("o/heldout_gold.jsonl")).unwrap().as_slice()).unwrap();
    assert_eq!(gold.len(), 20);
    let ids: Vec<String> = read_corpus(std::fs::read(dir.path().join("o/mos_corpus.jsonl")).unwrap().as_slice())
        .unwrap()
        .iter()
        .map(|i| i.id().to_string())
        .collect();
    assert!(gold.iter().all(|g| ids.contains(&g.id().to_string())));

    let mut copy = gold.clone();
    copy.truncate(3);
    let mut buf = Vec::new();
    write_corpus(&mut buf, &copy).unwrap();
    std::fs::write(dir.path().join("tiny.jsonl"), buf).unwrap();
    let out = run(dir.path(), &["--config", "run.toml", "--out-dir", "t", "warmup", "--corpus", "tiny.jsonl"]);
    assert_eq!(code(&out), 2);
}
