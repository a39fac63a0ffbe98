mod common;

use common::oracles::{brute_spearman, spearman_max_error};
use common::{data_path, fixture, small_config};
use paravec::eval::*;
use paravec::synthetic::{topic_word, SyntheticSpec};
use paravec::trainer::{train, Mode, TrainConfig};
use paravec::vectors::EmbeddingSet;
use proptest::prelude::*;
use std::io::BufReader;

fn open(name: &str) -> BufReader<std::fs::File> {
    BufReader::new(std::fs::File::open(data_path(name)).unwrap())
}

#[test]
fn analogy_file_counts() {
    let data = AnalogyDataset::parse(open("questions-words.txt")).unwrap();
    assert_eq!(data.sections.len(), 14);
    assert_eq!(data.semantic_count(), 8869);
    assert_eq!(data.syntactic_count(), 10675);
    assert_eq!(data.sections[0].name, "capital-common-countries");
    assert_eq!(
        data.sections[0].questions[0],
        ["athens", "greece", "baghdad", "iraq"].map(String::from)
    );
}

#[test]
fn simlex_file_has_999_pairs() {
    let data = SimilarityDataset::parse(open("simlex999.txt")).unwrap();
    assert_eq!(data.pairs.len(), 999);
    assert_eq!(data.pairs[0], ("old".into(), "new".into(), 1.58));
}

#[test]
fn simlex_header_selects_columns() {
    let text = "word1\tword2\tPOS\tSimLex999\tconc\nold\tnew\tA\t1.58\t2.7\nSmart\tintelligent\tA\t9.2\t1.7\n";
    let data = SimilarityDataset::parse(text.as_bytes()).unwrap();
    assert_eq!(
        data.pairs,
        vec![
            ("old".into(), "new".into(), 1.58),
            ("smart".into(), "intelligent".into(), 9.2)
        ]
    );
    assert!(matches!(
        SimilarityDataset::parse("a\tb\tx\n".as_bytes()),
        Err(EvalError::Parse { line: 1, .. })
    ));
}

#[test]
fn analogy_parse_errors_and_default_section() {
    let d = AnalogyDataset::parse("a b c d\n: gram1\nE F G H\n".as_bytes()).unwrap();
    assert_eq!((d.semantic_count(), d.syntactic_count()), (1, 1));
    assert_eq!(d.sections[1].questions[0][0], "e");
    assert!(matches!(
        AnalogyDataset::parse("a b c\n".as_bytes()),
        Err(EvalError::Parse { line: 1, .. })
    ));
}

fn grid_set() -> EmbeddingSet {
    // capital/country pairs offset by a shared direction
    let words = [
        "paris", "france", "rome", "italy", "tokyo", "japan", "big", "bigger", "small", "smaller",
    ];
    let mut m = Vec::new();
    for (i, _) in words.iter().enumerate() {
        let base = (i / 2) as f32;
        let mut row = vec![0.0f32; 8];
        row[(i / 2) % 5] = 1.0 + base * 0.1;
        row[5 + i % 2] = 1.0;
        row[7] = if i >= 6 { 2.0 } else { 0.0 };
        m.extend(row);
    }
    EmbeddingSet::new(words.iter().map(|s| s.to_string()).collect(), m, 8)
}

#[test]
fn analogy_accuracy_uses_attempted_denominators() {
    let set = grid_set();
    let text = ": capital\nparis france rome italy\nrome italy tokyo japan\nparis france berlin germany\n: gram-comparative\nbig bigger small smaller\n";
    let data = AnalogyDataset::parse(text.as_bytes()).unwrap();
    let r = eval_analogy(&set, &data).unwrap();
    assert_eq!(r.semantic_counts(), (2, 2, 1));
    assert_eq!(r.syntactic_counts(), (1, 1, 0));
    assert_eq!((r.semantic_acc, r.syntactic_acc, r.total_acc), (1.0, 1.0, 1.0));
    assert_eq!((r.attempted, r.skipped), (3, 1));
    let shown = r.to_string();
    assert_eq!(shown.lines().count(), 3);
    assert!(shown.contains("semantic") && shown.contains("syntactic") && shown.contains("total"));
}

#[test]
fn spearman_examples() {
    assert!((spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    // ranks (1.5, 1.5, 3) vs (1, 2, 3)
    let r = spearman_rho(&[5.0, 5.0, 7.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12, "{r}");
    assert!(matches!(
        spearman_rho(&[1.0, 1.0], &[1.0, 2.0]),
        Err(EvalError::ZeroVariance)
    ));
    assert!(matches!(
        spearman_rho(&[1.0], &[1.0, 2.0]),
        Err(EvalError::BadLengths(1, 2))
    ));
}

#[test]
fn spearman_matches_brute_force() {
    assert!(spearman_max_error(1000, 77) < 1e-12);
}

#[test]
fn average_ranks_example() {
    assert_eq!(average_ranks(&[10.0, 30.0, 20.0, 30.0]), vec![1.0, 3.5, 2.0, 3.5]);
}

proptest! {
    #[test]
    fn spearman_is_invariant_under_monotone_maps(xs in prop::collection::vec(-100.0f64..100.0, 3..40), ys in prop::collection::vec(-100.0f64..100.0, 3..40)) {
        let n = xs.len().min(ys.len());
        let (xs, ys) = (&xs[..n], &ys[..n]);
        if let Ok(r) = spearman_rho(xs, ys) {
            let mapped: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            prop_assert!((spearman_rho(&mapped, ys).unwrap() - r).abs() < 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            prop_assert!((brute_spearman(xs, ys) - r).abs() < 1e-12);
        }
    }
}

#[test]
fn simlex_on_constructed_vectors() {
    // cos(a_i, b_i) increases with i, human scores too
    let mut words = Vec::new();
    let mut m = Vec::new();
    let mut text = String::new();
    for i in 0..10 {
        let angle = 1.5 - i as f32 * 0.15;
        words.push(format!("a{i}"));
        m.extend([1.0, 0.0]);
        words.push(format!("b{i}"));
        m.extend([angle.cos(), angle.sin()]);
        text.push_str(&format!("a{i}\tb{i}\t{}\n", i as f64 * 0.5));
    }
    text.push_str("zz\ta0\t3.0\n");
    let set = EmbeddingSet::new(words, m, 2);
    let r = eval_simlex(&set, &SimilarityDataset::parse(text.as_bytes()).unwrap()).unwrap();
    assert!((r.rho.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!((r.attempted, r.skipped), (10, 1));
    assert!(r.to_string().starts_with("spearman rho: 1.0000"));
}

#[test]
fn sweep_rows_and_closed_gate() {
    let spec = SyntheticSpec {
        tokens: 8_000,
        seed: 21,
        ..SyntheticSpec::default()
    };
    let fx = fixture(&spec);
    let mut text = String::from(": topics\n");
    for t in 0..spec.topics {
        let o = (t + 1) % spec.topics;
        text.push_str(&format!(
            "{} {} {} {}\n",
            topic_word(t, 0),
            topic_word(t, 1),
            topic_word(o, 0),
            topic_word(o, 1)
        ));
    }
    let data = AnalogyDataset::parse(text.as_bytes()).unwrap();
    let base = TrainConfig {
        mode: Mode::Threshold,
        ..small_config()
    };
    let mut seen = Vec::new();
    let rows = sweep_threshold(&base, &[1.0, 7.0], &fx.corpus, &fx.vocab, &fx.lexicon, &data, |r| {
        seen.push(r.theta)
    })
    .unwrap();
    assert_eq!(seen, vec![1.0, 7.0]);
    let closed = rows[1].result.as_ref().unwrap();
    let cbow = train(
        &fx.corpus,
        &fx.vocab,
        None,
        &TrainConfig {
            mode: Mode::Cbow,
            ..base.clone()
        },
    )
    .unwrap();
    let want = eval_analogy(&cbow.embeddings(&fx.vocab), &data).unwrap();
    assert_eq!(closed, &want);
    assert_eq!(closed.attempted, spec.topics);

    let mut out = Vec::new();
    write_sweep_table(&rows, &mut out).unwrap();
    let table = String::from_utf8(out).unwrap();
    assert_eq!(table.lines().next(), Some(SWEEP_HEADER));
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().nth(2).unwrap().starts_with("7\t"));

    let wrong = TrainConfig {
        mode: Mode::Cbow,
        ..base
    };
    assert!(matches!(
        sweep_threshold(&wrong, &[1.0], &fx.corpus, &fx.vocab, &fx.lexicon, &data, |_| {}),
        Err(EvalError::NotThresholdMode(Mode::Cbow))
    ));
}

#[test]
fn default_grid() {
    let g = default_thetas();
    assert_eq!(g.len(), 14);
    assert_eq!((g[0], g[13]), (0.5, 7.0));
}
