use std::collections::{BTreeMap, BTreeSet};

use paravec::corpus::{build_vocabulary, Vocabulary};
use paravec::lexicon::*;
use paravec::trainer::{LexiconLayer, Mode, TrainConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vocab() -> Vocabulary {
    let words = ["big", "large", "huge", "small", "tiny", "dog", "hound", "cat"];
    let tokens: Vec<&str> = words
        .iter()
        .enumerate()
        .flat_map(|(i, w)| std::iter::repeat_n(*w, 20 - i))
        .collect();
    build_vocabulary(&tokens, 1).unwrap()
}

fn row(a: &str, b: &str, score: f64, label: &str) -> String {
    format!("[JJ] ||| {a} ||| {b} ||| PPDB1.0Score=2.1 PPDB2.0Score={score} AGigaSim=0.5 ||| 0-0 ||| {label}\n")
}

const FIXTURE: [(&str, &str, f64, &str); 10] = [
    ("big", "large", 4.2, "Equivalence"),
    ("big", "large", 3.1, "Equivalence"),
    ("big", "large", 2.0, "ForwardEntailment"),
    ("big", "huge", 3.3, "ReverseEntailment"),
    ("Big", "HUGE", 3.9, "ReverseEntailment"),
    ("small", "tiny", 5.0, "Equivalence"),
    ("dog", "hound", 2.4, "ForwardEntailment"),
    ("dog", "cat", 1.2, "Exclusion"),
    ("dog", "dog", 6.0, "Equivalence"),
    ("cat", "the cat", 3.0, "Equivalence"),
];

#[test]
fn ten_row_fixture_matches_brute_force() {
    let v = vocab();
    let text: String = FIXTURE.iter().map(|&(a, b, s, l)| row(a, b, s, l)).collect();
    let allowed = RelationType::default_set();
    let (lex, stats) = parse_ppdb(text.as_bytes(), &allowed, &v).unwrap();

    // brute force: max score per (head, paraphrase, relation)
    let mut want: BTreeMap<(u32, u32, RelationType), f64> = BTreeMap::new();
    for &(a, b, s, l) in &FIXTURE {
        let rel: RelationType = l.parse().unwrap();
        let (a, b) = (a.to_lowercase(), b.to_lowercase());
        let (Some(h), Some(p)) = (v.index_of(&a), v.index_of(&b)) else {
            continue;
        };
        if h == p || !allowed.contains(&rel) {
            continue;
        }
        let e = want.entry((h, p, rel)).or_insert(s);
        *e = e.max(s);
    }
    let got: BTreeMap<(u32, u32, RelationType), f64> = lex
        .iter()
        .map(|(h, e)| ((h, e.paraphrase, e.relation), e.score))
        .collect();
    assert_eq!(got, want);
    assert_eq!(lex.entry_count(), 5);
    assert_eq!(stats.rows, 10);
    assert_eq!(stats.retained, 5);
    assert_eq!(stats.duplicates, 2);
    assert_eq!(stats.self_pairs, 1);
    assert_eq!(stats.multi_word, 1);
    assert_eq!(stats.relation_filtered, 1);

    let big = v.index_of("big").unwrap();
    let large = v.index_of("large").unwrap();
    let huge = v.index_of("huge").unwrap();
    let ps: Vec<(u32, f64)> = lex
        .paraphrases_of(big)
        .iter()
        .map(|e| (e.paraphrase, e.score))
        .collect();
    assert_eq!(ps, vec![(large, 4.2), (huge, 3.9), (large, 2.0)]);
    assert_eq!(lex.max_score_of(big), Some(4.2));
    assert_eq!(lex.max_score(), Some(5.0));
}

#[test]
fn relation_filter_and_bad_rows() {
    let v = vocab();
    let text = format!(
        "{}{}{}{}",
        row("dog", "cat", 1.2, "Exclusion"),
        "garbage line\n",
        "[NN] ||| dog ||| hound ||| PPDB1.0Score=1 ||| 0-0 ||| Equivalence\n",
        row("dog", "hound", 2.0, "Mystery"),
    );
    let only_excl: BTreeSet<_> = [RelationType::Exclusion].into();
    let (lex, stats) = parse_ppdb(text.as_bytes(), &only_excl, &v).unwrap();
    assert_eq!(lex.entry_count(), 1);
    assert_eq!((stats.malformed, stats.missing_score, stats.unknown_label), (1, 1, 1));
    let err = parse_ppdb(text.as_bytes(), &RelationType::default_set(), &v).unwrap_err();
    assert!(matches!(err, LexiconError::Empty(_)));
}

#[test]
fn relation_lists() {
    let set = RelationType::parse_list("Equivalence, forward ,ReverseEntailment").unwrap();
    assert_eq!(set, RelationType::default_set());
    assert!(RelationType::parse_list("equivalence,bogus").is_err());
    for r in RelationType::ALL {
        assert_eq!(r.ppdb_label().parse::<RelationType>().unwrap(), r);
    }
}

#[test]
fn gate_examples() {
    assert!(gate_threshold(3.81, 3.8));
    assert!(!gate_threshold(3.8, 3.8));
    assert_eq!(degree_of_truth(2.0, 4.0).unwrap(), 0.5);
    assert!(degree_of_truth(1.0, 0.0).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(gate_bernoulli(1.5, &mut rng).is_err());
    assert!((0..1000).all(|_| gate_bernoulli(1.0, &mut rng).unwrap()));
    assert!((0..1000).all(|_| !gate_bernoulli(0.0, &mut rng).unwrap()));
    let hits = (0..100_000).filter(|_| gate_bernoulli(0.3, &mut rng).unwrap()).count();
    assert!((hits as f64 / 1e5 - 0.3).abs() < 0.01);
}

fn arb_raw() -> impl Strategy<Value = Vec<(u32, u32, f64, usize)>> {
    prop::collection::vec((0u32..8, 0u32..8, 0.01f64..7.0, 0usize..6), 0..40)
}

fn build(raw: &[(u32, u32, f64, usize)]) -> Lexicon {
    Lexicon::from_entries(
        8,
        raw.iter().map(|&(h, p, s, r)| {
            (
                h,
                ParaphraseEntry {
                    paraphrase: p,
                    score: s,
                    relation: RelationType::ALL[r],
                },
            )
        }),
    )
}

proptest! {
    #[test]
    fn dedup_keeps_the_max_of_each_key(raw in arb_raw()) {
        let lex = build(&raw);
        let mut want: BTreeMap<(u32, u32, usize), f64> = BTreeMap::new();
        for &(h, p, s, r) in &raw {
            if h != p {
                let e = want.entry((h, p, r)).or_insert(s);
                *e = e.max(s);
            }
        }
        let got: BTreeMap<(u32, u32, usize), f64> = lex
            .iter()
            .map(|(h, e)| ((h, e.paraphrase, RelationType::ALL.iter().position(|&x| x == e.relation).unwrap()), e.score))
            .collect();
        prop_assert_eq!(got, want);
        for w in 0..8 {
            let list = lex.paraphrases_of(w);
            prop_assert!(list.windows(2).all(|p| p[0].score >= p[1].score));
            prop_assert_eq!(lex.max_score_of(w), list.first().map(|e| e.score));
        }
    }

    #[test]
    fn raising_theta_only_removes_paraphrases(raw in arb_raw(), a in 0.0f64..7.0, b in 0.0f64..7.0) {
        let lex = build(&raw);
        let (lo, hi) = (a.min(b), a.max(b));
        let layer = |theta| LexiconLayer::new(Some(&lex), 8, &TrainConfig { mode: Mode::Threshold, theta, ..TrainConfig::default() }).unwrap();
        let (l, h) = (layer(lo), layer(hi));
        for w in 0..8 {
            prop_assert!(h.admitted(w).iter().all(|k| l.admitted(w).contains(k)));
            prop_assert_eq!(h.exclusion(w).len(), h.admitted(w).len());
        }
        let closed = layer(7.0);
        prop_assert!((0..8).all(|w| closed.admitted(w).is_empty()));
    }

    #[test]
    fn degrees_of_truth_are_in_unit_interval(raw in arb_raw()) {
        let lex = build(&raw);
        let layer = LexiconLayer::new(Some(&lex), 8, &TrainConfig { mode: Mode::Bernoulli, ..TrainConfig::default() }).unwrap();
        for w in 0..8 {
            let c = layer.candidates(w);
            prop_assert!(c.iter().all(|&(_, x)| x > 0.0 && x <= 1.0));
            if !c.is_empty() {
                prop_assert_eq!(c[0].1, 1.0);
            }
        }
    }
}
