//! Paraphrase lexicon: PPDB ingestion, relation filtering, and the two gates
//! (hard score threshold and Bernoulli draw on the degree of truth).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::corpus::Vocabulary;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown relation type {0:?}")]
    UnknownRelation(String),
    #[error("lexicon is empty after filtering ({0})")]
    Empty(ParseStats),
    #[error("degree of truth undefined: set maximum {0} is not positive")]
    NonPositiveMax(f64),
    #[error("Bernoulli parameter {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
}

pub type Result<T> = std::result::Result<T, LexiconError>;

/// The six PPDB 2.0 entailment labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationType {
    Equivalence,
    ForwardEntailment,
    ReverseEntailment,
    Exclusion,
    OtherRelated,
    Independent,
}

impl RelationType {
    pub const ALL: [RelationType; 6] = [
        RelationType::Equivalence,
        RelationType::ForwardEntailment,
        RelationType::ReverseEntailment,
        RelationType::Exclusion,
        RelationType::OtherRelated,
        RelationType::Independent,
    ];

    /// Equivalence plus both entailment directions.
    pub fn default_set() -> BTreeSet<RelationType> {
        [
            RelationType::Equivalence,
            RelationType::ForwardEntailment,
            RelationType::ReverseEntailment,
        ]
        .into_iter()
        .collect()
    }

    /// Label as it appears in the last field of a PPDB 2.0 row.
    pub fn ppdb_label(self) -> &'static str {
        match self {
            RelationType::Equivalence => "Equivalence",
            RelationType::ForwardEntailment => "ForwardEntailment",
            RelationType::ReverseEntailment => "ReverseEntailment",
            RelationType::Exclusion => "Exclusion",
            RelationType::OtherRelated => "OtherRelated",
            RelationType::Independent => "Independent",
        }
    }

    /// Parses a comma-separated relation list, e.g. `equivalence,forward-entailment`.
    pub fn parse_list(list: &str) -> Result<BTreeSet<RelationType>> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.ppdb_label())
    }
}

impl FromStr for RelationType {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match key.as_str() {
            "equivalence" => RelationType::Equivalence,
            "forwardentailment" | "forward" => RelationType::ForwardEntailment,
            "reverseentailment" | "reverse" => RelationType::ReverseEntailment,
            "exclusion" | "exclusive" => RelationType::Exclusion,
            "otherrelated" | "other" => RelationType::OtherRelated,
            "independent" => RelationType::Independent,
            _ => return Err(LexiconError::UnknownRelation(s.to_owned())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParaphraseEntry {
    pub paraphrase: u32,
    pub score: f64,
    pub relation: RelationType,
}

/// Per-word paraphrase sets keyed by vocabulary index.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<Vec<ParaphraseEntry>>,
    max_score_of: Vec<Option<f64>>,
}

/// Row accounting from [`parse_ppdb`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub rows: u64,
    pub malformed: u64,
    pub unknown_label: u64,
    pub missing_score: u64,
    pub relation_filtered: u64,
    pub multi_word: u64,
    pub out_of_vocabulary: u64,
    pub self_pairs: u64,
    pub duplicates: u64,
    pub retained: u64,
}

impl fmt::Display for ParseStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rows={} retained={} malformed={} unknown_label={} missing_score={} \
             relation_filtered={} multi_word={} oov={} self={} duplicates={}",
            self.rows,
            self.retained,
            self.malformed,
            self.unknown_label,
            self.missing_score,
            self.relation_filtered,
            self.multi_word,
            self.out_of_vocabulary,
            self.self_pairs,
            self.duplicates
        )
    }
}

const SCORE_FEATURE: &str = "PPDB2.0Score";

impl Lexicon {
    /// Builds a lexicon from raw (head, entry) pairs, deduplicating on
    /// (head, paraphrase, relation) with the maximum score, dropping self
    /// pairs and non-positive scores.
    pub fn from_entries(vocab_size: usize, raw: impl IntoIterator<Item = (u32, ParaphraseEntry)>) -> Self {
        let mut map: HashMap<(u32, u32, RelationType), f64> = HashMap::new();
        for (head, e) in raw {
            if head == e.paraphrase || !(e.score > 0.0) || !e.score.is_finite() {
                continue;
            }
            assert!((head as usize) < vocab_size && (e.paraphrase as usize) < vocab_size);
            let slot = map.entry((head, e.paraphrase, e.relation)).or_insert(e.score);
            if e.score > *slot {
                *slot = e.score;
            }
        }
        let mut entries = vec![Vec::new(); vocab_size];
        for ((head, paraphrase, relation), score) in map {
            entries[head as usize].push(ParaphraseEntry {
                paraphrase,
                score,
                relation,
            });
        }
        for list in &mut entries {
            list.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then(a.paraphrase.cmp(&b.paraphrase))
                    .then(a.relation.cmp(&b.relation))
            });
        }
        let max_score_of = entries.iter().map(|l| l.first().map(|e| e.score)).collect();
        Lexicon { entries, max_score_of }
    }

    /// Number of head-word slots (equals the vocabulary size).
    pub fn vocab_len(&self) -> usize {
        self.entries.len()
    }

    pub fn entry_count(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entry_count() == 0
    }

    pub fn paraphrases_of(&self, word: u32) -> &[ParaphraseEntry] {
        &self.entries[word as usize]
    }

    pub fn max_score_of(&self, word: u32) -> Option<f64> {
        self.max_score_of[word as usize]
    }

    /// Largest score over the whole lexicon.
    pub fn max_score(&self) -> Option<f64> {
        self.max_score_of.iter().flatten().copied().reduce(f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &ParaphraseEntry)> {
        self.entries
            .iter()
            .enumerate()
            .flat_map(|(w, l)| l.iter().map(move |e| (w as u32, e)))
    }
}

pub fn paraphrases_of(lexicon: &Lexicon, word: u32) -> &[ParaphraseEntry] {
    lexicon.paraphrases_of(word)
}

enum RowOutcome {
    Keep(u32, ParaphraseEntry),
    Skip(fn(&mut ParseStats)),
}

fn classify_row(line: &str, allowed: &BTreeSet<RelationType>, vocab: &Vocabulary) -> RowOutcome {
    let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
    if fields.len() < 6 {
        return RowOutcome::Skip(|s| s.malformed += 1);
    }
    let (phrase, paraphrase, features, label) = (fields[1], fields[2], fields[3], fields[5]);
    let relation = match label.parse::<RelationType>() {
        Ok(r) => r,
        Err(_) => return RowOutcome::Skip(|s| s.unknown_label += 1),
    };
    let score = features
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(SCORE_FEATURE)?.strip_prefix('='))
        .map(str::parse::<f64>);
    let score = match score {
        None => return RowOutcome::Skip(|s| s.missing_score += 1),
        Some(Err(_)) => return RowOutcome::Skip(|s| s.malformed += 1),
        Some(Ok(v)) if !(v > 0.0) || !v.is_finite() => return RowOutcome::Skip(|s| s.malformed += 1),
        Some(Ok(v)) => v,
    };
    if !allowed.contains(&relation) {
        return RowOutcome::Skip(|s| s.relation_filtered += 1);
    }
    if phrase.is_empty()
        || paraphrase.is_empty()
        || phrase.contains(char::is_whitespace)
        || paraphrase.contains(char::is_whitespace)
    {
        return RowOutcome::Skip(|s| s.multi_word += 1);
    }
    let (head, para) = (phrase.to_lowercase(), paraphrase.to_lowercase());
    let (Some(h), Some(p)) = (vocab.index_of(&head), vocab.index_of(&para)) else {
        return RowOutcome::Skip(|s| s.out_of_vocabulary += 1);
    };
    if h == p {
        return RowOutcome::Skip(|s| s.self_pairs += 1);
    }
    RowOutcome::Keep(
        h,
        ParaphraseEntry {
            paraphrase: p,
            score,
            relation,
        },
    )
}

/// Reads a PPDB 2.0 dump (`LHS ||| phrase ||| paraphrase ||| features ||| alignment ||| label`)
/// into a lexicon over `vocab`, keeping single-token rows whose label is in `allowed`.
pub fn parse_ppdb<R: BufRead>(
    source: R,
    allowed: &BTreeSet<RelationType>,
    vocab: &Vocabulary,
) -> Result<(Lexicon, ParseStats)> {
    let mut stats = ParseStats::default();
    let mut kept = Vec::new();
    for line in source.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.rows += 1;
        match classify_row(&line, allowed, vocab) {
            RowOutcome::Keep(h, e) => kept.push((h, e)),
            RowOutcome::Skip(bump) => bump(&mut stats),
        }
    }
    let candidates = kept.len() as u64;
    let lexicon = Lexicon::from_entries(vocab.len(), kept);
    stats.retained = lexicon.entry_count() as u64;
    stats.duplicates = candidates - stats.retained;
    if lexicon.is_empty() {
        return Err(LexiconError::Empty(stats));
    }
    Ok((lexicon, stats))
}

/// Threshold node: passes a paraphrase iff its score is strictly above `theta`.
#[inline]
pub fn gate_threshold(score: f64, theta: f64) -> bool {
    score > theta
}

/// Score normalized by the maximum score in the head word's paraphrase set.
pub fn degree_of_truth(score: f64, max_in_set: f64) -> Result<f64> {
    if !(max_in_set > 0.0) {
        return Err(LexiconError::NonPositiveMax(max_in_set));
    }
    Ok(score / max_in_set)
}

/// Draws from Bernoulli(x).
pub fn gate_bernoulli<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<bool> {
    if !(0.0..=1.0).contains(&x) {
        return Err(LexiconError::ProbabilityOutOfRange(x));
    }
    // x == 1 must never consume a false outcome; gen::<f64>() is in [0, 1)
    Ok(rng.gen::<f64>() < x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::from_counts(words.iter().enumerate().map(|(i, w)| (w.to_string(), 100 - i as u64)))
    }

    fn row(a: &str, b: &str, score: f64, label: &str) -> String {
        format!("[NN] ||| {a} ||| {b} ||| PPDB2.0Score={score} PPDB1.0Score=1.2 p(e|f)=0.1 ||| 0-0 ||| {label}")
    }

    #[test]
    fn relation_names() {
        assert_eq!(
            "ForwardEntailment".parse::<RelationType>().unwrap(),
            RelationType::ForwardEntailment
        );
        assert_eq!(
            "forward-entailment".parse::<RelationType>().unwrap(),
            RelationType::ForwardEntailment
        );
        assert_eq!(
            "other_related".parse::<RelationType>().unwrap(),
            RelationType::OtherRelated
        );
        assert!("Synonym".parse::<RelationType>().is_err());
        let set = RelationType::parse_list("equivalence, reverse").unwrap();
        assert_eq!(set.len(), 2);
        for r in RelationType::ALL {
            assert_eq!(r.ppdb_label().parse::<RelationType>().unwrap(), r);
        }
    }

    #[test]
    fn self_paraphrase_dropped() {
        let v = vocab(&["big", "large"]);
        let text = [
            row("big", "big", 4.0, "Equivalence"),
            row("big", "large", 3.0, "Equivalence"),
        ]
        .join("\n");
        let (lex, stats) = parse_ppdb(text.as_bytes(), &RelationType::default_set(), &v).unwrap();
        assert_eq!(stats.self_pairs, 1);
        assert_eq!(lex.entry_count(), 1);
    }

    #[test]
    fn duplicate_keeps_max_score() {
        let v = vocab(&["big", "large", "huge"]);
        let text = [
            row("big", "large", 2.1, "Equivalence"),
            row("big", "large", 3.3, "Equivalence"),
            row("big", "large", 1.0, "ForwardEntailment"),
        ]
        .join("\n");
        let (lex, stats) = parse_ppdb(text.as_bytes(), &RelationType::default_set(), &v).unwrap();
        let big = v.index_of("big").unwrap();
        let list = lex.paraphrases_of(big);
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].score, 3.3);
        assert_eq!(list[0].relation, RelationType::Equivalence);
        assert_eq!(stats.duplicates, 1);
        assert_eq!(lex.max_score_of(big), Some(3.3));
    }

    #[test]
    fn filtering_and_counts() {
        let v = vocab(&["big", "large", "small"]);
        let text = [
            row("big", "large", 3.0, "Equivalence"),
            row("big", "small", 3.0, "Exclusion"),
            row("big", "very large", 3.0, "Equivalence"),
            row("big", "gigantic", 3.0, "Equivalence"),
            row("big", "large", 3.0, "Synonymy"),
            "garbage line".to_owned(),
            "[NN] ||| big ||| large ||| p(e|f)=0.1 ||| 0-0 ||| Equivalence".to_owned(),
        ]
        .join("\n");
        let (lex, stats) = parse_ppdb(text.as_bytes(), &RelationType::default_set(), &v).unwrap();
        assert_eq!(lex.entry_count(), 1);
        assert_eq!(stats.rows, 7);
        assert_eq!(stats.relation_filtered, 1);
        assert_eq!(stats.multi_word, 1);
        assert_eq!(stats.out_of_vocabulary, 1);
        assert_eq!(stats.unknown_label, 1);
        assert_eq!(stats.malformed, 1);
        assert_eq!(stats.missing_score, 1);
    }

    #[test]
    fn empty_lexicon_is_an_error() {
        let v = vocab(&["big"]);
        let text = row("big", "large", 3.0, "Equivalence");
        assert!(matches!(
            parse_ppdb(text.as_bytes(), &RelationType::default_set(), &v),
            Err(LexiconError::Empty(_))
        ));
    }

    #[test]
    fn paraphrase_order_is_score_then_index() {
        let v = vocab(&["a", "b", "c", "d"]);
        let text = [
            row("a", "d", 2.0, "Equivalence"),
            row("a", "c", 2.0, "Equivalence"),
            row("a", "b", 5.0, "ReverseEntailment"),
        ]
        .join("\n");
        let (lex, _) = parse_ppdb(text.as_bytes(), &RelationType::default_set(), &v).unwrap();
        let ids: Vec<u32> = lex.paraphrases_of(0).iter().map(|e| e.paraphrase).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        assert!(paraphrases_of(&lex, 3).is_empty());
        assert_eq!(lex.max_score_of(3), None);
        assert_eq!(lex.paraphrases_of(0), lex.paraphrases_of(0));
    }

    #[test]
    fn threshold_gate() {
        assert!(gate_threshold(3.6, 3.5));
        assert!(!gate_threshold(3.4, 3.5));
        assert!(!gate_threshold(3.5, 3.5));
        for s in [0.01, 3.0, 6.99] {
            assert!(!gate_threshold(s, 7.0));
        }
    }

    #[test]
    fn degree_values() {
        assert_eq!(degree_of_truth(4.0, 4.0).unwrap(), 1.0);
        assert_eq!(degree_of_truth(3.5, 7.0).unwrap(), 0.5);
        assert_eq!(degree_of_truth(2.1, 4.2).unwrap(), 0.5);
        assert!(degree_of_truth(1.0, 0.0).is_err());
    }

    #[test]
    fn bernoulli_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| gate_bernoulli(1.0, &mut rng).unwrap()));
        assert!((0..1000).all(|_| !gate_bernoulli(0.0, &mut rng).unwrap()));
        assert!(gate_bernoulli(1.5, &mut rng).is_err());
        assert!(gate_bernoulli(-0.1, &mut rng).is_err());
        let n = 100_000;
        let hits = (0..n).filter(|_| gate_bernoulli(0.5, &mut rng).unwrap()).count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.5).abs() < 0.01, "rate {rate}");
    }
}
