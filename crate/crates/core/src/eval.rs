//! Word-analogy accuracy, SimLex-style rank correlation, and threshold sweeps.

use std::fmt;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};
use crate::lexicon::Lexicon;
use crate::trainer::{self, Mode, TrainConfig, TrainError};
use crate::vectors::{EmbeddingSet, VectorsError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("correlation undefined: a ranking has zero variance")]
    ZeroVariance,
    #[error("need at least two values with equal lengths (got {0} and {1})")]
    BadLengths(usize, usize),
    #[error("only {0} pairs could be scored; at least 2 are required")]
    TooFewPairs(usize),
    #[error("threshold sweep requires mode=threshold, got {0}")]
    NotThresholdMode(Mode),
    #[error(transparent)]
    Vectors(#[from] VectorsError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalogySection {
    pub name: String,
    pub semantic: bool,
    pub questions: Vec<[String; 4]>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnalogyDataset {
    pub sections: Vec<AnalogySection>,
}

impl AnalogyDataset {
    /// Parses the `questions-words` format: `: section` headers followed by
    /// four whitespace-separated words per line. Sections whose name starts
    /// with `gram` are syntactic. Tokens are lowercased.
    pub fn parse<R: BufRead>(source: R) -> Result<Self> {
        let mut sections: Vec<AnalogySection> = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix(':') {
                let name = name.trim().to_owned();
                if name.is_empty() {
                    return Err(EvalError::Parse {
                        line: i + 1,
                        msg: "empty section name".into(),
                    });
                }
                sections.push(AnalogySection {
                    semantic: !name.starts_with("gram"),
                    name,
                    questions: Vec::new(),
                });
                continue;
            }
            let words: Vec<String> = trimmed.split_whitespace().map(str::to_lowercase).collect();
            let q: [String; 4] = words.try_into().map_err(|w: Vec<String>| EvalError::Parse {
                line: i + 1,
                msg: format!("expected 4 words, found {}", w.len()),
            })?;
            if sections.is_empty() {
                sections.push(AnalogySection {
                    name: "default".into(),
                    semantic: true,
                    questions: Vec::new(),
                });
            }
            sections.last_mut().unwrap().questions.push(q);
        }
        Ok(AnalogyDataset { sections })
    }

    pub fn semantic_count(&self) -> usize {
        self.sections
            .iter()
            .filter(|s| s.semantic)
            .map(|s| s.questions.len())
            .sum()
    }

    pub fn syntactic_count(&self) -> usize {
        self.sections
            .iter()
            .filter(|s| !s.semantic)
            .map(|s| s.questions.len())
            .sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimilarityDataset {
    pub pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    /// Tab-separated pairs. A header row naming `word1`, `word2` and
    /// `SimLex999` selects columns; otherwise the first three columns are
    /// used. Lines starting with `#` are comments.
    pub fn parse<R: BufRead>(source: R) -> Result<Self> {
        let mut cols: Option<(usize, usize, usize)> = None;
        let mut pairs = Vec::new();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split('\t').map(str::trim).collect();
            if cols.is_none() {
                let find = |name: &str| fields.iter().position(|f| f.eq_ignore_ascii_case(name));
                if let (Some(a), Some(b), Some(s)) = (find("word1"), find("word2"), find("SimLex999")) {
                    cols = Some((a, b, s));
                    continue;
                }
                cols = Some((0, 1, 2));
            }
            let (a, b, s) = cols.unwrap();
            let bad = |msg: String| EvalError::Parse { line: i + 1, msg };
            let get = |c: usize| {
                fields
                    .get(c)
                    .copied()
                    .ok_or_else(|| bad(format!("missing column {}", c + 1)))
            };
            let score: f64 = get(s)?.parse().map_err(|_| bad(format!("bad score {:?}", fields[s])))?;
            pairs.push((get(a)?.to_lowercase(), get(b)?.to_lowercase(), score));
        }
        Ok(SimilarityDataset { pairs })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionResult {
    pub name: String,
    pub semantic: bool,
    pub correct: usize,
    pub attempted: usize,
    pub skipped: usize,
}

/// Accuracy / correlation results. Accuracies are `correct / attempted`
/// (0 when nothing was attempted).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub sections: Vec<SectionResult>,
    pub semantic_acc: f64,
    pub syntactic_acc: f64,
    pub total_acc: f64,
    pub attempted: usize,
    pub skipped: usize,
    pub rho: Option<f64>,
}

impl EvalReport {
    fn scope(&self, pick: impl Fn(&SectionResult) -> bool) -> (usize, usize, usize) {
        self.sections
            .iter()
            .filter(|s| pick(s))
            .fold((0, 0, 0), |(c, a, k), s| {
                (c + s.correct, a + s.attempted, k + s.skipped)
            })
    }

    pub fn semantic_counts(&self) -> (usize, usize, usize) {
        self.scope(|s| s.semantic)
    }

    pub fn syntactic_counts(&self) -> (usize, usize, usize) {
        self.scope(|s| !s.semantic)
    }

    pub fn total_counts(&self) -> (usize, usize, usize) {
        self.scope(|_| true)
    }

    fn from_sections(sections: Vec<SectionResult>) -> Self {
        let mut r = EvalReport {
            sections,
            ..Default::default()
        };
        let acc = |(c, a, _): (usize, usize, usize)| if a == 0 { 0.0 } else { c as f64 / a as f64 };
        r.semantic_acc = acc(r.semantic_counts());
        r.syntactic_acc = acc(r.syntactic_counts());
        r.total_acc = acc(r.total_counts());
        let (_, a, k) = r.total_counts();
        r.attempted = a;
        r.skipped = k;
        r
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(rho) = self.rho {
            return write!(
                f,
                "spearman rho: {rho:.4}  (pairs scored: {}, skipped: {})",
                self.attempted, self.skipped
            );
        }
        for (label, (c, a, k), acc) in [
            ("semantic", self.semantic_counts(), self.semantic_acc),
            ("syntactic", self.syntactic_counts(), self.syntactic_acc),
            ("total", self.total_counts(), self.total_acc),
        ] {
            writeln!(
                f,
                "{label:<10} accuracy: {:6.2}%  (correct {c} / attempted {a}, skipped {k})",
                acc * 100.0
            )?;
        }
        Ok(())
    }
}

fn worker_count(items: usize) -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(items.max(1))
}

/// Scores every question of `data`. Questions with an out-of-vocabulary
/// word are skipped; a question is correct when the analogy query returns
/// the fourth word.
pub fn eval_analogy(set: &EmbeddingSet, data: &AnalogyDataset) -> Result<EvalReport> {
    let normalized;
    let set = if set.is_normalized() {
        set
    } else {
        normalized = set.clone().normalized();
        &normalized
    };
    let mut sections = Vec::with_capacity(data.sections.len());
    for section in &data.sections {
        let ids: Vec<[u32; 4]> = section
            .questions
            .iter()
            .filter_map(|q| {
                let mut out = [0u32; 4];
                for (slot, w) in out.iter_mut().zip(q) {
                    *slot = set.index_of(w)?;
                }
                Some(out)
            })
            .collect();
        let correct = count_correct(set, &ids)?;
        sections.push(SectionResult {
            name: section.name.clone(),
            semantic: section.semantic,
            correct,
            attempted: ids.len(),
            skipped: section.questions.len() - ids.len(),
        });
    }
    Ok(EvalReport::from_sections(sections))
}

fn count_correct(set: &EmbeddingSet, ids: &[[u32; 4]]) -> Result<usize> {
    let solve = |chunk: &[[u32; 4]]| -> Result<usize> {
        let mut n = 0;
        for q in chunk {
            if set.analogy_query(q[0], q[1], q[2])? == Some(q[3]) {
                n += 1;
            }
        }
        Ok(n)
    };
    let workers = worker_count(ids.len());
    if workers <= 1 || ids.len() < 64 {
        return solve(ids);
    }
    let chunk = ids.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = ids.chunks(chunk).map(|c| s.spawn(move || solve(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("analogy worker panicked"))
            .sum()
    })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation with average-rank tie handling.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(EvalError::BadLengths(xs.len(), ys.len()));
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman correlation between model cosines and human scores over the
/// pairs whose words are both in the vocabulary.
pub fn eval_simlex(set: &EmbeddingSet, data: &SimilarityDataset) -> Result<EvalReport> {
    let mut model = Vec::new();
    let mut human = Vec::new();
    for (a, b, score) in &data.pairs {
        if let (Some(i), Some(j)) = (set.index_of(a), set.index_of(b)) {
            model.push(f64::from(set.cosine(i, j)));
            human.push(*score);
        }
    }
    if model.len() < 2 {
        return Err(EvalError::TooFewPairs(model.len()));
    }
    let rho = spearman_rho(&model, &human)?;
    Ok(EvalReport {
        attempted: model.len(),
        skipped: data.pairs.len() - model.len(),
        rho: Some(rho),
        ..Default::default()
    })
}

/// Default sweep grid: 0.5, 1.0, ..., 7.0.
pub fn default_thetas() -> Vec<f64> {
    (1..=14).map(|i| i as f64 * 0.5).collect()
}

#[derive(Debug)]
pub struct SweepRow {
    pub theta: f64,
    pub result: Result<EvalReport>,
}

/// Trains and evaluates one threshold-mode model per theta. A failing row
/// is recorded and the sweep moves on.
pub fn sweep_threshold(
    base: &TrainConfig,
    thetas: &[f64],
    corpus: &Corpus,
    vocab: &Vocabulary,
    lexicon: &Lexicon,
    data: &AnalogyDataset,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    if base.mode != Mode::Threshold {
        return Err(EvalError::NotThresholdMode(base.mode));
    }
    let mut rows = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let config = TrainConfig { theta, ..base.clone() };
        let result = trainer::train(corpus, vocab, Some(lexicon), &config)
            .map_err(EvalError::from)
            .and_then(|model| eval_analogy(&model.embeddings(vocab).normalized(), data));
        let row = SweepRow { theta, result };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

/// Header of the tab-separated sweep table.
pub const SWEEP_HEADER: &str = "theta\tsem\tsyn\ttotal\tattempted\tskipped";

/// One TSV line per row; accuracies in percent with two decimals, failed
/// rows carry `NA` and the error message as a trailing comment column.
pub fn write_sweep_table<W: Write>(rows: &[SweepRow], mut sink: W) -> io::Result<()> {
    writeln!(sink, "{SWEEP_HEADER}")?;
    for row in rows {
        writeln!(sink, "{}", sweep_line(row))?;
    }
    sink.flush()
}

pub fn sweep_line(row: &SweepRow) -> String {
    match &row.result {
        Ok(r) => format!(
            "{}\t{:.2}\t{:.2}\t{:.2}\t{}\t{}",
            row.theta,
            r.semantic_acc * 100.0,
            r.syntactic_acc * 100.0,
            r.total_acc * 100.0,
            r.attempted,
            r.skipped
        ),
        Err(e) => format!("{}\tNA\tNA\tNA\tNA\tNA\t# {e}", row.theta),
    }
}
