//! Browser playground: trains small models on a generated corpus and
//! answers neighbour and analogy queries.

use paravec::corpus::{build_vocabulary_from_corpus, Corpus, Vocabulary};
use paravec::lexicon::{gate_threshold, parse_ppdb, Lexicon, RelationType};
use paravec::synthetic::{generate, Synthetic, SyntheticSpec};
use paravec::trainer::{train_with_stats, Mode, TrainConfig};
use paravec::vectors::EmbeddingSet;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct WordInfo {
    pub word: String,
    /// Topic index, or -1 for function words.
    pub topic: i32,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrainSummary {
    pub mode: String,
    pub theta: f64,
    pub tokens: u64,
    pub context_updates: u64,
    pub paraphrase_updates: u64,
    /// Mean cosine between words of the same topic.
    pub within_topic: f64,
    /// Mean cosine between words of different topics.
    pub across_topics: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Neighbour {
    pub word: String,
    pub cosine: f32,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GateRow {
    pub head: String,
    pub paraphrase: String,
    pub score: f64,
    pub relation: String,
    pub admitted: bool,
}

pub struct Playground {
    synth: Synthetic,
    corpus: Corpus,
    vocab: Vocabulary,
    lexicon: Lexicon,
    vectors: Option<EmbeddingSet>,
}

impl Playground {
    pub fn new(seed: u64) -> Result<Self, String> {
        let spec = SyntheticSpec {
            tokens: 30_000,
            seed,
            ..SyntheticSpec::default()
        };
        let synth = generate(&spec);
        let corpus = Corpus::from_bytes(synth.text.clone().into_bytes());
        let (vocab, _) = build_vocabulary_from_corpus(&corpus, 1).map_err(|e| e.to_string())?;
        let relations = RelationType::ALL.into_iter().collect();
        let (lexicon, _) = parse_ppdb(synth.ppdb.as_bytes(), &relations, &vocab).map_err(|e| e.to_string())?;
        Ok(Playground {
            synth,
            corpus,
            vocab,
            lexicon,
            vectors: None,
        })
    }

    fn topic_of(&self, word: &str) -> i32 {
        self.synth
            .topics
            .iter()
            .position(|t| t.iter().any(|w| w == word))
            .map_or(-1, |t| t as i32)
    }

    pub fn words(&self) -> Vec<WordInfo> {
        self.vocab
            .words()
            .iter()
            .map(|w| WordInfo {
                word: w.clone(),
                topic: self.topic_of(w),
            })
            .collect()
    }

    pub fn train(
        &mut self,
        mode: &str,
        theta: f64,
        dim: usize,
        epochs: usize,
        seed: u64,
    ) -> Result<TrainSummary, String> {
        let mode: Mode = mode.parse()?;
        let config = TrainConfig {
            mode,
            theta,
            dim,
            window: 5,
            subsample_t: 1e-3,
            negatives: 5,
            epochs,
            seed,
            noise_table_size: 1_000_000,
            ..TrainConfig::default()
        };
        let lexicon = (mode != Mode::Cbow).then_some(&self.lexicon);
        let (model, stats) =
            train_with_stats(&self.corpus, &self.vocab, lexicon, &config).map_err(|e| e.to_string())?;
        let set = model.embeddings(&self.vocab).normalized();
        let topics: Vec<i32> = self.vocab.words().iter().map(|w| self.topic_of(w)).collect();
        let (mut same, mut ns, mut diff, mut nd) = (0.0, 0u32, 0.0, 0u32);
        for a in 0..set.len() {
            for b in a + 1..set.len() {
                if topics[a] < 0 || topics[b] < 0 {
                    continue;
                }
                let c = f64::from(set.cosine(a as u32, b as u32));
                if topics[a] == topics[b] {
                    same += c;
                    ns += 1;
                } else {
                    diff += c;
                    nd += 1;
                }
            }
        }
        self.vectors = Some(set);
        Ok(TrainSummary {
            mode: mode.to_string(),
            theta,
            tokens: stats.tokens,
            context_updates: stats.context_updates,
            paraphrase_updates: stats.paraphrase_updates,
            within_topic: same / f64::from(ns.max(1)),
            across_topics: diff / f64::from(nd.max(1)),
        })
    }

    fn trained(&self) -> Result<&EmbeddingSet, String> {
        self.vectors.as_ref().ok_or_else(|| "train a model first".to_owned())
    }

    fn lookup(&self, word: &str) -> Result<u32, String> {
        self.vocab
            .index_of(&word.trim().to_lowercase())
            .ok_or_else(|| format!("{word:?} is not in the vocabulary"))
    }

    pub fn nearest(&self, word: &str, k: usize) -> Result<Vec<Neighbour>, String> {
        let set = self.trained()?;
        let w = self.lookup(word)?;
        let hits = set.nearest(set.row(w), &[w], k).map_err(|e| e.to_string())?;
        Ok(hits
            .into_iter()
            .map(|(i, cosine)| Neighbour {
                word: set.word(i).to_owned(),
                cosine,
            })
            .collect())
    }

    /// Word closest to `b - a + c`.
    pub fn analogy(&self, a: &str, b: &str, c: &str) -> Result<Option<String>, String> {
        let set = self.trained()?;
        let (a, b, c) = (self.lookup(a)?, self.lookup(b)?, self.lookup(c)?);
        let hit = set.analogy_query(a, b, c).map_err(|e| e.to_string())?;
        Ok(hit.map(|i| set.word(i).to_owned()))
    }

    /// Lexicon entries with the threshold gate's decision at `theta`.
    pub fn gate_table(&self, theta: f64) -> Vec<GateRow> {
        self.lexicon
            .iter()
            .map(|(h, e)| GateRow {
                head: self.vocab.word(h).to_owned(),
                paraphrase: self.vocab.word(e.paraphrase).to_owned(),
                score: e.score,
                relation: e.relation.to_string(),
                admitted: gate_threshold(e.score, theta),
            })
            .collect()
    }

    /// Interleaved (x, y) coordinates of every word on the two leading
    /// principal axes of the trained vectors.
    pub fn projection(&self) -> Result<Vec<f32>, String> {
        let set = self.trained()?;
        Ok(project_2d(set.matrix(), set.dim()))
    }
}

/// Projects rows onto their top two principal components (power iteration
/// with deflation on the covariance matrix).
pub fn project_2d(matrix: &[f32], dim: usize) -> Vec<f32> {
    let n = matrix.len() / dim;
    if n == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0f64; dim];
    for row in matrix.chunks(dim) {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += f64::from(x) / n as f64;
        }
    }
    let centred: Vec<Vec<f64>> = matrix
        .chunks(dim)
        .map(|r| r.iter().zip(&mean).map(|(&x, m)| f64::from(x) - m).collect())
        .collect();
    let mut cov = vec![vec![0.0f64; dim]; dim];
    for r in &centred {
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += r[i] * r[j];
            }
        }
    }
    let trace: f64 = (0..dim).map(|i| cov[i][i]).sum();
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for k in 0..2.min(dim) {
        let mut v: Vec<f64> = (0..dim)
            .map(|i| if i == k { 1.0 } else { 0.5 / (i + 1) as f64 })
            .collect();
        for _ in 0..200 {
            let mut next: Vec<f64> = cov
                .iter()
                .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect();
            for a in &axes {
                let d: f64 = next.iter().zip(a).map(|(x, y)| x * y).sum();
                next.iter_mut().zip(a).for_each(|(x, y)| *x -= d * y);
            }
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= 1e-9 * trace {
                // no variance left along this axis
                v = vec![0.0; dim];
                break;
            }
            v = next.into_iter().map(|x| x / norm).collect();
        }
        axes.push(v);
    }
    let mut out = Vec::with_capacity(n * 2);
    for r in &centred {
        for k in 0..2 {
            let p = axes.get(k).map_or(0.0, |a| r.iter().zip(a).map(|(x, y)| x * y).sum());
            out.push(p as f32);
        }
    }
    out
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// JavaScript-facing handle. Results are returned as JSON strings.
#[wasm_bindgen]
pub struct Demo {
    inner: Playground,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<Demo, JsError> {
        Playground::new(u64::from(seed))
            .map(|inner| Demo { inner })
            .map_err(js_err)
    }

    pub fn words(&self) -> String {
        json(&self.inner.words())
    }

    pub fn train(&mut self, mode: &str, theta: f64, dim: u32, epochs: u32, seed: u32) -> Result<String, JsError> {
        self.inner
            .train(mode, theta, dim as usize, epochs as usize, u64::from(seed))
            .map(|s| json(&s))
            .map_err(js_err)
    }

    pub fn nearest(&self, word: &str, k: u32) -> Result<String, JsError> {
        self.inner.nearest(word, k as usize).map(|n| json(&n)).map_err(js_err)
    }

    pub fn analogy(&self, a: &str, b: &str, c: &str) -> Result<String, JsError> {
        self.inner.analogy(a, b, c).map(|n| json(&n)).map_err(js_err)
    }

    #[wasm_bindgen(js_name = gateTable)]
    pub fn gate_table(&self, theta: f64) -> String {
        json(&self.inner.gate_table(theta))
    }

    pub fn projection(&self) -> Result<Vec<f32>, JsError> {
        self.inner.projection().map_err(js_err)
    }
}
