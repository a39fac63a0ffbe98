//! Negative-sampling training with an optional paraphrase lexicon layer.
//!
//! Every context word predicts the target on its own; in threshold and
//! Bernoulli modes each admitted paraphrase of that context word is an
//! additional input predicting the same target with the same learning rate.

mod kernel;
mod model;
mod noise;
mod objective;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{keep_probability, Corpus, CorpusError, Vocabulary};
use crate::lexicon::{degree_of_truth, gate_bernoulli, gate_threshold, Lexicon};

pub use kernel::{bag_step, exact_sigmoid, pair_step, train_pair, DenseRows, RowStore, Scratch, Sigmoid};
pub use model::{init_model, Model};
pub use noise::{build_noise_table, sample_negative, NoiseTable};
pub use objective::exact_objective;

use kernel::SharedMatrix;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("mode {0} requires a lexicon")]
    MissingLexicon(Mode),
    #[error("lexicon covers {lexicon} words but the vocabulary has {vocab}")]
    LexiconMismatch { lexicon: usize, vocab: usize },
    #[error("non-finite value while updating input word {input} against output word {output}")]
    Numeric { input: u32, output: u32 },
    #[error("cannot draw a negative for target {target}: every candidate is excluded")]
    SamplingExhausted { target: u32 },
    #[error("corpus contains no in-vocabulary tokens")]
    EmptyCorpus,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Plain CBOW, no lexicon.
    Cbow,
    /// Paraphrases pass iff their score exceeds theta.
    Threshold,
    /// Paraphrases pass with probability equal to their degree of truth.
    Bernoulli,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cbow => "cbow",
            Mode::Threshold => "threshold",
            Mode::Bernoulli => "bernoulli",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cbow" => Ok(Mode::Cbow),
            "threshold" => Ok(Mode::Threshold),
            "bernoulli" | "cbofp" => Ok(Mode::Bernoulli),
            other => Err(format!(
                "unknown mode {other:?} (expected cbow, threshold or bernoulli)"
            )),
        }
    }
}

/// How context inputs reach the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextMode {
    /// Each context word (and admitted paraphrase) predicts the target alone.
    PerWord,
    /// All context words and admitted paraphrases are averaged into one hidden vector.
    Averaged,
}

impl FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "per-word" | "perword" => Ok(ContextMode::PerWord),
            "averaged" | "average" | "mean" => Ok(ContextMode::Averaged),
            other => Err(format!(
                "unknown context mode {other:?} (expected per-word or averaged)"
            )),
        }
    }
}

impl fmt::Display for ContextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextMode::PerWord => "per-word",
            ContextMode::Averaged => "averaged",
        })
    }
}

/// Whose paraphrase set is kept out of the negative samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionSide {
    Input,
    Target,
}

impl FromStr for ExclusionSide {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "input" => Ok(ExclusionSide::Input),
            "target" => Ok(ExclusionSide::Target),
            other => Err(format!("unknown exclusion side {other:?} (expected input or target)")),
        }
    }
}

impl fmt::Display for ExclusionSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionSide::Input => "input",
            ExclusionSide::Target => "target",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub theta: f64,
    pub dim: usize,
    /// Maximum one-sided context width.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub subsample_t: f64,
    pub seed: u64,
    pub threads: usize,
    pub noise_exponent: f64,
    pub noise_table_size: usize,
    pub context: ContextMode,
    pub exclusion_side: ExclusionSide,
    /// Use the exact logistic function instead of the lookup table.
    pub exact_sigmoid: bool,
    /// Report progress to standard error.
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::Cbow,
            theta: 3.8,
            dim: 200,
            window: 8,
            negatives: 25,
            epochs: 25,
            initial_lr: 0.05,
            subsample_t: 1e-4,
            seed: 1,
            threads: 1,
            noise_exponent: 0.75,
            noise_table_size: 100_000_000,
            context: ContextMode::PerWord,
            exclusion_side: ExclusionSide::Input,
            exact_sigmoid: false,
            verbose: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_owned()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.initial_lr > 0.0) || !self.initial_lr.is_finite() {
            return bad("initial learning rate must be positive");
        }
        if !(self.subsample_t >= 0.0) {
            return bad("subsample threshold must be non-negative");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if self.theta.is_nan() {
            return bad("theta must be a number");
        }
        Ok(())
    }

    /// Key/value dump of every setting, in a stable order.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        vec![
            ("mode", self.mode.to_string()),
            ("theta", self.theta.to_string()),
            ("dim", self.dim.to_string()),
            ("window", self.window.to_string()),
            ("negatives", self.negatives.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr", self.initial_lr.to_string()),
            ("subsample", self.subsample_t.to_string()),
            ("seed", self.seed.to_string()),
            ("threads", self.threads.to_string()),
            ("noise-exponent", self.noise_exponent.to_string()),
            ("noise-table-size", self.noise_table_size.to_string()),
            ("context", self.context.to_string()),
            ("exclude-side", self.exclusion_side.to_string()),
            ("exact-sigmoid", self.exact_sigmoid.to_string()),
        ]
    }
}

/// Counters collected over a training run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainStats {
    /// In-vocabulary corpus tokens read, over all epochs.
    pub tokens: u64,
    /// Tokens that survived subsampling.
    pub retained: u64,
    /// Context-word updates.
    pub context_updates: u64,
    /// Paraphrase-input updates admitted by the gate.
    pub paraphrase_updates: u64,
    pub negatives_drawn: u64,
    /// Negatives equal to the pair's target or inside its exclusion set.
    pub negative_violations: u64,
}

impl TrainStats {
    fn merge(&mut self, o: &TrainStats) {
        self.tokens += o.tokens;
        self.retained += o.retained;
        self.context_updates += o.context_updates;
        self.paraphrase_updates += o.paraphrase_updates;
        self.negatives_drawn += o.negatives_drawn;
        self.negative_violations += o.negative_violations;
    }
}

/// What the lexicon layer offers for each word under the configured mode.
///
/// `exclusion[w]` is the sorted set of words kept out of the negatives when
/// `w` is the input: the paraphrases of `w` the gate can admit. With the gate
/// closed this set is empty, so threshold mode at theta above every score
/// reproduces plain CBOW exactly.
#[derive(Debug, Clone)]
pub struct LexiconLayer {
    /// Paraphrases always admitted (threshold mode).
    admitted: Vec<Vec<u32>>,
    /// Paraphrases with their admission probability (Bernoulli mode).
    candidates: Vec<Vec<(u32, f64)>>,
    exclusion: Vec<Vec<u32>>,
}

impl LexiconLayer {
    pub fn new(lexicon: Option<&Lexicon>, vocab_len: usize, config: &TrainConfig) -> Result<Self> {
        let empty = LexiconLayer {
            admitted: vec![Vec::new(); vocab_len],
            candidates: vec![Vec::new(); vocab_len],
            exclusion: vec![Vec::new(); vocab_len],
        };
        let lexicon = match (config.mode, lexicon) {
            (Mode::Cbow, _) => return Ok(empty),
            (mode, None) => return Err(TrainError::MissingLexicon(mode)),
            (_, Some(l)) => l,
        };
        if lexicon.vocab_len() != vocab_len {
            return Err(TrainError::LexiconMismatch {
                lexicon: lexicon.vocab_len(),
                vocab: vocab_len,
            });
        }
        let mut layer = empty;
        for w in 0..vocab_len as u32 {
            // entries are sorted by descending score, so the first
            // occurrence of a paraphrase carries its best score
            let mut seen = Vec::new();
            for e in lexicon.paraphrases_of(w) {
                if seen.contains(&e.paraphrase) {
                    continue;
                }
                seen.push(e.paraphrase);
                match config.mode {
                    Mode::Threshold => {
                        if gate_threshold(e.score, config.theta) {
                            layer.admitted[w as usize].push(e.paraphrase);
                        }
                    }
                    Mode::Bernoulli => {
                        let max = lexicon.max_score_of(w).expect("non-empty set has a maximum");
                        let x = degree_of_truth(e.score, max).map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
                        layer.candidates[w as usize].push((e.paraphrase, x));
                    }
                    Mode::Cbow => unreachable!(),
                }
            }
            let mut excl: Vec<u32> = match config.mode {
                Mode::Threshold => layer.admitted[w as usize].clone(),
                _ => layer.candidates[w as usize].iter().map(|c| c.0).collect(),
            };
            excl.sort_unstable();
            layer.exclusion[w as usize] = excl;
        }
        Ok(layer)
    }

    pub fn admitted(&self, word: u32) -> &[u32] {
        &self.admitted[word as usize]
    }

    pub fn candidates(&self, word: u32) -> &[(u32, f64)] {
        &self.candidates[word as usize]
    }

    pub fn exclusion(&self, word: u32) -> &[u32] {
        &self.exclusion[word as usize]
    }
}

/// Retained tokens per training "sentence"; context windows never cross it.
const SENTENCE_LEN: usize = 1000;
const MAX_LR_INTERVAL: u64 = 10_000;
const MIN_LR_FRACTION: f64 = 1e-4;

struct Shared<'a> {
    vocab: &'a Vocabulary,
    config: &'a TrainConfig,
    layer: LexiconLayer,
    noise: NoiseTable,
    sigmoid: Sigmoid,
    keep: Vec<f64>,
    inputs: SharedMatrix,
    outputs: SharedMatrix,
    processed: AtomicU64,
    total_work: u64,
    lr_interval: u64,
    stop: AtomicBool,
}

impl Shared<'_> {
    fn learning_rate(&self, processed: u64) -> f32 {
        decayed_lr(self.config.initial_lr, processed, self.total_work) as f32
    }
}

/// Linear decay from `initial` towards zero over `total` tokens, floored at
/// `initial * 1e-4`.
pub fn decayed_lr(initial: f64, processed: u64, total: u64) -> f64 {
    let frac = 1.0 - processed as f64 / (total as f64 + 1.0);
    initial * frac.max(MIN_LR_FRACTION)
}

struct Worker<'s, 'a> {
    shared: &'s Shared<'a>,
    id: usize,
    rng: ChaCha8Rng,
    scratch: Scratch<f32>,
    negatives: Vec<u32>,
    bag: Vec<u32>,
    bag_exclusion: Vec<u32>,
    stats: TrainStats,
    lr: f32,
    pending: u64,
}

impl<'s, 'a> Worker<'s, 'a> {
    fn new(shared: &'s Shared<'a>, id: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(shared.config.seed);
        rng.set_stream(id as u64);
        Worker {
            shared,
            id,
            rng,
            scratch: Scratch::new(shared.config.dim),
            negatives: Vec::with_capacity(shared.config.negatives),
            bag: Vec::new(),
            bag_exclusion: Vec::new(),
            stats: TrainStats::default(),
            lr: shared.learning_rate(0),
            pending: 0,
        }
    }

    fn run(&mut self, corpus: &Corpus, segment: std::ops::Range<u64>) -> Result<()> {
        let cfg = self.shared.config;
        let started = cfg.verbose.then(std::time::Instant::now);
        let mut sentence = Vec::with_capacity(SENTENCE_LEN);
        for _ in 0..cfg.epochs {
            let mut stream = corpus.stream_segment(segment.clone())?;
            loop {
                if self.shared.stop.load(Ordering::Relaxed) {
                    return Ok(());
                }
                let token = stream.next_token()?;
                let done = token.is_none();
                if let Some(tok) = token {
                    if let Some(w) = self.shared.vocab.index_of(&tok) {
                        self.count_token(started);
                        let p = self.shared.keep[w as usize];
                        if p >= 1.0 || self.rng.gen::<f64>() < p {
                            sentence.push(w);
                        }
                    }
                }
                if sentence.len() >= SENTENCE_LEN || (done && !sentence.is_empty()) {
                    self.train_sentence(&sentence)?;
                    sentence.clear();
                }
                if done {
                    break;
                }
            }
        }
        self.flush_count(started);
        Ok(())
    }

    fn count_token(&mut self, started: Option<std::time::Instant>) {
        self.stats.tokens += 1;
        self.pending += 1;
        if self.pending >= self.shared.lr_interval {
            self.flush_count(started);
        }
    }

    fn flush_count(&mut self, started: Option<std::time::Instant>) {
        let before = self.shared.processed.fetch_add(self.pending, Ordering::Relaxed);
        let now = before + self.pending;
        self.pending = 0;
        self.lr = self.shared.learning_rate(now);
        if let (Some(t0), 0) = (started, self.id) {
            let secs = t0.elapsed().as_secs_f64().max(1e-9);
            eprint!(
                "\rlr: {:.6}  progress: {:6.2}%  words/sec: {:.0}   ",
                self.lr,
                100.0 * now as f64 / self.shared.total_work.max(1) as f64,
                now as f64 / secs
            );
            if now >= self.shared.total_work {
                eprintln!();
            }
        }
    }

    fn train_sentence(&mut self, sentence: &[u32]) -> Result<()> {
        let window = self.shared.config.window;
        for pos in 0..sentence.len() {
            self.stats.retained += 1;
            let target = sentence[pos];
            let b = self.rng.gen_range(1..=window);
            let lo = pos.saturating_sub(b);
            let hi = (pos + b).min(sentence.len() - 1);
            match self.shared.config.context {
                ContextMode::PerWord => {
                    for (j, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                        if j != pos {
                            self.train_context(context, target)?;
                        }
                    }
                }
                ContextMode::Averaged => self.train_bag(sentence, pos, lo, hi)?,
            }
        }
        Ok(())
    }

    fn exclusion_for(&self, input: u32, target: u32) -> &'s [u32] {
        match self.shared.config.exclusion_side {
            ExclusionSide::Input => self.shared.layer.exclusion(input),
            ExclusionSide::Target => self.shared.layer.exclusion(target),
        }
    }

    fn train_context(&mut self, context: u32, target: u32) -> Result<()> {
        self.update(context, target)?;
        self.stats.context_updates += 1;
        let layer = &self.shared.layer;
        match self.shared.config.mode {
            Mode::Cbow => {}
            Mode::Threshold => {
                for &k in layer.admitted(context) {
                    self.update(k, target)?;
                    self.stats.paraphrase_updates += 1;
                }
            }
            Mode::Bernoulli => {
                for &(k, x) in layer.candidates(context) {
                    if gate_bernoulli(x, &mut self.rng).expect("degree of truth lies in [0, 1]") {
                        self.update(k, target)?;
                        self.stats.paraphrase_updates += 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn draw_negatives(&mut self, target: u32, excluded: &[u32]) -> Result<()> {
        self.negatives.clear();
        for _ in 0..self.shared.config.negatives {
            let n = sample_negative(&self.shared.noise, target, excluded, &mut self.rng)?;
            if n == target || excluded.binary_search(&n).is_ok() {
                self.stats.negative_violations += 1;
            }
            debug_assert!(n != target && excluded.binary_search(&n).is_err());
            self.negatives.push(n);
        }
        self.stats.negatives_drawn += self.negatives.len() as u64;
        Ok(())
    }

    fn update(&mut self, input: u32, target: u32) -> Result<()> {
        let excluded = self.exclusion_for(input, target);
        self.draw_negatives(target, excluded)?;
        let sigmoid = &self.shared.sigmoid;
        let mut inputs = &self.shared.inputs;
        let mut outputs = &self.shared.outputs;
        pair_step(
            &mut inputs,
            &mut outputs,
            input,
            target,
            &self.negatives,
            self.lr,
            &|x: f32| sigmoid.eval(x),
            &mut self.scratch,
        )
    }

    fn train_bag(&mut self, sentence: &[u32], pos: usize, lo: usize, hi: usize) -> Result<()> {
        let target = sentence[pos];
        let mut bag = std::mem::take(&mut self.bag);
        let mut excl = std::mem::take(&mut self.bag_exclusion);
        bag.clear();
        excl.clear();
        for (j, &c) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
            if j == pos {
                continue;
            }
            bag.push(c);
            self.stats.context_updates += 1;
            let inputs_before = bag.len();
            match self.shared.config.mode {
                Mode::Cbow => {}
                Mode::Threshold => bag.extend_from_slice(self.shared.layer.admitted(c)),
                Mode::Bernoulli => {
                    for &(k, x) in self.shared.layer.candidates(c) {
                        if gate_bernoulli(x, &mut self.rng).expect("degree of truth lies in [0, 1]") {
                            bag.push(k);
                        }
                    }
                }
            }
            self.stats.paraphrase_updates += (bag.len() - inputs_before) as u64;
            if self.shared.config.exclusion_side == ExclusionSide::Input {
                excl.extend_from_slice(self.shared.layer.exclusion(c));
            }
        }
        if self.shared.config.exclusion_side == ExclusionSide::Target {
            excl.extend_from_slice(self.shared.layer.exclusion(target));
        }
        excl.sort_unstable();
        excl.dedup();
        let result = if bag.is_empty() {
            Ok(())
        } else {
            self.draw_negatives(target, &excl).and_then(|_| {
                let sigmoid = &self.shared.sigmoid;
                let mut inputs = &self.shared.inputs;
                let mut outputs = &self.shared.outputs;
                bag_step(
                    &mut inputs,
                    &mut outputs,
                    &bag,
                    target,
                    &self.negatives,
                    self.lr,
                    &|x: f32| sigmoid.eval(x),
                    &mut self.scratch,
                )
            })
        };
        self.bag = bag;
        self.bag_exclusion = excl;
        result
    }
}

pub fn train(corpus: &Corpus, vocab: &Vocabulary, lexicon: Option<&Lexicon>, config: &TrainConfig) -> Result<Model> {
    train_with_stats(corpus, vocab, lexicon, config).map(|(m, _)| m)
}

/// Trains from a fresh [`init_model`] and returns the model with run counters.
pub fn train_with_stats(
    corpus: &Corpus,
    vocab: &Vocabulary,
    lexicon: Option<&Lexicon>,
    config: &TrainConfig,
) -> Result<(Model, TrainStats)> {
    config.validate()?;
    let model = init_model(vocab, config.dim, config.seed);
    train_from(model, corpus, vocab, lexicon, config)
}

/// Continues training `model` (which must match the vocabulary and dimension).
pub fn train_from(
    model: Model,
    corpus: &Corpus,
    vocab: &Vocabulary,
    lexicon: Option<&Lexicon>,
    config: &TrainConfig,
) -> Result<(Model, TrainStats)> {
    config.validate()?;
    if model.vocab_len() != vocab.len() || model.dim() != config.dim {
        return Err(TrainError::InvalidConfig(format!(
            "model is {}x{} but vocabulary/config need {}x{}",
            model.vocab_len(),
            model.dim(),
            vocab.len(),
            config.dim
        )));
    }
    if vocab.total_tokens() == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    if config.noise_table_size < vocab.len() {
        return Err(TrainError::InvalidConfig(format!(
            "noise table size {} is smaller than the vocabulary ({})",
            config.noise_table_size,
            vocab.len()
        )));
    }
    let layer = LexiconLayer::new(lexicon, vocab.len(), config)?;
    let total_work = config.epochs as u64 * vocab.total_tokens();
    let shared = Shared {
        vocab,
        config,
        layer,
        noise: build_noise_table(vocab, config.noise_exponent, config.noise_table_size),
        sigmoid: if config.exact_sigmoid {
            Sigmoid::Exact
        } else {
            Sigmoid::table()
        },
        keep: vocab
            .counts()
            .iter()
            .map(|&c| keep_probability(c, vocab.total_tokens(), config.subsample_t))
            .collect(),
        inputs: SharedMatrix::from_slice(&model.input, config.dim),
        outputs: SharedMatrix::from_slice(&model.output, config.dim),
        processed: AtomicU64::new(0),
        total_work,
        lr_interval: (total_work / 1000).clamp(1, MAX_LR_INTERVAL),
        stop: AtomicBool::new(false),
    };
    drop(model);

    let segments = corpus.segments(config.threads)?;
    let stats = if config.threads == 1 {
        let mut w = Worker::new(&shared, 0);
        w.run(corpus, segments[0].clone())?;
        w.stats
    } else {
        let first_error: Mutex<Option<TrainError>> = Mutex::new(None);
        let totals = Mutex::new(TrainStats::default());
        std::thread::scope(|scope| {
            for (id, seg) in segments.iter().enumerate() {
                let (shared, first_error, totals) = (&shared, &first_error, &totals);
                scope.spawn(move || {
                    let mut w = Worker::new(shared, id);
                    if let Err(e) = w.run(corpus, seg.clone()) {
                        shared.stop.store(true, Ordering::Relaxed);
                        first_error.lock().unwrap().get_or_insert(e);
                    }
                    totals.lock().unwrap().merge(&w.stats);
                });
            }
        });
        if let Some(e) = first_error.into_inner().unwrap() {
            return Err(e);
        }
        totals.into_inner().unwrap()
    };
    if stats.tokens == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    let Shared { inputs, outputs, .. } = shared;
    let model = Model::from_parts(inputs.into_vec(), outputs.into_vec(), config.dim);
    if !model.is_finite() {
        return Err(TrainError::Numeric {
            input: u32::MAX,
            output: u32::MAX,
        });
    }
    Ok((model, stats))
}
