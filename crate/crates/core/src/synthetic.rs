//! Small generated corpora and lexicons for demos and tests.
//!
//! Words belong to topics; sentences mix words of one topic with shared
//! function words. The lexicon links words of the same topic with high
//! scores and, for a few "polysemous" words, links across topics with low
//! scores, so a score threshold separates reliable from unreliable pairs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub topics: usize,
    pub words_per_topic: usize,
    pub function_words: usize,
    pub tokens: usize,
    /// Tokens per generated sentence (one topic per sentence).
    pub sentence_len: usize,
    /// Share of tokens drawn from the function words.
    pub function_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            topics: 6,
            words_per_topic: 8,
            function_words: 5,
            tokens: 20_000,
            sentence_len: 12,
            function_rate: 0.3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub text: String,
    /// PPDB 2.0 formatted lexicon rows.
    pub ppdb: String,
    pub topics: Vec<Vec<String>>,
    pub function_words: Vec<String>,
}

pub fn topic_word(topic: usize, i: usize) -> String {
    const STEMS: [&str; 12] = [
        "river", "stone", "cloud", "ember", "maple", "coral", "frost", "amber", "cedar", "delta", "lumen", "quartz",
    ];
    format!("{}{}", STEMS[topic % STEMS.len()], i + topic / STEMS.len() * 100)
}

pub fn generate(spec: &SyntheticSpec) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let topics: Vec<Vec<String>> = (0..spec.topics)
        .map(|t| (0..spec.words_per_topic).map(|i| topic_word(t, i)).collect())
        .collect();
    let function_words: Vec<String> = (0..spec.function_words).map(|i| format!("fw{i}")).collect();

    let mut words: Vec<&str> = Vec::with_capacity(spec.tokens);
    while words.len() < spec.tokens {
        let topic = &topics[rng.gen_range(0..topics.len())];
        for _ in 0..spec.sentence_len.min(spec.tokens - words.len()) {
            let w = if !function_words.is_empty() && rng.gen_bool(spec.function_rate) {
                function_words.choose(&mut rng).unwrap()
            } else {
                topic.choose(&mut rng).unwrap()
            };
            words.push(w);
        }
    }
    let mut text = String::with_capacity(spec.tokens * 8);
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            text.push(if i % 20 == 0 { '\n' } else { ' ' });
        }
        text.push_str(w);
    }
    text.push('\n');

    let relations = ["Equivalence", "ForwardEntailment", "ReverseEntailment"];
    let mut ppdb = String::new();
    let mut row = |a: &str, b: &str, score: f64, rel: &str| {
        ppdb.push_str(&format!(
            "[NN] ||| {a} ||| {b} ||| PPDB2.0Score={score:.4} PPDB1.0Score=1.0 p(e|f)=0.5 ||| 0-0 ||| {rel}\n"
        ));
    };
    for (t, topic) in topics.iter().enumerate() {
        for (i, a) in topic.iter().enumerate() {
            for b in topic.iter().skip(i + 1).take(2) {
                let score = rng.gen_range(3.5..6.5);
                let rel = relations[rng.gen_range(0..relations.len())];
                row(a, b, score, rel);
                row(b, a, score, rel);
            }
        }
        // the first word of each topic also "means" a word of the next topic
        if topics.len() > 1 {
            let other = &topics[(t + 1) % topics.len()][1];
            row(&topic[0], other, rng.gen_range(1.0..3.0), "Equivalence");
        }
    }
    Synthetic {
        text,
        ppdb,
        topics,
        function_words,
    }
}
