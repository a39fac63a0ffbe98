use std::collections::HashMap;

use super::{Mode, Model, TrainConfig};
use crate::lexicon::{degree_of_truth, gate_threshold, Lexicon};

/// Full-softmax value of the joint objective
/// `sum_i sum_j [ log p(w_i|w_j) + sum_k f(S_jk) log p(w_i|w_k) ]`
/// over every target and every context word within `config.window`
/// (no dynamic shrinking, no subsampling).
///
/// `f` follows the configured mode: 0 for CBOW, the hard gate for threshold,
/// and the expected gate value (the degree of truth) for Bernoulli.
/// Dense in the vocabulary; meant for small test problems.
pub fn exact_objective(model: &Model, tokens: &[u32], lexicon: Option<&Lexicon>, config: &TrainConfig) -> f64 {
    let mut cache: HashMap<u32, Vec<f64>> = HashMap::new();
    let mut log_p = |input: u32, target: u32| -> f64 {
        cache.entry(input).or_insert_with(|| log_softmax_row(model, input))[target as usize]
    };
    let weights = |w: u32| -> Vec<(u32, f64)> { paraphrase_weights(lexicon, w, config) };

    let mut total = 0.0;
    for (i, &target) in tokens.iter().enumerate() {
        let lo = i.saturating_sub(config.window);
        let hi = (i + config.window).min(tokens.len() - 1);
        for (j, &ctx) in tokens.iter().enumerate().take(hi + 1).skip(lo) {
            if j == i {
                continue;
            }
            total += log_p(ctx, target);
            for (k, f) in weights(ctx) {
                if f > 0.0 {
                    total += f * log_p(k, target);
                }
            }
        }
    }
    total
}

fn paraphrase_weights(lexicon: Option<&Lexicon>, w: u32, config: &TrainConfig) -> Vec<(u32, f64)> {
    let Some(lex) = lexicon else {
        return Vec::new();
    };
    let mut out: Vec<(u32, f64)> = Vec::new();
    for e in lex.paraphrases_of(w) {
        if out.iter().any(|(k, _)| *k == e.paraphrase) {
            continue;
        }
        let f = match config.mode {
            Mode::Cbow => 0.0,
            Mode::Threshold => f64::from(u8::from(gate_threshold(e.score, config.theta))),
            Mode::Bernoulli => lex
                .max_score_of(w)
                .and_then(|m| degree_of_truth(e.score, m).ok())
                .unwrap_or(0.0),
        };
        out.push((e.paraphrase, f));
    }
    out
}

fn log_softmax_row(model: &Model, input: u32) -> Vec<f64> {
    let v: Vec<f64> = model.input_row(input).iter().map(|&x| f64::from(x)).collect();
    let logits: Vec<f64> = (0..model.vocab_len() as u32)
        .map(|o| {
            model
                .output_row(o)
                .iter()
                .zip(&v)
                .map(|(&a, &b)| f64::from(a) * b)
                .sum()
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.into_iter().map(|l| l - lse).collect()
}
