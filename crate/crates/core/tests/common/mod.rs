#![allow(dead_code)]

use paravec::corpus::{build_vocabulary_from_corpus, Corpus, Vocabulary};
use paravec::lexicon::{parse_ppdb, Lexicon, RelationType};
use paravec::synthetic::{generate, Synthetic, SyntheticSpec};
use paravec::trainer::TrainConfig;

pub struct Fixture {
    pub synth: Synthetic,
    pub corpus: Corpus,
    pub vocab: Vocabulary,
    pub lexicon: Lexicon,
}

pub fn fixture(spec: &SyntheticSpec) -> Fixture {
    let synth = generate(spec);
    let corpus = Corpus::from_bytes(synth.text.clone().into_bytes());
    let (vocab, _) = build_vocabulary_from_corpus(&corpus, 1).unwrap();
    let (lexicon, _) = parse_ppdb(synth.ppdb.as_bytes(), &RelationType::ALL.into_iter().collect(), &vocab).unwrap();
    Fixture {
        synth,
        corpus,
        vocab,
        lexicon,
    }
}

/// Small, fast settings for tests.
pub fn small_config() -> TrainConfig {
    TrainConfig {
        dim: 16,
        window: 4,
        negatives: 5,
        epochs: 1,
        noise_table_size: 100_000,
        ..TrainConfig::default()
    }
}

pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub mod oracles {
    use paravec::corpus::{Corpus, Vocabulary};
    use paravec::eval::spearman_rho;
    use paravec::lexicon::{Lexicon, ParaphraseEntry, RelationType};
    use paravec::trainer::{
        exact_objective, exact_sigmoid, init_model, pair_step, train_with_stats, DenseRows, Mode, NoiseTable, Scratch,
        TrainConfig,
    };
    use paravec::vectors::{EmbeddingSet, Format};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn log_sigmoid(x: f64) -> f64 {
        -(1.0 + (-x).exp()).ln()
    }

    /// `log s(v'_t.h) + sum_n log s(-v'_n.h)` with `params = [h, v'_t, v'_n...]`.
    fn pair_loss(params: &[f64], dim: usize) -> f64 {
        let h = &params[..dim];
        let rows: Vec<&[f64]> = params[dim..].chunks(dim).collect();
        let d = |r: &[f64]| r.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
        log_sigmoid(d(rows[0])) + rows[1..].iter().map(|r| log_sigmoid(-d(r))).sum::<f64>()
    }

    /// Largest relative error between one lr=1 update and the central
    /// finite-difference gradient of the pair objective.
    pub fn gradient_max_rel_error(instances: usize, dim: usize, negatives: usize, seed: u64) -> f64 {
        const H: f64 = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = negatives + 4;
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            let inputs: Vec<f64> = (0..vocab * dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let outputs: Vec<f64> = (0..vocab * dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let mut words: Vec<u32> = (0..vocab as u32).collect();
            words.shuffle(&mut rng);
            let (input, target, negs) = (words[0], words[1], &words[2..2 + negatives]);

            let row = |m: &[f64], w: u32| m[w as usize * dim..(w as usize + 1) * dim].to_vec();
            let mut params = row(&inputs, input);
            params.extend(row(&outputs, target));
            for &n in negs {
                params.extend(row(&outputs, n));
            }
            let numeric: Vec<f64> = (0..params.len())
                .map(|i| {
                    let mut p = params.clone();
                    p[i] += H;
                    let up = pair_loss(&p, dim);
                    p[i] -= 2.0 * H;
                    let down = pair_loss(&p, dim);
                    (up - down) / (2.0 * H)
                })
                .collect();

            let mut ins = DenseRows::new(inputs.clone(), dim);
            let mut outs = DenseRows::new(outputs.clone(), dim);
            let mut scratch = Scratch::new(dim);
            pair_step(
                &mut ins,
                &mut outs,
                input,
                target,
                negs,
                1.0f64,
                &exact_sigmoid::<f64>,
                &mut scratch,
            )
            .unwrap();
            let mut analytic: Vec<f64> = ins.row(input).iter().zip(&params[..dim]).map(|(a, b)| a - b).collect();
            for (k, &w) in std::iter::once(&target).chain(negs).enumerate() {
                let before = &params[dim * (k + 1)..dim * (k + 2)];
                analytic.extend(outs.row(w).iter().zip(before).map(|(a, b)| a - b));
            }
            let scale = numeric.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
            let err = analytic
                .iter()
                .zip(&numeric)
                .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
            worst = worst.max(err / scale);
        }
        worst
    }

    /// Toy problem for the objective checks: 500 tokens over 24 words,
    /// 10 lexicon entries with scores in [1, 6].
    pub fn toy_problem(seed: u64) -> (Vocabulary, Vec<u32>, Lexicon, Corpus) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words: Vec<String> = (0..24).map(|i| format!("w{i:02}")).collect();
        // two clusters so there is structure to learn
        let tokens: Vec<&String> = (0..500)
            .map(|i| {
                let half = if (i / 10) % 2 == 0 { 0 } else { 12 };
                &words[half + rng.gen_range(0..12)]
            })
            .collect();
        let text = tokens.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ");
        let vocab = paravec::corpus::build_vocabulary(&tokens, 1).unwrap();
        let ids: Vec<u32> = tokens.iter().map(|w| vocab.index_of(w).unwrap()).collect();
        let mut raw = Vec::new();
        while raw.len() < 10 {
            // paraphrases come from the same cluster, like real ones would
            let half = rng.gen_range(0..2) * 12;
            let a = vocab.index_of(&words[half + rng.gen_range(0..12)]).unwrap();
            let b = vocab.index_of(&words[half + rng.gen_range(0..12)]).unwrap();
            if a == b
                || raw
                    .iter()
                    .any(|&(h, e): &(u32, ParaphraseEntry)| h == a && e.paraphrase == b)
            {
                continue;
            }
            let entry = ParaphraseEntry {
                paraphrase: b,
                score: rng.gen_range(1.0..6.0),
                relation: RelationType::Equivalence,
            };
            raw.push((a, entry));
        }
        let lexicon = Lexicon::from_entries(vocab.len(), raw);
        assert_eq!(lexicon.entry_count(), 10);
        (vocab, ids, lexicon, Corpus::from_bytes(text.into_bytes()))
    }

    pub fn toy_config(mode: Mode) -> TrainConfig {
        TrainConfig {
            mode,
            theta: 0.5,
            dim: 10,
            window: 3,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.05,
            subsample_t: 0.0,
            seed: 11,
            noise_table_size: 10_000,
            exact_sigmoid: true,
            ..TrainConfig::default()
        }
    }

    /// Exact objective at initialization and after training.
    pub fn objective_before_after(mode: Mode, seed: u64) -> (f64, f64) {
        let (vocab, ids, lexicon, corpus) = toy_problem(seed);
        let config = toy_config(mode);
        let lex = (mode != Mode::Cbow).then_some(&lexicon);
        let before = exact_objective(&init_model(&vocab, config.dim, config.seed), &ids, lex, &config);
        let (model, _) = train_with_stats(&corpus, &vocab, lex, &config).unwrap();
        (before, exact_objective(&model, &ids, lex, &config))
    }

    /// Largest absolute gap between empirical draw shares and `count^0.75` shares.
    pub fn sampler_max_deviation(counts: &[u64], draws: usize, seed: u64) -> f64 {
        let table = NoiseTable::from_counts(counts, 0.75, 1_000_000);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = vec![0usize; counts.len()];
        for _ in 0..draws {
            hits[table.draw(&mut rng) as usize] += 1;
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        hits.iter()
            .zip(&weights)
            .map(|(&h, w)| (h as f64 / draws as f64 - w / total).abs())
            .fold(0.0, f64::max)
    }

    /// Binary vector files from cbow mode and from threshold mode with theta 7.
    pub fn gate_closed_outputs(fx: &super::Fixture, config: &TrainConfig) -> (Vec<u8>, Vec<u8>) {
        let run = |mode: Mode| {
            let config = TrainConfig {
                mode,
                theta: 7.0,
                threads: 1,
                ..config.clone()
            };
            let lex = (mode != Mode::Cbow).then_some(&fx.lexicon);
            let (model, _) = train_with_stats(&fx.corpus, &fx.vocab, lex, &config).unwrap();
            let mut buf = Vec::new();
            model.embeddings(&fx.vocab).save(Format::Binary, &mut buf).unwrap();
            buf
        };
        (run(Mode::Cbow), run(Mode::Threshold))
    }

    /// Textbook Spearman: average ranks, then Pearson on the ranks.
    pub fn brute_spearman(xs: &[f64], ys: &[f64]) -> f64 {
        fn ranks(v: &[f64]) -> Vec<f64> {
            v.iter()
                .map(|&x| {
                    let below = v.iter().filter(|&&y| y < x).count() as f64;
                    let equal = v.iter().filter(|&&y| y == x).count() as f64;
                    below + (equal + 1.0) / 2.0
                })
                .collect()
        }
        let (rx, ry) = (ranks(xs), ranks(ys));
        let n = rx.len() as f64;
        let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    /// Largest |spearman_rho - brute force| over random instances, half of
    /// them drawn from a few values so ties are common.
    pub fn spearman_max_error(instances: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut done = 0;
        while done < instances {
            let n = rng.gen_range(3..60);
            let tied = done % 2 == 0;
            let draw = |rng: &mut ChaCha8Rng| -> f64 {
                if tied {
                    f64::from(rng.gen_range(0..5u8))
                } else {
                    rng.gen_range(-10.0..10.0)
                }
            };
            let xs: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let ys: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let Ok(rho) = spearman_rho(&xs, &ys) else {
                continue; // constant sample
            };
            worst = worst.max((rho - brute_spearman(&xs, &ys)).abs());
            done += 1;
        }
        worst
    }

    /// Brute-force analogy: scan every word outside {a, b, c}, keep the first
    /// maximum of cos(x, b - a + c) over unit vectors.
    pub fn brute_analogy(set: &EmbeddingSet, a: u32, b: u32, c: u32) -> Option<u32> {
        let unit = |w: u32| -> Vec<f64> {
            let r: Vec<f64> = set.row(w).iter().map(|&x| f64::from(x)).collect();
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter().map(|x| if n > 0.0 { x / n } else { 0.0 }).collect()
        };
        let (ua, ub, uc) = (unit(a), unit(b), unit(c));
        let q: Vec<f64> = (0..set.dim()).map(|i| ub[i] - ua[i] + uc[i]).collect();
        let mut best: Option<(u32, f64)> = None;
        for w in 0..set.len() as u32 {
            if w == a || w == b || w == c {
                continue;
            }
            let s: f64 = unit(w).iter().zip(&q).map(|(x, y)| x * y).sum();
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((w, s));
            }
        }
        best.map(|(w, _)| w)
    }

    pub fn random_set(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingSet {
        let words = (0..n).map(|i| format!("v{i}")).collect();
        let matrix = (0..n * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        EmbeddingSet::new(words, matrix, dim)
    }

    /// Number of (set, question) cases where analogy_query disagrees with the
    /// brute-force scan, over `sets` random sets of 30 words.
    pub fn analogy_mismatches(sets: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mismatches = 0;
        for _ in 0..sets {
            let dim = rng.gen_range(2..12);
            let set = random_set(&mut rng, 30, dim);
            for _ in 0..10 {
                let mut idx: Vec<u32> = (0..30).collect();
                idx.shuffle(&mut rng);
                let (a, b, c) = (idx[0], idx[1], idx[2]);
                if set.analogy_query(a, b, c).ok().flatten() != brute_analogy(&set, a, b, c) {
                    mismatches += 1;
                }
            }
        }
        mismatches
    }
}
