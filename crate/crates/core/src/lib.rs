//! Word vectors from a corpus and a paraphrase lexicon.
//!
//! The trainer extends negative-sampling CBOW with a lexicon layer: each
//! context word's paraphrases become extra inputs predicting the same target,
//! admitted either by a hard score threshold or by a Bernoulli draw on the
//! normalized score. Plain CBOW is the lexicon-free special case.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod cli;
pub mod corpus;
pub mod eval;
pub mod lexicon;
pub mod synthetic;
pub mod trainer;
pub mod vectors;

pub use corpus::{build_vocabulary, keep_probability, tokenize, Corpus, TokenStream, Vocabulary};
pub use eval::{
    eval_analogy, eval_simlex, spearman_rho, sweep_threshold, AnalogyDataset, EvalReport, SimilarityDataset,
};
pub use lexicon::{
    degree_of_truth, gate_bernoulli, gate_threshold, parse_ppdb, Lexicon, ParaphraseEntry, RelationType,
};
pub use trainer::{init_model, train, train_pair, Mode, Model, TrainConfig};
pub use vectors::{EmbeddingSet, Format};
