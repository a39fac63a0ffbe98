use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Vocabulary;
use crate::vectors::EmbeddingSet;

/// Input (hidden-layer) and output (prediction-side) vectors, both `V x D`,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) input: Vec<f32>,
    pub(crate) output: Vec<f32>,
    dim: usize,
}

impl Model {
    pub fn from_parts(input: Vec<f32>, output: Vec<f32>, dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        assert_eq!(input.len(), output.len(), "matrix shapes differ");
        assert_eq!(input.len() % dim, 0, "matrix length is not a multiple of dim");
        Model { input, output, dim }
    }

    pub fn zeros(vocab_len: usize, dim: usize) -> Self {
        Self::from_parts(vec![0.0; vocab_len * dim], vec![0.0; vocab_len * dim], dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.input.len() / self.dim
    }

    pub fn input_row(&self, word: u32) -> &[f32] {
        let s = word as usize * self.dim;
        &self.input[s..s + self.dim]
    }

    pub fn output_row(&self, word: u32) -> &[f32] {
        let s = word as usize * self.dim;
        &self.output[s..s + self.dim]
    }

    pub fn input_row_mut(&mut self, word: u32) -> &mut [f32] {
        let s = word as usize * self.dim;
        &mut self.input[s..s + self.dim]
    }

    pub fn output_row_mut(&mut self, word: u32) -> &mut [f32] {
        let s = word as usize * self.dim;
        &mut self.output[s..s + self.dim]
    }

    pub fn input_vectors(&self) -> &[f32] {
        &self.input
    }

    pub fn output_vectors(&self) -> &[f32] {
        &self.output
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    /// The learned word vectors (input side) labelled with `vocab`.
    pub fn embeddings(&self, vocab: &Vocabulary) -> EmbeddingSet {
        EmbeddingSet::new(vocab.words().to_vec(), self.input.clone(), self.dim)
    }
}

/// Input vectors uniform in `[-0.5/dim, 0.5/dim]`, output vectors zero.
pub fn init_model(vocab: &Vocabulary, dim: usize, seed: u64) -> Model {
    assert!(dim > 0, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = vocab.len() * dim;
    let scale = 1.0 / dim as f32;
    let input = (0..n).map(|_| (rng.gen::<f32>() - 0.5) * scale).collect();
    Model::from_parts(input, vec![0.0; n], dim)
}
