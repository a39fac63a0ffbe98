//! Per-pair negative-sampling update and the storage abstraction it runs on.

use std::sync::atomic::{AtomicU32, Ordering};

use num_traits::Float;

use super::{Model, TrainError};

/// Row-addressable parameter storage. Rows are copied out, updated and
/// written back, which lets the same update code run on plain vectors and on
/// the lock-free shared matrices used by parallel workers.
pub trait RowStore<T> {
    fn dim(&self) -> usize;
    fn load(&self, row: u32, out: &mut [T]);
    fn store(&mut self, row: u32, src: &[T]);
}

/// Plain owned row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRows<T> {
    pub data: Vec<T>,
    pub dim: usize,
}

impl<T: Copy> DenseRows<T> {
    pub fn new(data: Vec<T>, dim: usize) -> Self {
        assert_eq!(data.len() % dim, 0);
        DenseRows { data, dim }
    }

    pub fn row(&self, r: u32) -> &[T] {
        let s = r as usize * self.dim;
        &self.data[s..s + self.dim]
    }
}

impl<T: Copy> RowStore<T> for DenseRows<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn load(&self, row: u32, out: &mut [T]) {
        out.copy_from_slice(self.row(row));
    }

    fn store(&mut self, row: u32, src: &[T]) {
        let s = row as usize * self.dim;
        self.data[s..s + self.dim].copy_from_slice(src);
    }
}

/// Matrix shared between worker threads without locks. Elements are
/// relaxed atomics, so concurrent writers may overwrite each other's updates
/// but never produce torn values.
pub(crate) struct SharedMatrix {
    data: Vec<AtomicU32>,
    dim: usize,
}

impl SharedMatrix {
    pub(crate) fn from_slice(values: &[f32], dim: usize) -> Self {
        SharedMatrix {
            data: values.iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
            dim,
        }
    }

    pub(crate) fn into_vec(self) -> Vec<f32> {
        self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }
}

impl RowStore<f32> for &SharedMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn load(&self, row: u32, out: &mut [f32]) {
        let s = row as usize * self.dim;
        for (o, a) in out.iter_mut().zip(&self.data[s..s + self.dim]) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn store(&mut self, row: u32, src: &[f32]) {
        let s = row as usize * self.dim;
        for (v, a) in src.iter().zip(&self.data[s..s + self.dim]) {
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

const SIGMOID_BINS: usize = 1000;
const SIGMOID_BOUND: f32 = 6.0;

/// Logistic function, either exact or read from a 1000-bin table over
/// `[-6, 6]` (0 and 1 outside).
#[derive(Debug, Clone)]
pub enum Sigmoid {
    Exact,
    Table(Vec<f32>),
}

impl Sigmoid {
    pub fn table() -> Self {
        let t = (0..SIGMOID_BINS)
            .map(|i| {
                let x = (i as f64 / SIGMOID_BINS as f64 * 2.0 - 1.0) * SIGMOID_BOUND as f64;
                let e = x.exp();
                (e / (e + 1.0)) as f32
            })
            .collect();
        Sigmoid::Table(t)
    }

    #[inline]
    pub fn eval(&self, x: f32) -> f32 {
        match self {
            Sigmoid::Exact => exact_sigmoid(x),
            Sigmoid::Table(t) => {
                if x >= SIGMOID_BOUND {
                    1.0
                } else if x <= -SIGMOID_BOUND {
                    0.0
                } else {
                    let i = ((x + SIGMOID_BOUND) * (SIGMOID_BINS as f32 / SIGMOID_BOUND / 2.0)) as usize;
                    t[i.min(SIGMOID_BINS - 1)]
                }
            }
        }
    }
}

#[inline]
pub fn exact_sigmoid<T: Float>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[inline]
fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
fn axpy<T: Float>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Scratch buffers reused across updates.
#[derive(Debug, Clone)]
pub struct Scratch<T> {
    hidden: Vec<T>,
    row: Vec<T>,
    grad: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Float> Scratch<T> {
    pub fn new(dim: usize) -> Self {
        Scratch {
            hidden: vec![T::zero(); dim],
            row: vec![T::zero(); dim],
            grad: vec![T::zero(); dim],
            tmp: vec![T::zero(); dim],
        }
    }
}

/// One output word's contribution: `g = (label - sigma(v'_o . h)) * lr`,
/// accumulate `g * v'_o` into `grad`, then `v'_o += g * h`.
#[inline]
fn score_output<T, S, F>(
    outputs: &mut S,
    word: u32,
    label: T,
    lr: T,
    sigmoid: &F,
    hidden: &[T],
    row: &mut [T],
    grad: &mut [T],
) -> Result<T, f64>
where
    T: Float,
    S: RowStore<T>,
    F: Fn(T) -> T,
{
    outputs.load(word, row);
    let f = dot(hidden, row);
    if !f.is_finite() {
        return Err(f.to_f64().unwrap_or(f64::NAN));
    }
    let g = (label - sigmoid(f)) * lr;
    axpy(g, row, grad);
    axpy(g, hidden, row);
    outputs.store(word, row);
    Ok(g)
}

/// Gradient-ascent step on
/// `log sigma(v'_target . v_input) + sum_n log sigma(-v'_n . v_input)`.
///
/// Output rows are updated as they are visited; the input row receives the
/// accumulated update once at the end.
pub fn pair_step<T, S, F>(
    inputs: &mut S,
    outputs: &mut S,
    input: u32,
    target: u32,
    negatives: &[u32],
    lr: T,
    sigmoid: &F,
    scratch: &mut Scratch<T>,
) -> Result<(), TrainError>
where
    T: Float,
    S: RowStore<T>,
    F: Fn(T) -> T,
{
    let Scratch { hidden, row, grad, .. } = scratch;
    inputs.load(input, hidden);
    grad.iter_mut().for_each(|g| *g = T::zero());
    let labelled = std::iter::once((target, T::one())).chain(negatives.iter().map(|&n| (n, T::zero())));
    for (word, label) in labelled {
        score_output(outputs, word, label, lr, sigmoid, hidden, row, grad)
            .map_err(|_| TrainError::Numeric { input, output: word })?;
    }
    axpy(T::one(), grad, hidden);
    if hidden.iter().any(|x| !x.is_finite()) {
        return Err(TrainError::Numeric { input, output: target });
    }
    inputs.store(input, hidden);
    Ok(())
}

/// Classic CBOW step: the hidden vector is the mean of all `inputs`, and the
/// accumulated update is added in full to every input row.
pub fn bag_step<T, S, F>(
    inputs_store: &mut S,
    outputs: &mut S,
    inputs: &[u32],
    target: u32,
    negatives: &[u32],
    lr: T,
    sigmoid: &F,
    scratch: &mut Scratch<T>,
) -> Result<(), TrainError>
where
    T: Float,
    S: RowStore<T>,
    F: Fn(T) -> T,
{
    if inputs.is_empty() {
        return Ok(());
    }
    let Scratch { hidden, row, grad, tmp } = scratch;
    hidden.iter_mut().for_each(|h| *h = T::zero());
    for &w in inputs {
        inputs_store.load(w, tmp);
        axpy(T::one(), tmp, hidden);
    }
    let inv = T::one() / T::from(inputs.len()).unwrap();
    hidden.iter_mut().for_each(|h| *h = *h * inv);
    grad.iter_mut().for_each(|g| *g = T::zero());
    let labelled = std::iter::once((target, T::one())).chain(negatives.iter().map(|&n| (n, T::zero())));
    for (word, label) in labelled {
        score_output(outputs, word, label, lr, sigmoid, hidden, row, grad).map_err(|_| TrainError::Numeric {
            input: inputs[0],
            output: word,
        })?;
    }
    for &w in inputs {
        inputs_store.load(w, tmp);
        axpy(T::one(), grad, tmp);
        inputs_store.store(w, tmp);
    }
    Ok(())
}

/// Single pair update on an `f32` model with the exact logistic function.
pub fn train_pair(model: &mut Model, input: u32, target: u32, negatives: &[u32], lr: f32) -> Result<(), TrainError> {
    assert!(!negatives.is_empty(), "at least one negative is required");
    assert!(!negatives.contains(&target), "negatives must not contain the target");
    let dim = model.dim();
    let mut inputs = DenseRows::new(std::mem::take(&mut model.input), dim);
    let mut outputs = DenseRows::new(std::mem::take(&mut model.output), dim);
    let mut scratch = Scratch::new(dim);
    let result = pair_step(
        &mut inputs,
        &mut outputs,
        input,
        target,
        negatives,
        lr,
        &exact_sigmoid::<f32>,
        &mut scratch,
    );
    model.input = inputs.data;
    model.output = outputs.data;
    result
}
