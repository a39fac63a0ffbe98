use rand::Rng;

use super::TrainError;
use crate::corpus::Vocabulary;

/// Unigram noise table: each word owns a share of slots proportional to
/// `count^exponent`, allocated by largest remainder so every share is within
/// one slot of its exact value.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    slots: Vec<u32>,
    slot_counts: Vec<u64>,
    exponent: f64,
}

impl NoiseTable {
    pub fn from_counts(counts: &[u64], exponent: f64, size: usize) -> Self {
        assert!(!counts.is_empty(), "noise table needs at least one word");
        assert!(size >= counts.len(), "table size {size} smaller than vocabulary");
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(exponent)).collect();
        let total: f64 = weights.iter().sum();
        let ideal: Vec<f64> = weights.iter().map(|w| w / total * size as f64).collect();
        let mut slot_counts: Vec<u64> = ideal.iter().map(|x| x.floor() as u64).collect();
        let assigned: u64 = slot_counts.iter().sum();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = ideal[a] - ideal[a].floor();
            let fb = ideal[b] - ideal[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().take(size.saturating_sub(assigned as usize)) {
            slot_counts[i] += 1;
        }
        let mut slots = Vec::with_capacity(size);
        for (word, &n) in slot_counts.iter().enumerate() {
            slots.extend(std::iter::repeat_n(word as u32, n as usize));
        }
        NoiseTable {
            slots,
            slot_counts,
            exponent,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn slots(&self) -> &[u32] {
        &self.slots
    }

    /// Number of slots owned by `word`.
    pub fn slots_of(&self, word: u32) -> u64 {
        self.slot_counts[word as usize]
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.slots[rng.gen_range(0..self.slots.len())]
    }

    fn has_candidate(&self, target: u32, excluded: &[u32]) -> bool {
        self.slot_counts
            .iter()
            .enumerate()
            .any(|(w, &n)| n > 0 && w as u32 != target && excluded.binary_search(&(w as u32)).is_err())
    }
}

pub fn build_noise_table(vocab: &Vocabulary, exponent: f64, size: usize) -> NoiseTable {
    NoiseTable::from_counts(vocab.counts(), exponent, size)
}

const FEASIBILITY_CHECK_AFTER: u32 = 1_000;
const MAX_REJECTIONS: u32 = 10_000_000;

/// Draws a noise word that is neither `target` nor in `excluded` (sorted ascending).
pub fn sample_negative<R: Rng + ?Sized>(
    table: &NoiseTable,
    target: u32,
    excluded: &[u32],
    rng: &mut R,
) -> Result<u32, TrainError> {
    debug_assert!(excluded.windows(2).all(|w| w[0] < w[1]), "exclusion set must be sorted");
    let mut rejections = 0u32;
    loop {
        let w = table.draw(rng);
        if w != target && excluded.binary_search(&w).is_err() {
            return Ok(w);
        }
        rejections += 1;
        if (rejections == FEASIBILITY_CHECK_AFTER && !table.has_candidate(target, excluded))
            || rejections >= MAX_REJECTIONS
        {
            return Err(TrainError::SamplingExhausted { target });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_counts_split_evenly() {
        let t = NoiseTable::from_counts(&[1, 1], 0.75, 10);
        assert_eq!((t.slots_of(0), t.slots_of(1)), (5, 5));
    }

    #[test]
    fn single_word_owns_everything() {
        let t = NoiseTable::from_counts(&[7], 0.75, 13);
        assert!(t.slots().iter().all(|&w| w == 0));
        assert_eq!(t.len(), 13);
    }

    #[test]
    fn power_law_allocation() {
        // 16^0.75 = 8, so 8 of 9 slots
        let t = NoiseTable::from_counts(&[16, 1], 0.75, 9);
        assert_eq!((t.slots_of(0), t.slots_of(1)), (8, 1));
    }

    #[test]
    fn forced_choice() {
        let t = NoiseTable::from_counts(&[3, 1], 0.75, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(sample_negative(&t, 0, &[], &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn exhaustion_is_reported() {
        let t = NoiseTable::from_counts(&[3, 1, 1], 0.75, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_negative(&t, 0, &[1, 2], &mut rng),
            Err(TrainError::SamplingExhausted { target: 0 })
        ));
    }

    #[test]
    fn exclusions_never_returned() {
        let counts: Vec<u64> = (1..=20).rev().collect();
        let t = NoiseTable::from_counts(&counts, 0.75, 1000);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let excluded = [0, 1, 2, 5, 11];
        for _ in 0..100_000 {
            let w = sample_negative(&t, 3, &excluded, &mut rng).unwrap();
            assert!(w != 3 && !excluded.contains(&w));
        }
    }
}
