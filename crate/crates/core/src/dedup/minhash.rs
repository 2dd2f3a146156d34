use std::collections::{BTreeSet, HashSet};
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::xxh3_64;

use super::DedupError;

pub const NUM_PERM: usize = 128;
/// 2^61 - 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;
pub const DEFAULT_SEED: u64 = 0x6e61_7363_6172_0001;

/// Hashed 3-token shingles of a normalized text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShingleSet(pub BTreeSet<u64>);

impl ShingleSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lowercase, collapse whitespace, and hash every window of three tokens.
/// Texts with fewer than three tokens hash to a single shingle of the whole
/// normalized text; the empty text has no shingles.
pub fn shingle(text: &str) -> ShingleSet {
    let lower = text.to_lowercase();
    let tokens: Vec<&str> = lower.split_whitespace().collect();
    if tokens.is_empty() {
        return ShingleSet::default();
    }
    if tokens.len() < 3 {
        return ShingleSet(BTreeSet::from([xxh3_64(tokens.join(" ").as_bytes())]));
    }
    ShingleSet(
        tokens
            .windows(3)
            .map(|w| xxh3_64(w.join(" ").as_bytes()))
            .collect(),
    )
}

/// `v mod (2^61 - 1)` for any `v < 2^122 + 2^62`.
#[inline]
pub fn mod_mersenne(v: u128) -> u64 {
    let p = u128::from(MERSENNE_61);
    let r = (v & p) + (v >> 61);
    let mut r = ((r & p) + (r >> 61)) as u64;
    if r >= MERSENNE_61 {
        r -= MERSENNE_61;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    pub seed: u64,
}

/// The family `h_i(x) = (a_i * x + b_i) mod p` with parameters drawn from
/// ChaCha8 seeded with `seed`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    a: Vec<u64>,
    b: Vec<u64>,
}

impl Default for MinHasher {
    fn default() -> Self {
        MinHasher::new(DEFAULT_SEED, NUM_PERM)
    }
}

impl MinHasher {
    pub fn new(seed: u64, num_perm: usize) -> MinHasher {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Vec::with_capacity(num_perm);
        let mut b = Vec::with_capacity(num_perm);
        for _ in 0..num_perm {
            a.push(rng.gen_range(1..MERSENNE_61));
            b.push(rng.gen_range(0..MERSENNE_61));
        }
        MinHasher { seed, a, b }
    }

    pub fn num_perm(&self) -> usize {
        self.a.len()
    }

    pub fn signature(&self, set: &ShingleSet) -> Result<MinHashSignature, DedupError> {
        if set.is_empty() {
            return Err(DedupError::EmptySet);
        }
        let xs: Vec<u64> = set.0.iter().map(|&x| mod_mersenne(u128::from(x))).collect();
        let values = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(&a, &b)| {
                xs.iter()
                    .map(|&x| mod_mersenne(u128::from(a) * u128::from(x) + u128::from(b)))
                    .min()
                    .expect("non-empty")
            })
            .collect();
        Ok(MinHashSignature {
            values,
            seed: self.seed,
        })
    }
}

/// Fraction of agreeing positions.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64, DedupError> {
    if a.seed != b.seed || a.values.len() != b.values.len() || a.values.is_empty() {
        return Err(DedupError::Incomparable);
    }
    let same = a
        .values
        .iter()
        .zip(&b.values)
        .filter(|(x, y)| x == y)
        .count();
    Ok(same as f64 / a.values.len() as f64)
}

/// Exact Jaccard similarity; 1.0 for two empty sets.
pub fn brute_force_jaccard<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}
