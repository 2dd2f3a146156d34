use std::collections::{BTreeSet, HashMap};

use xxhash_rust::xxh3::xxh3_64;

use super::MinHashSignature;

pub const BANDS: usize = 4;
pub const ROWS_PER_BAND: usize = 32;

/// Banded LSH buckets over MinHash signatures. Two signatures become
/// candidates when all rows of at least one band agree.
#[derive(Debug, Clone)]
pub struct LshIndex {
    bands: usize,
    rows: usize,
    buckets: HashMap<(usize, u64), Vec<usize>>,
}

impl Default for LshIndex {
    fn default() -> Self {
        LshIndex::new(BANDS, ROWS_PER_BAND)
    }
}

impl LshIndex {
    pub fn new(bands: usize, rows: usize) -> LshIndex {
        LshIndex {
            bands,
            rows,
            buckets: HashMap::new(),
        }
    }

    /// Similarity at which the candidate probability curve is steepest,
    /// `(1/b)^(1/r)`.
    pub fn threshold(&self) -> f64 {
        (1.0 / self.bands as f64).powf(1.0 / self.rows as f64)
    }

    fn band_hashes<'a>(
        &'a self,
        sig: &'a MinHashSignature,
    ) -> impl Iterator<Item = (usize, u64)> + 'a {
        assert_eq!(
            sig.values.len(),
            self.bands * self.rows,
            "signature length does not match the index"
        );
        sig.values
            .chunks(self.rows)
            .enumerate()
            .map(|(band, rows)| {
                let bytes: Vec<u8> = rows.iter().flat_map(|v| v.to_le_bytes()).collect();
                (band, xxh3_64(&bytes))
            })
    }

    pub fn insert(&mut self, id: usize, sig: &MinHashSignature) {
        let keys: Vec<_> = self.band_hashes(sig).collect();
        for key in keys {
            self.buckets.entry(key).or_default().push(id);
        }
    }

    /// Ids sharing at least one band bucket with `sig`, ascending.
    pub fn candidates(&self, sig: &MinHashSignature) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for key in self.band_hashes(sig) {
            if let Some(ids) = self.buckets.get(&key) {
                out.extend(ids.iter().copied());
            }
        }
        out.into_iter().collect()
    }
}
