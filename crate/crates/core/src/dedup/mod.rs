//! Near-duplicate removal over the code context of each record.
//!
//! Every record's context (three lines around its span) is shingled and
//! MinHashed; records are scanned in a fixed order and a record is dropped
//! when an earlier kept record of the same `(tool, warning_type, label)`
//! shares an LSH bucket with it and their estimated Jaccard similarity is at
//! least [`JACCARD_THRESHOLD`].

mod lsh;
mod minhash;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabeledRecord;

pub use lsh::{LshIndex, BANDS, ROWS_PER_BAND};
pub use minhash::{
    brute_force_jaccard, estimate_jaccard, mod_mersenne, shingle, MinHashSignature, MinHasher,
    ShingleSet, DEFAULT_SEED, MERSENNE_61, NUM_PERM,
};

pub const JACCARD_THRESHOLD: f64 = 0.95;
pub const CONTEXT_LINES: u32 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DedupError {
    #[error("cannot MinHash an empty shingle set")]
    EmptySet,
    #[error("signatures differ in seed or length")]
    Incomparable,
    #[error("lines {start}..{end} are outside a file of {lines} lines")]
    OutOfBounds { start: u32, end: u32, lines: usize },
}

/// Lines `start-3 ..= end+3` of `text`, clamped to the file, joined by `\n`.
pub fn extract_context(text: &str, start_line: u32, end_line: u32) -> Result<String, DedupError> {
    let lines: Vec<&str> = text.lines().collect();
    let n = lines.len();
    if start_line == 0 || end_line < start_line || end_line as usize > n {
        return Err(DedupError::OutOfBounds {
            start: start_line,
            end: end_line,
            lines: n,
        });
    }
    let lo = start_line.saturating_sub(CONTEXT_LINES).max(1) as usize;
    let hi = (end_line as usize + CONTEXT_LINES as usize).min(n);
    Ok(lines[lo - 1..hi].join("\n"))
}

/// One line of the drop log. Row numbers index the input dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEntry {
    pub dropped_row: usize,
    pub surviving_row: usize,
    pub estimated_jaccard: f64,
}

/// A record kept without comparison because its context was unavailable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flagged {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct DedupOutcome {
    /// Survivors in scan order.
    pub kept: Vec<LabeledRecord>,
    pub drops: Vec<DropEntry>,
    pub flagged: Vec<Flagged>,
}

impl DedupOutcome {
    pub fn dropped_count(&self) -> usize {
        self.drops.len()
    }
}

/// Scan order: repository, commit date, file, start line, rule; ties keep
/// input order.
pub fn scan_order(records: &[LabeledRecord]) -> Vec<usize> {
    let start = |r: &LabeledRecord| r.positions().map(|p| p.start_line).unwrap_or(0);
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&records[a], &records[b]);
        (
            &x.repo,
            &x.commit_date,
            &x.filename,
            start(x),
            &x.warning_type,
        )
            .cmp(&(
                &y.repo,
                &y.commit_date,
                &y.filename,
                start(y),
                &y.warning_type,
            ))
    });
    order
}

/// Remove near-duplicate records. Source text is read from
/// `archive_root/<filepath>`; records whose file is missing or whose span
/// does not fit the file are kept and reported in [`DedupOutcome::flagged`].
pub fn dedup_dataset(
    records: &[LabeledRecord],
    archive_root: &Path,
    hasher: &MinHasher,
) -> DedupOutcome {
    let mut files: HashMap<&str, Option<String>> = HashMap::new();
    for r in records {
        files.entry(r.filepath.as_str()).or_insert_with(|| {
            std::fs::read(archive_root.join(&r.filepath))
                .ok()
                .map(|b| String::from_utf8_lossy(&b).into_owned())
        });
    }

    let signatures: Vec<Result<MinHashSignature, String>> = records
        .par_iter()
        .map(|r| {
            let text = files[r.filepath.as_str()]
                .as_deref()
                .ok_or_else(|| format!("source file {} not found", r.filepath))?;
            let p = r.positions().map_err(|e| format!("bad positions: {e}"))?;
            let context =
                extract_context(text, p.start_line, p.end_line).map_err(|e| e.to_string())?;
            hasher
                .signature(&shingle(&context))
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut outcome = DedupOutcome::default();
    let mut partitions: BTreeMap<(&str, &str, i64), LshIndex> = BTreeMap::new();
    for row in scan_order(records) {
        let r = &records[row];
        let sig = match &signatures[row] {
            Ok(sig) => sig,
            Err(reason) => {
                outcome.flagged.push(Flagged {
                    row,
                    reason: reason.clone(),
                });
                outcome.kept.push(r.clone());
                continue;
            }
        };
        let index = partitions
            .entry((r.tool.as_str(), r.warning_type.as_str(), r.label))
            .or_default();
        let best = index
            .candidates(sig)
            .into_iter()
            .map(|other| {
                let sim = estimate_jaccard(sig, signatures[other].as_ref().expect("indexed"))
                    .expect("same hasher");
                (other, sim)
            })
            .filter(|&(_, sim)| sim >= JACCARD_THRESHOLD)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((surviving_row, estimated_jaccard)) => outcome.drops.push(DropEntry {
                dropped_row: row,
                surviving_row,
                estimated_jaccard,
            }),
            None => {
                index.insert(row, sig);
                outcome.kept.push(r.clone());
            }
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    fn twenty() -> String {
        (1..=20)
            .map(|i| format!("line{i}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn context_windows() {
        let t = twenty();
        assert_eq!(
            extract_context(&t, 10, 10).unwrap(),
            "line7\nline8\nline9\nline10\nline11\nline12\nline13"
        );
        assert_eq!(
            extract_context(&t, 1, 2).unwrap(),
            "line1\nline2\nline3\nline4\nline5"
        );
        assert_eq!(
            extract_context(&t, 20, 20).unwrap(),
            "line17\nline18\nline19\nline20"
        );
        assert!(extract_context(&t, 20, 21).is_err());
        assert!(extract_context(&t, 0, 1).is_err());
    }
}
