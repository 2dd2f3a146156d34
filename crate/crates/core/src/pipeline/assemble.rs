use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{read_jsonl, write_jsonl, PipelineError};
use crate::classifier::keep_last;
use crate::dataset::{
    archive_source, pack_archive, read_dataset, validate_record, write_dataset, DatasetFormat,
    LabeledRecord, MinedRow,
};
use crate::dedup::{dedup_dataset, Flagged, MinHasher};
use crate::repo::{Repository, Sha};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CreateSummary {
    pub repos: usize,
    pub records: usize,
    pub actionable: usize,
    pub non_actionable: usize,
    pub archived_files: usize,
    pub zip: Option<PathBuf>,
}

/// Build the dataset from a mining work directory.
///
/// Per repository, the per-pair rows are put in first-parent chain order,
/// non-actionable duplicates are collapsed to their last occurrence, and each
/// warning's file is archived as it was at the parent commit. The archive
/// lives next to `out`. Nothing is written when any record fails validation.
pub fn create_dataset(
    mined: &Path,
    out: &Path,
    format: DatasetFormat,
    zip: bool,
) -> Result<CreateSummary, PipelineError> {
    let archive_root = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&archive_root)?;

    let mut repo_dirs: Vec<PathBuf> = std::fs::read_dir(mined)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join("pairs").is_dir())
        .collect();
    repo_dirs.sort();

    let mut summary = CreateSummary::default();
    let mut records = Vec::new();
    let mut problems = Vec::new();
    let mut archived: HashMap<(String, String, String), String> = HashMap::new();
    for dir in &repo_dirs {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir.join("pairs"))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        files.sort();
        let mut rows: Vec<MinedRow> = Vec::new();
        for f in &files {
            rows.extend(read_jsonl::<MinedRow>(f)?);
        }
        if rows.is_empty() {
            continue;
        }
        summary.repos += 1;
        rows.sort_by_key(|r| r.chain_index);
        let rows = keep_last(rows);
        let repo = Repository::open_with_url(&dir.join("repo"), &rows[0].repo)?;

        for row in rows {
            let key = (
                row.repo.clone(),
                row.parent_sha.clone(),
                row.filename.clone(),
            );
            let filepath = match archived.get(&key) {
                Some(p) => p.clone(),
                None => {
                    let stored = row
                        .parent_sha
                        .parse::<Sha>()
                        .map_err(PipelineError::from)
                        .and_then(|sha| Ok(repo.read_file_at(&sha, &row.filename)?))
                        .and_then(|text| {
                            Ok(archive_source(
                                &row.repo,
                                &row.parent_sha,
                                &row.filename,
                                text.as_bytes(),
                                &archive_root,
                            )?)
                        });
                    match stored {
                        Ok(p) => {
                            archived.insert(key, p.clone());
                            p
                        }
                        Err(e) => {
                            problems.push(format!(
                                "{} {}@{}: {e}",
                                row.repo, row.filename, row.parent_sha
                            ));
                            String::new()
                        }
                    }
                }
            };
            let record = row.to_record(&filepath);
            for v in validate_record(&record, &archive_root) {
                problems.push(format!(
                    "{} {} {}:{}: {v}",
                    record.repo, record.commit_sha, record.filename, record.warning_type
                ));
            }
            records.push(record);
        }
    }
    if !problems.is_empty() {
        return Err(PipelineError::InvalidRecords(problems));
    }

    write_dataset(&records, out, format)?;
    summary.records = records.len();
    summary.actionable = records.iter().filter(|r| r.label == 1).count();
    summary.non_actionable = summary.records - summary.actionable;
    let mut unique: Vec<&str> = records.iter().map(|r| r.filepath.as_str()).collect();
    unique.sort_unstable();
    unique.dedup();
    summary.archived_files = unique.len();
    if zip {
        let zip_path = archive_root.join("files.zip");
        pack_archive(&archive_root, &zip_path)?;
        summary.zip = Some(zip_path);
    }
    Ok(summary)
}

#[derive(Debug, Clone, Default)]
pub struct DedupSummary {
    pub input: usize,
    pub kept: usize,
    pub dropped: usize,
    pub flagged: Vec<Flagged>,
    pub drop_log: PathBuf,
}

/// Deduplicate a dataset file into `out`, writing the drop log to
/// `<out stem>.drops.jsonl`. Source files are looked up below `archive`, or
/// next to the input dataset when `archive` is `None`. The output format
/// follows the extension of `out` (`.jsonl`, anything else is Parquet).
pub fn dedup_file(
    input: &Path,
    out: &Path,
    archive: Option<&Path>,
) -> Result<DedupSummary, PipelineError> {
    let records: Vec<LabeledRecord> = read_dataset(input)?;
    let root = match archive {
        Some(a) => a.to_path_buf(),
        None => match input.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        },
    };
    let outcome = dedup_dataset(&records, &root, &MinHasher::default());
    let format = if out.extension().is_some_and(|e| e == "jsonl") {
        DatasetFormat::Jsonl
    } else {
        DatasetFormat::Parquet
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_dataset(&outcome.kept, out, format)?;
    let drop_log = out.with_extension("drops.jsonl");
    write_jsonl(&drop_log, &outcome.drops)?;
    Ok(DedupSummary {
        input: records.len(),
        kept: outcome.kept.len(),
        dropped: outcome.dropped_count(),
        flagged: outcome.flagged,
        drop_log,
    })
}
