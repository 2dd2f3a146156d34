//! Dataset records, their on-disk formats, and the source-file archive.

mod archive;
mod io;

use std::path::{Component, Path};

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{Span, Tool};
use crate::classifier::{ClassifiedWarning, KeepLastItem, Label};

pub use archive::{archive_source, pack_archive, repo_slug, ARCHIVE_DIR};
pub use io::{read_dataset, write_dataset, DatasetFormat, COLUMNS};

pub const DATE_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unsafe path {0:?}")]
    UnsafePath(String),
    #[error("parquet: {0}")]
    Parquet(#[from] parquet::errors::ParquetError),
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("column {column}: {reason}")]
    Schema { column: String, reason: String },
    #[error(transparent)]
    Zip(#[from] zip::result::ZipError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub tool: String,
    pub warning_type: String,
    pub warning_msg: String,
    pub parent_sha: String,
    pub parent_date: String,
    pub commit_sha: String,
    pub commit_date: String,
    pub repo: String,
    pub filename: String,
    /// JSON object, see [`Positions`].
    pub positions: String,
    /// Path of the source snapshot relative to the archive root.
    pub filepath: String,
    /// 1 actionable, 0 non-actionable.
    pub label: i64,
}

impl LabeledRecord {
    /// Parse the `positions` column; it must be a JSON object.
    pub fn positions(&self) -> Result<Positions, String> {
        let value: serde_json::Value =
            serde_json::from_str(&self.positions).map_err(|e| e.to_string())?;
        if !value.is_object() {
            return Err(format!("expected an object, found {value}"));
        }
        serde_json::from_value(value).map_err(|e| e.to_string())
    }
}

/// The `positions` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Positions {
    pub start_line: u32,
    pub end_line: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_column: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_column: Option<u32>,
}

impl From<Span> for Positions {
    fn from(s: Span) -> Self {
        Positions {
            start_line: s.start_line,
            end_line: s.end_line,
            start_column: s.start_col,
            end_column: s.end_col,
        }
    }
}

impl Positions {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }
}

pub fn format_date(d: &DateTime<Utc>) -> String {
    d.format(DATE_FORMAT).to_string()
}

pub fn parse_date(s: &str) -> Option<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, DATE_FORMAT)
        .ok()
        .map(|n| n.and_utc())
}

/// serde adapter for `YYYY-MM-DDTHH:MM:SSZ` timestamps.
pub mod iso_date {
    use chrono::{DateTime, Utc};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_date(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_date(&s).ok_or_else(|| D::Error::custom(format!("bad timestamp {s:?}")))
    }
}

/// Build the dataset row for a classified warning whose source snapshot is
/// stored at `filepath`.
pub fn to_record(cw: &ClassifiedWarning, filepath: &str) -> LabeledRecord {
    let pair = &cw.pair;
    LabeledRecord {
        tool: cw.warning.tool.dataset_name().to_string(),
        warning_type: cw.warning.rule_id.clone(),
        warning_msg: cw.warning.message.clone(),
        parent_sha: pair.parent.sha.to_string(),
        parent_date: format_date(&pair.parent.commit_date),
        commit_sha: pair.child.sha.to_string(),
        commit_date: format_date(&pair.child.commit_date),
        repo: pair.repo_url.clone(),
        filename: cw.warning.file_path.clone(),
        positions: Positions::from(cw.warning.span).to_json(),
        filepath: filepath.to_string(),
        label: cw.label.as_int(),
    }
}

/// A classified warning as written to the per-pair intermediate files:
/// dataset fields before archiving, the label spelled out, the rule
/// category, and the pair's position on the first-parent chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedRow {
    pub tool: Tool,
    pub warning_type: String,
    pub warning_msg: String,
    pub parent_sha: String,
    #[serde(with = "iso_date")]
    pub parent_date: DateTime<Utc>,
    pub commit_sha: String,
    #[serde(with = "iso_date")]
    pub commit_date: DateTime<Utc>,
    pub repo: String,
    pub filename: String,
    pub positions: Positions,
    pub label: Label,
    pub category: String,
    pub chain_index: usize,
}

impl MinedRow {
    pub fn from_classified(cw: &ClassifiedWarning, chain_index: usize) -> MinedRow {
        MinedRow {
            tool: cw.warning.tool,
            warning_type: cw.warning.rule_id.clone(),
            warning_msg: cw.warning.message.clone(),
            parent_sha: cw.pair.parent.sha.to_string(),
            parent_date: cw.pair.parent.commit_date,
            commit_sha: cw.pair.child.sha.to_string(),
            commit_date: cw.pair.child.commit_date,
            repo: cw.pair.repo_url.clone(),
            filename: cw.warning.file_path.clone(),
            positions: cw.warning.span.into(),
            label: cw.label,
            category: cw.warning.category.clone(),
            chain_index,
        }
    }

    pub fn to_record(&self, filepath: &str) -> LabeledRecord {
        LabeledRecord {
            tool: self.tool.dataset_name().to_string(),
            warning_type: self.warning_type.clone(),
            warning_msg: self.warning_msg.clone(),
            parent_sha: self.parent_sha.clone(),
            parent_date: format_date(&self.parent_date),
            commit_sha: self.commit_sha.clone(),
            commit_date: format_date(&self.commit_date),
            repo: self.repo.clone(),
            filename: self.filename.clone(),
            positions: self.positions.to_json(),
            filepath: filepath.to_string(),
            label: self.label.as_int(),
        }
    }
}

impl KeepLastItem for MinedRow {
    type Key = (Tool, String, String, String);

    fn keep_last_key(&self) -> Self::Key {
        (
            self.tool,
            self.warning_type.clone(),
            self.warning_msg.clone(),
            self.filename.clone(),
        )
    }

    fn is_non_actionable(&self) -> bool {
        self.label == Label::NonActionable
    }

    fn child_commit_date(&self) -> DateTime<Utc> {
        self.commit_date
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Check every record invariant; an empty list means the record is valid.
/// `filepath` must name an existing file below `archive_root`.
pub fn validate_record(r: &LabeledRecord, archive_root: &Path) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |field, message: String| out.push(Violation { field, message });

    if r.tool.parse::<Tool>().map(Tool::dataset_name) != Ok(r.tool.as_str()) {
        bad("tool", format!("unknown tool {:?}", r.tool));
    }
    if r.warning_type.trim().is_empty() {
        bad("warning_type", "empty".into());
    }
    if r.warning_msg.trim().is_empty() {
        bad("warning_msg", "empty".into());
    }
    for (field, sha) in [("parent_sha", &r.parent_sha), ("commit_sha", &r.commit_sha)] {
        if sha.parse::<crate::repo::Sha>().is_err() {
            bad(
                field,
                format!("{sha:?} is not a 40-digit lowercase hex commit id"),
            );
        }
    }
    let parent_date = parse_date(&r.parent_date);
    let commit_date = parse_date(&r.commit_date);
    if parent_date.is_none() {
        bad(
            "parent_date",
            format!("{:?} is not YYYY-MM-DDTHH:MM:SSZ", r.parent_date),
        );
    }
    if commit_date.is_none() {
        bad(
            "commit_date",
            format!("{:?} is not YYYY-MM-DDTHH:MM:SSZ", r.commit_date),
        );
    }
    if let (Some(p), Some(c)) = (parent_date, commit_date) {
        if p > c {
            bad(
                "parent_date",
                format!("{} is after commit_date {}", r.parent_date, r.commit_date),
            );
        }
    }
    if r.repo.trim().is_empty() {
        bad("repo", "empty".into());
    }
    if !is_safe_relative(&r.filename) {
        bad(
            "filename",
            format!("{:?} is not a relative path", r.filename),
        );
    }
    match r.positions() {
        Err(e) => bad("positions", format!("not a positions object: {e}")),
        Ok(p) => {
            if p.start_line == 0 {
                bad("positions", "startLine must be >= 1".into());
            }
            if p.end_line < p.start_line {
                bad(
                    "positions",
                    format!("endLine {} before startLine {}", p.end_line, p.start_line),
                );
            }
            if p.start_column == Some(0) || p.end_column == Some(0) {
                bad("positions", "columns must be >= 1".into());
            }
        }
    }
    if !is_safe_relative(&r.filepath) {
        bad(
            "filepath",
            format!("{:?} is not a relative path", r.filepath),
        );
    } else if !archive_root.join(&r.filepath).is_file() {
        bad(
            "filepath",
            format!("{} does not exist in the archive", r.filepath),
        );
    }
    if Label::from_int(r.label).is_none() {
        bad("label", format!("{} is neither 0 nor 1", r.label));
    }
    out
}

/// Non-empty, relative, and free of `..` components.
pub(crate) fn is_safe_relative(path: &str) -> bool {
    !path.is_empty()
        && !path.contains('\\')
        && Path::new(path)
            .components()
            .all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}
