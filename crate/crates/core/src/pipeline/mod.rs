//! End-to-end commands: mining repositories into per-pair files, assembling
//! the dataset, and deduplicating it.
//!
//! Work directory layout, per repository:
//!
//! ```text
//! <workdir>/<repo_slug>/repo/                  clone (no checkout)
//! <workdir>/<repo_slug>/pairs/<child_sha>.jsonl classified warnings of one pair
//! <workdir>/<repo_slug>/reports/<tool>-<sha>.xml cached external reports
//! <workdir>/manifest.jsonl                      dispositions of repos, pairs, analyses
//! ```

mod assemble;
mod mine;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{CommandTemplate, ExternalConfig, Tool};
use crate::dataset::DatasetError;
use crate::repo::{CommitPair, RepoError};

pub use assemble::{create_dataset, dedup_file, CreateSummary, DedupSummary};
pub use mine::{mine_repo, run_feed, run_mine, MineSummary, RepoOutcome};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{} invalid record(s):\n{}", .0.len(), .0.join("\n"))]
    InvalidRecords(Vec<String>),
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Optional hook that narrows the commit pairs to mine.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum CommitFilter {
    #[default]
    PassThrough,
    /// Child shas are written to the command's stdin, one per line; pairs
    /// whose child sha it prints back are kept.
    Command(CommandTemplate),
}

impl FromStr for CommitFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "" | "none" => Ok(CommitFilter::PassThrough),
            other => match other.strip_prefix("cmd:").and_then(CommandTemplate::parse) {
                Some(cmd) => Ok(CommitFilter::Command(cmd)),
                None => Err(format!(
                    "commit filter {other:?}: expected `none` or `cmd:<program> [args]`"
                )),
            },
        }
    }
}

impl CommitFilter {
    pub fn apply(&self, pairs: Vec<CommitPair>) -> Result<Vec<CommitPair>, String> {
        let CommitFilter::Command(cmd) = self else {
            return Ok(pairs);
        };
        let mut child = Command::new(&cmd.program)
            .args(&cmd.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot run commit filter {}: {e}", cmd.program))?;
        let input: String = pairs.iter().map(|p| format!("{}\n", p.child.sha)).collect();
        let mut stdin = child.stdin.take().expect("piped");
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let output = child.wait_with_output().map_err(|e| e.to_string())?;
        let _ = writer.join();
        if !output.status.success() {
            return Err(format!(
                "commit filter exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        let keep: std::collections::HashSet<String> = String::from_utf8_lossy(&output.stdout)
            .lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        Ok(pairs
            .into_iter()
            .filter(|p| keep.contains(p.child.sha.as_str()))
            .collect())
    }
}

/// Settings shared by `mine` and `feed`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub repos: Vec<String>,
    pub since: Option<DateTime<Utc>>,
    pub until: Option<DateTime<Utc>>,
    pub analyzers: Vec<Tool>,
    pub workdir: PathBuf,
    /// Manifest path; defaults to `<workdir>/manifest.jsonl`.
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub seed: u64,
    pub commit_filter: CommitFilter,
    pub external: ExternalConfig,
}

impl RunConfig {
    pub fn new(workdir: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            repos: Vec::new(),
            since: None,
            until: None,
            analyzers: vec![Tool::Pmd, Tool::SpotBugs],
            workdir: workdir.into(),
            out: None,
            workers: 1,
            seed: 0,
            commit_filter: CommitFilter::PassThrough,
            external: ExternalConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.analyzers.is_empty() {
            return Err(PipelineError::Config(
                "at least one analyzer must be enabled".into(),
            ));
        }
        if self.workers == 0 {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }
        if let (Some(s), Some(u)) = (self.since, self.until) {
            if s > u {
                return Err(PipelineError::Config(format!(
                    "--since {s} is after --until {u}"
                )));
            }
        }
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| self.workdir.join("manifest.jsonl"))
    }
}

/// `YYYY-MM-DD` as midnight UTC.
pub fn parse_day(s: &str) -> Result<DateTime<Utc>, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc())
        .map_err(|e| format!("{s:?} is not a YYYY-MM-DD date: {e}"))
}

/// Parse `a,b,c` into a de-duplicated tool list.
pub fn parse_analyzers(s: &str) -> Result<Vec<Tool>, String> {
    let mut tools = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let tool: Tool = part.parse()?;
        if !tools.contains(&tool) {
            tools.push(tool);
        }
    }
    Ok(tools)
}

/// Repository list file: one URL or path per line; blank lines and lines
/// starting with `#` are ignored.
pub fn read_repo_list(path: &Path) -> Result<Vec<String>, PipelineError> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    NoJavaChange,
    BuildFailed,
    AnalyzerError,
    DiffError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Skipped,
    Failed,
}

/// One line of the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ManifestEntry {
    Repo {
        repo: String,
        status: Status,
        commits: usize,
        pairs: usize,
        java_pairs: usize,
        records: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    Pair {
        repo: String,
        chain_index: usize,
        parent_sha: String,
        child_sha: String,
        /// Absent for pair-level dispositions that do not depend on a tool.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tool: Option<Tool>,
        status: Status,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<SkipReason>,
        actionable: usize,
        non_actionable: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    Analysis {
        repo: String,
        tool: Tool,
        sha: String,
        status: Status,
        /// Report reused from an earlier run.
        cached: bool,
        warnings: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, PipelineError> {
    read_jsonl(path)
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<Vec<T>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| PipelineError::Json {
                path: path.display().to_string(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
