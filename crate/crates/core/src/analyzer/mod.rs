//! Warning reports: parsing PMD and SpotBugs XML, a small builtin analyzer for
//! hermetic runs, and rule universes for coverage statistics.

mod builtin;
mod external;
mod pmd;
mod rules;
mod spotbugs;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::repo::Sha;

pub use builtin::{builtin_analyze, builtin_analyze_file, LONG_LINE_LIMIT};
pub use external::{run_external_analyzer, CommandTemplate, ExternalConfig};
pub use pmd::parse_pmd_report;
pub use rules::RuleUniverse;
pub use spotbugs::parse_spotbugs_report;

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error("XML error at {line}:{column}: {message}")]
    Xml {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("line {line}: {reason}")]
    Invalid { line: u32, reason: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<AnalyzerError>,
    },
    #[error("build failed: {0}")]
    BuildFailed(String),
    #[error("{tool} failed: {detail}")]
    ToolFailed { tool: Tool, detail: String },
    #[error("{0} has no external runner")]
    NotExternal(Tool),
    #[error("rule manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error(transparent)]
    Zip(#[from] zip::result::ZipError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AnalyzerError {
    fn from_xml(err: roxmltree::Error) -> Self {
        let pos = err.pos();
        AnalyzerError::Xml {
            line: pos.row,
            column: pos.col,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tool {
    #[serde(rename = "PMD")]
    Pmd,
    #[serde(rename = "SpotBugs")]
    SpotBugs,
    #[serde(rename = "Builtin")]
    Builtin,
}

impl Tool {
    pub const ALL: [Tool; 3] = [Tool::Pmd, Tool::SpotBugs, Tool::Builtin];

    /// Name used in the dataset's `tool` column.
    pub fn dataset_name(self) -> &'static str {
        match self {
            Tool::Pmd => "PMD",
            Tool::SpotBugs => "SpotBugs",
            Tool::Builtin => "Builtin",
        }
    }

    /// Lowercase name used on the command line and in file names.
    pub fn cli_name(self) -> &'static str {
        match self {
            Tool::Pmd => "pmd",
            Tool::SpotBugs => "spotbugs",
            Tool::Builtin => "builtin",
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dataset_name())
    }
}

impl FromStr for Tool {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pmd" => Ok(Tool::Pmd),
            "spotbugs" => Ok(Tool::SpotBugs),
            "builtin" => Ok(Tool::Builtin),
            other => Err(format!(
                "unknown tool {other:?} (expected pmd, spotbugs or builtin)"
            )),
        }
    }
}

/// 1-based inclusive line span, with optional 1-based columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub end_line: u32,
    pub start_col: Option<u32>,
    pub end_col: Option<u32>,
}

impl Span {
    pub fn new(
        start_line: u32,
        end_line: u32,
        start_col: Option<u32>,
        end_col: Option<u32>,
    ) -> Result<Span, String> {
        if start_line == 0 {
            return Err("start line must be >= 1".into());
        }
        if end_line < start_line {
            return Err(format!(
                "end line {end_line} before start line {start_line}"
            ));
        }
        if start_col == Some(0) || end_col == Some(0) {
            return Err("columns must be >= 1".into());
        }
        Ok(Span {
            start_line,
            end_line,
            start_col,
            end_col,
        })
    }

    pub fn lines(start_line: u32, end_line: u32) -> Result<Span, String> {
        Span::new(start_line, end_line, None, None)
    }

    /// True when the inclusive line range overlaps `[lo, hi]`.
    pub fn intersects(&self, lo: u32, hi: u32) -> bool {
        self.start_line <= hi && lo <= self.end_line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Warning {
    pub tool: Tool,
    pub rule_id: String,
    pub category: String,
    pub message: String,
    pub file_path: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub commit_sha: Sha,
    pub warnings: Vec<Warning>,
    /// Tool findings dropped because they carried no usable source location.
    #[serde(default)]
    pub skipped_instances: usize,
}

impl Report {
    pub fn empty(commit_sha: Sha) -> Report {
        Report {
            commit_sha,
            warnings: Vec::new(),
            skipped_instances: 0,
        }
    }

    /// Strip `root` from absolute file paths so they become repo-relative.
    pub fn relativize(&mut self, root: &Path) {
        let root = normalize_separators(&root.to_string_lossy());
        let root = root.trim_end_matches('/');
        for w in &mut self.warnings {
            if let Some(rest) = w.file_path.strip_prefix(root) {
                if rest.starts_with('/') {
                    w.file_path = rest.trim_start_matches('/').to_string();
                }
            }
        }
    }

    /// Map package-relative source paths (SpotBugs `sourcepath`) onto the
    /// repository files they end with. Ambiguous or unknown paths are kept.
    pub fn resolve_source_paths<'a>(
        &mut self,
        repo_files: impl IntoIterator<Item = &'a str> + Clone,
    ) {
        for w in &mut self.warnings {
            let suffix = format!("/{}", w.file_path);
            let mut matches = repo_files
                .clone()
                .into_iter()
                .filter(|f| *f == w.file_path || f.ends_with(&suffix));
            if let (Some(first), None) = (matches.next(), matches.next()) {
                w.file_path = first.to_string();
            }
        }
    }

    /// Canonical one-line-per-warning text, sorted; used to compare parses.
    pub fn canonical_summary(&self) -> Vec<String> {
        let mut lines: Vec<String> = self
            .warnings
            .iter()
            .map(|w| {
                format!(
                    "{}\t{}\t{}\t{}:{}:{}:{}\t{}",
                    w.tool,
                    w.rule_id,
                    w.file_path,
                    w.span.start_line,
                    w.span.end_line,
                    w.span.start_col.map(|c| c.to_string()).unwrap_or_default(),
                    w.span.end_col.map(|c| c.to_string()).unwrap_or_default(),
                    w.message
                )
            })
            .collect();
        lines.sort();
        lines
    }
}

/// Parse a report file for `tool`, attaching the file name to any error.
pub fn parse_report_file(
    tool: Tool,
    path: &Path,
    commit_sha: Sha,
) -> Result<Report, AnalyzerError> {
    let wrap = |source: AnalyzerError| AnalyzerError::File {
        path: path.display().to_string(),
        source: Box::new(source),
    };
    let bytes = std::fs::read(path).map_err(|e| wrap(e.into()))?;
    match tool {
        Tool::Pmd => parse_pmd_report(&bytes, commit_sha),
        Tool::SpotBugs => parse_spotbugs_report(&bytes, commit_sha),
        Tool::Builtin => Err(AnalyzerError::NotExternal(tool)),
    }
    .map_err(wrap)
}

pub(crate) fn normalize_separators(path: &str) -> String {
    path.replace('\\', "/")
}

fn attr_u32(node: roxmltree::Node<'_, '_>, name: &str) -> Result<Option<u32>, AnalyzerError> {
    match node.attribute(name) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| AnalyzerError::Invalid {
                line: node_line(node),
                reason: format!("attribute {name}={v:?} is not a positive integer"),
            }),
    }
}

trait LocalName {
    fn has_tag_name_local(&self, name: &str) -> bool;
}

impl LocalName for roxmltree::Node<'_, '_> {
    fn has_tag_name_local(&self, name: &str) -> bool {
        self.is_element() && self.tag_name().name() == name
    }
}

fn node_line(node: roxmltree::Node<'_, '_>) -> u32 {
    node.document().text_pos_at(node.range().start).row
}
