//! Repository access through the system `git` binary.
//!
//! Every operation is a read-only query against one clone, so a
//! [`Repository`] can be shared across worker threads. Worktrees for external
//! analyzers are the only mutation and each one lives in its own directory.

mod diff;

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{parse_unified_diff, DiffParseError, FileDiff, Hunk};

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("failed to run git: {0}")]
    Spawn(#[source] io::Error),
    #[error("git {args} failed: {stderr}")]
    Git { args: String, stderr: String },
    #[error("{path} not found at {sha}")]
    NotFound { sha: String, path: String },
    #[error("unexpected git output: {0}")]
    Malformed(String),
    #[error("invalid commit sha {0:?}")]
    BadSha(String),
    #[error(transparent)]
    Diff(#[from] DiffParseError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A full 40-character lowercase hex object id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sha(String);

impl Sha {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for Sha {
    type Err = RepoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 40 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(Sha(s.to_string()))
        } else {
            Err(RepoError::BadSha(s.to_string()))
        }
    }
}

impl TryFrom<String> for Sha {
    type Error = RepoError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Sha> for String {
    fn from(s: Sha) -> String {
        s.0
    }
}

impl fmt::Display for Sha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitMeta {
    pub sha: Sha,
    /// Committer date.
    pub commit_date: DateTime<Utc>,
    /// First element is the first parent.
    pub parent_shas: Vec<Sha>,
}

impl CommitMeta {
    pub fn is_root(&self) -> bool {
        self.parent_shas.is_empty()
    }

    pub fn first_parent(&self) -> Option<&Sha> {
        self.parent_shas.first()
    }
}

/// A child commit and its first parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitPair {
    pub repo_url: String,
    pub parent: CommitMeta,
    pub child: CommitMeta,
}

/// A blob inside a commit tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeEntry {
    pub path: String,
    pub oid: String,
}

/// Handle to a local clone.
#[derive(Debug, Clone)]
pub struct Repository {
    path: PathBuf,
    url: String,
    branch: String,
}

impl Repository {
    /// Clone `url` into `dest`, or fetch into an existing clone there.
    pub fn clone_or_fetch(url: &str, dest: &Path) -> Result<Repository, RepoError> {
        if dest.join(".git").exists() || dest.join("HEAD").is_file() {
            run_git(Some(dest), &["fetch", "--prune", "--quiet", "origin"])?;
            // Refresh origin/HEAD in case the default branch moved; a remote
            // that cannot report its HEAD keeps the previous value.
            if let Err(e) = run_git(Some(dest), &["remote", "set-head", "origin", "--auto"]) {
                log::warn!("could not refresh origin/HEAD for {url}: {e}");
            }
        } else {
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent)?;
            }
            let dest_str = dest.to_string_lossy();
            run_git(None, &["clone", "--quiet", "--no-checkout", url, &dest_str])?;
        }
        Self::open_with_url(dest, url)
    }

    /// Open an existing repository, recording `url` as its identity.
    pub fn open_with_url(path: &Path, url: &str) -> Result<Repository, RepoError> {
        let path = path.to_path_buf();
        run_git(Some(&path), &["rev-parse", "--git-dir"])?;
        let branch = if try_git(
            &path,
            &[
                "rev-parse",
                "--verify",
                "--quiet",
                "refs/remotes/origin/HEAD",
            ],
        )
        .is_some()
        {
            "refs/remotes/origin/HEAD".to_string()
        } else {
            "HEAD".to_string()
        };
        Ok(Repository {
            path,
            url: url.to_string(),
            branch,
        })
    }

    pub fn open(path: &Path) -> Result<Repository, RepoError> {
        Self::open_with_url(path, &path.to_string_lossy())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// The ref walked by [`Self::list_main_commits`].
    pub fn main_ref(&self) -> &str {
        &self.branch
    }

    pub fn head_sha(&self) -> Result<Option<Sha>, RepoError> {
        let spec = format!("{}^{{commit}}", self.branch);
        match try_git(&self.path, &["rev-parse", "--verify", "--quiet", &spec]) {
            Some(out) => Ok(Some(out.trim().parse()?)),
            None => Ok(None),
        }
    }

    /// First-parent chain of the default branch, oldest first, keeping
    /// commits whose committer date falls in `[since, until]`.
    pub fn list_main_commits(
        &self,
        since: Option<DateTime<Utc>>,
        until: Option<DateTime<Utc>>,
    ) -> Result<Vec<CommitMeta>, RepoError> {
        let Some(head) = self.head_sha()? else {
            return Ok(Vec::new());
        };
        let out = self.git(&[
            "log",
            "--first-parent",
            "--reverse",
            "--format=%H %ct %P",
            head.as_str(),
        ])?;
        let mut commits = Vec::new();
        for line in out.lines().filter(|l| !l.is_empty()) {
            let meta = parse_meta_line(line)?;
            if since.is_some_and(|s| meta.commit_date < s)
                || until.is_some_and(|u| meta.commit_date > u)
            {
                continue;
            }
            commits.push(meta);
        }
        Ok(commits)
    }

    /// One pair per non-root commit; the parent is always the first parent,
    /// looked up even when it falls outside the listed window.
    pub fn make_pairs(&self, commits: &[CommitMeta]) -> Result<Vec<CommitPair>, RepoError> {
        let known: HashMap<&Sha, &CommitMeta> = commits.iter().map(|c| (&c.sha, c)).collect();
        let missing: Vec<&str> = commits
            .iter()
            .filter_map(|c| c.first_parent())
            .filter(|p| !known.contains_key(p))
            .map(Sha::as_str)
            .collect();
        let mut fetched: HashMap<Sha, CommitMeta> = HashMap::new();
        if !missing.is_empty() {
            let mut args = vec!["show", "-s", "--no-walk=unsorted", "--format=%H %ct %P"];
            args.extend(missing.iter().copied());
            for line in self.git(&args)?.lines().filter(|l| !l.is_empty()) {
                let meta = parse_meta_line(line)?;
                fetched.insert(meta.sha.clone(), meta);
            }
        }
        commits
            .iter()
            .filter_map(|child| child.first_parent().map(|p| (child, p)))
            .map(|(child, parent_sha)| {
                let parent = known
                    .get(parent_sha)
                    .copied()
                    .or_else(|| fetched.get(parent_sha))
                    .ok_or_else(|| {
                        RepoError::Malformed(format!("parent {parent_sha} not found"))
                    })?;
                Ok(CommitPair {
                    repo_url: self.url.clone(),
                    parent: parent.clone(),
                    child: child.clone(),
                })
            })
            .collect()
    }

    /// Zero-context diff of `.java` files between the pair's commits, with
    /// rename detection disabled.
    pub fn diff_java_changes(&self, pair: &CommitPair) -> Result<Vec<FileDiff>, RepoError> {
        let out = self.git(&[
            "diff",
            "--no-color",
            "--no-ext-diff",
            "--no-textconv",
            "--no-renames",
            "--text",
            "--unified=0",
            "--diff-algorithm=myers",
            "--src-prefix=a/",
            "--dst-prefix=b/",
            pair.parent.sha.as_str(),
            pair.child.sha.as_str(),
            "--",
            "*.java",
        ])?;
        Ok(parse_unified_diff(&out)?
            .into_iter()
            .filter(|f| f.path().ends_with(".java"))
            .collect())
    }

    /// File content at `sha`, decoded lossily.
    pub fn read_file_at(&self, sha: &Sha, path: &str) -> Result<String, RepoError> {
        let spec = format!("{sha}:{path}");
        if try_git(&self.path, &["cat-file", "-e", &spec]).is_none() {
            return Err(RepoError::NotFound {
                sha: sha.to_string(),
                path: path.to_string(),
            });
        }
        let bytes = self.git_bytes(&["cat-file", "blob", &spec], None)?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }

    /// All `.java` blobs in the tree of `sha`, sorted by path.
    pub fn java_files_at(&self, sha: &Sha) -> Result<Vec<TreeEntry>, RepoError> {
        let out = self.git_bytes(&["ls-tree", "-r", "-z", "--full-tree", sha.as_str()], None)?;
        let mut entries = Vec::new();
        for record in out.split(|&b| b == 0).filter(|r| !r.is_empty()) {
            let record = String::from_utf8_lossy(record);
            let (meta, path) = record
                .split_once('\t')
                .ok_or_else(|| RepoError::Malformed(record.to_string()))?;
            let mut fields = meta.split(' ');
            let (_mode, kind, oid) = (fields.next(), fields.next(), fields.next());
            if kind == Some("blob") && path.ends_with(".java") {
                entries.push(TreeEntry {
                    path: path.to_string(),
                    oid: oid.unwrap_or_default().to_string(),
                });
            }
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(entries)
    }

    /// Read many blobs with a single `git cat-file --batch` process.
    pub fn read_blobs(&self, oids: &[&str]) -> Result<Vec<String>, RepoError> {
        if oids.is_empty() {
            return Ok(Vec::new());
        }
        let mut input = oids.join("\n");
        input.push('\n');
        let out = self.git_bytes(&["cat-file", "--batch"], Some(input.as_bytes()))?;
        let mut blobs = Vec::with_capacity(oids.len());
        let mut rest = &out[..];
        for oid in oids {
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| RepoError::Malformed("truncated cat-file output".into()))?;
            let header = String::from_utf8_lossy(&rest[..nl]).into_owned();
            let size: usize = match header.split(' ').collect::<Vec<_>>()[..] {
                [_, "blob", size] => size
                    .parse()
                    .map_err(|_| RepoError::Malformed(header.clone()))?,
                _ => return Err(RepoError::Malformed(format!("{oid}: {header}"))),
            };
            let body_start = nl + 1;
            let body_end = body_start + size;
            if rest.len() < body_end + 1 {
                return Err(RepoError::Malformed("truncated blob".into()));
            }
            blobs.push(String::from_utf8_lossy(&rest[body_start..body_end]).into_owned());
            rest = &rest[body_end + 1..];
        }
        Ok(blobs)
    }

    /// Detached worktree of `sha` at `dir`, for tools that need files on disk.
    pub fn add_worktree(&self, sha: &Sha, dir: &Path) -> Result<(), RepoError> {
        let dir_str = dir.to_string_lossy();
        self.git(&[
            "worktree",
            "add",
            "--force",
            "--detach",
            "--quiet",
            &dir_str,
            sha.as_str(),
        ])?;
        Ok(())
    }

    pub fn remove_worktree(&self, dir: &Path) -> Result<(), RepoError> {
        let dir_str = dir.to_string_lossy();
        self.git(&["worktree", "remove", "--force", &dir_str])?;
        Ok(())
    }

    fn git(&self, args: &[&str]) -> Result<String, RepoError> {
        run_git(Some(&self.path), args)
    }

    fn git_bytes(&self, args: &[&str], stdin: Option<&[u8]>) -> Result<Vec<u8>, RepoError> {
        run_git_bytes(Some(&self.path), args, stdin)
    }
}

fn parse_meta_line(line: &str) -> Result<CommitMeta, RepoError> {
    let mut fields = line.split(' ');
    let sha: Sha = fields
        .next()
        .ok_or_else(|| RepoError::Malformed(line.to_string()))?
        .parse()?;
    let ts: i64 = fields
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| RepoError::Malformed(line.to_string()))?;
    let commit_date =
        DateTime::from_timestamp(ts, 0).ok_or_else(|| RepoError::Malformed(line.to_string()))?;
    let parent_shas = fields
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Sha>, _>>()?;
    Ok(CommitMeta {
        sha,
        commit_date,
        parent_shas,
    })
}

fn git_command(dir: Option<&Path>) -> Command {
    let mut cmd = Command::new("git");
    if let Some(dir) = dir {
        cmd.arg("-C").arg(dir);
    }
    cmd.args(["-c", "core.quotepath=off", "-c", "diff.noprefix=false"])
        .env("GIT_TERMINAL_PROMPT", "0")
        .env("LC_ALL", "C");
    cmd
}

fn run_git(dir: Option<&Path>, args: &[&str]) -> Result<String, RepoError> {
    let out = run_git_bytes(dir, args, None)?;
    String::from_utf8(out).map_err(|e| RepoError::Malformed(e.to_string()))
}

fn run_git_bytes(
    dir: Option<&Path>,
    args: &[&str],
    stdin: Option<&[u8]>,
) -> Result<Vec<u8>, RepoError> {
    let mut cmd = git_command(dir);
    cmd.args(args)
        .stdin(if stdin.is_some() {
            Stdio::piped()
        } else {
            Stdio::null()
        })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd.spawn().map_err(RepoError::Spawn)?;
    let writer = match (stdin, child.stdin.take()) {
        (Some(data), Some(mut pipe)) => {
            let data = data.to_vec();
            Some(std::thread::spawn(move || pipe.write_all(&data)))
        }
        _ => None,
    };
    let output = child.wait_with_output().map_err(RepoError::Spawn)?;
    if let Some(handle) = writer {
        handle
            .join()
            .map_err(|_| RepoError::Malformed("stdin writer panicked".into()))??;
    }
    if !output.status.success() {
        return Err(RepoError::Git {
            args: args.join(" "),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    Ok(output.stdout)
}

fn try_git(dir: &Path, args: &[&str]) -> Option<String> {
    run_git(Some(dir), args).ok()
}
