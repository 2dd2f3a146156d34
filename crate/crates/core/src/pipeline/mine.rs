use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use rayon::ThreadPool;

use super::{
    read_repo_list, write_jsonl, ManifestEntry, PipelineError, RunConfig, SkipReason, Status,
};
use crate::analyzer::{
    builtin_analyze_file, parse_report_file, run_external_analyzer, AnalyzerError, Report, Tool,
    Warning,
};
use crate::classifier::classify_pair;
use crate::dataset::{repo_slug, MinedRow};
use crate::repo::{CommitPair, FileDiff, Repository, Sha};

#[derive(Debug, Clone)]
pub struct RepoOutcome {
    pub repo: String,
    pub error: Option<String>,
    pub pairs: usize,
    pub java_pairs: usize,
    pub records: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MineSummary {
    pub repos: Vec<RepoOutcome>,
    pub manifest: PathBuf,
}

impl MineSummary {
    pub fn failed(&self) -> usize {
        self.repos.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn records(&self) -> usize {
        self.repos.iter().map(|r| r.records).sum()
    }

    /// 0 when every repository was mined, 1 when some failed.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed() > 0)
    }
}

/// Mine every repository of `config.repos`, one after another, each using a
/// pool of `config.workers` threads. The manifest is rewritten from scratch.
pub fn run_mine(config: &RunConfig) -> Result<MineSummary, PipelineError> {
    config.validate()?;
    std::fs::create_dir_all(&config.workdir)?;
    let manifest = config.manifest_path();
    if let Some(dir) = manifest.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;

    let mut entries = Vec::new();
    let mut summary = MineSummary {
        repos: Vec::new(),
        manifest: manifest.clone(),
    };
    for url in &config.repos {
        log::info!("mining {url}");
        let (outcome, mut repo_entries) = mine_repo(url, config, &pool);
        if let Some(err) = &outcome.error {
            log::error!("{url}: {err}");
        }
        entries.append(&mut repo_entries);
        summary.repos.push(outcome);
    }
    write_jsonl(&manifest, &entries)?;
    Ok(summary)
}

/// [`run_mine`] over the repositories listed in `list`.
pub fn run_feed(list: &Path, config: &RunConfig) -> Result<MineSummary, PipelineError> {
    let mut config = config.clone();
    config.repos = read_repo_list(list)?;
    run_mine(&config)
}

/// Mine one repository. Failures are reported in the outcome and the
/// manifest entries rather than returned, so other repositories can proceed.
pub fn mine_repo(
    url: &str,
    config: &RunConfig,
    pool: &ThreadPool,
) -> (RepoOutcome, Vec<ManifestEntry>) {
    let mut entries = Vec::new();
    let mut outcome = RepoOutcome {
        repo: url.to_string(),
        error: None,
        pairs: 0,
        java_pairs: 0,
        records: 0,
    };
    let mut commits = 0;
    if let Err(e) = mine_inner(url, config, pool, &mut entries, &mut outcome, &mut commits) {
        outcome.error = Some(e.to_string());
    }
    entries.push(ManifestEntry::Repo {
        repo: url.to_string(),
        status: if outcome.error.is_some() {
            Status::Failed
        } else {
            Status::Ok
        },
        commits,
        pairs: outcome.pairs,
        java_pairs: outcome.java_pairs,
        records: outcome.records,
        detail: outcome.error.clone(),
    });
    (outcome, entries)
}

fn mine_inner(
    url: &str,
    config: &RunConfig,
    pool: &ThreadPool,
    entries: &mut Vec<ManifestEntry>,
    outcome: &mut RepoOutcome,
    commit_count: &mut usize,
) -> Result<(), PipelineError> {
    let base = config.workdir.join(repo_slug(url));
    let repo = Repository::clone_or_fetch(url, &base.join("repo"))?;
    let commits = repo.list_main_commits(config.since, config.until)?;
    *commit_count = commits.len();
    let pairs = repo.make_pairs(&commits)?;
    let pairs = config
        .commit_filter
        .apply(pairs)
        .map_err(PipelineError::Config)?;
    outcome.pairs = pairs.len();

    let pairs_dir = base.join("pairs");
    if pairs_dir.exists() {
        std::fs::remove_dir_all(&pairs_dir)?;
    }
    std::fs::create_dir_all(&pairs_dir)?;

    // Phase 1: diffs.
    let diffs: Vec<_> = pool.install(|| {
        pairs
            .par_iter()
            .map(|p| repo.diff_java_changes(p))
            .collect()
    });
    let mut java_pairs: Vec<(usize, Arc<CommitPair>, Vec<FileDiff>)> = Vec::new();
    for (i, (pair, diff)) in pairs.into_iter().zip(diffs).enumerate() {
        let skip = |reason, detail| ManifestEntry::Pair {
            repo: url.to_string(),
            chain_index: i,
            parent_sha: pair.parent.sha.to_string(),
            child_sha: pair.child.sha.to_string(),
            tool: None,
            status: Status::Skipped,
            reason: Some(reason),
            actionable: 0,
            non_actionable: 0,
            detail,
        };
        match diff {
            Err(e) => entries.push(skip(SkipReason::DiffError, Some(e.to_string()))),
            Ok(d) if d.is_empty() => entries.push(skip(SkipReason::NoJavaChange, None)),
            Ok(d) => java_pairs.push((i, Arc::new(pair), d)),
        }
    }
    outcome.java_pairs = java_pairs.len();

    // Phase 2: each (tool, commit) analyzed once.
    let needed: BTreeSet<(Tool, Sha)> = java_pairs
        .iter()
        .flat_map(|(_, p, _)| {
            config
                .analyzers
                .iter()
                .flat_map(|&t| [(t, p.parent.sha.clone()), (t, p.child.sha.clone())])
        })
        .collect();
    let analysis = Analysis {
        repo: &repo,
        base: &base,
        config,
        blob_cache: Mutex::new(HashMap::new()),
        worktree_lock: Mutex::new(()),
    };
    let needed: Vec<(Tool, Sha)> = needed.into_iter().collect();
    let results: Vec<Result<(Report, bool), AnalyzerError>> = pool.install(|| {
        needed
            .par_iter()
            .map(|(tool, sha)| analysis.run(*tool, sha))
            .collect()
    });
    let mut reports: HashMap<(Tool, Sha), Result<Report, AnalyzerError>> = HashMap::new();
    for ((tool, sha), result) in needed.into_iter().zip(results) {
        entries.push(match &result {
            Ok((report, cached)) => ManifestEntry::Analysis {
                repo: url.to_string(),
                tool,
                sha: sha.to_string(),
                status: Status::Ok,
                cached: *cached,
                warnings: report.warnings.len(),
                detail: (report.skipped_instances > 0).then(|| {
                    format!(
                        "{} findings without source location",
                        report.skipped_instances
                    )
                }),
            },
            Err(e) => ManifestEntry::Analysis {
                repo: url.to_string(),
                tool,
                sha: sha.to_string(),
                status: Status::Failed,
                cached: false,
                warnings: 0,
                detail: Some(e.to_string()),
            },
        });
        reports.insert((tool, sha), result.map(|(r, _)| r));
    }

    // Phase 3: classify.
    let classified: Vec<Result<(usize, Vec<ManifestEntry>), PipelineError>> = pool.install(|| {
        java_pairs
            .par_iter()
            .map(|(i, pair, diffs)| {
                let mut rows = Vec::new();
                let mut pair_entries = Vec::new();
                let mut any = false;
                for &tool in &config.analyzers {
                    let parent = &reports[&(tool, pair.parent.sha.clone())];
                    let child = &reports[&(tool, pair.child.sha.clone())];
                    let mut entry = ManifestEntry::Pair {
                        repo: url.to_string(),
                        chain_index: *i,
                        parent_sha: pair.parent.sha.to_string(),
                        child_sha: pair.child.sha.to_string(),
                        tool: Some(tool),
                        status: Status::Ok,
                        reason: None,
                        actionable: 0,
                        non_actionable: 0,
                        detail: None,
                    };
                    match (parent, child) {
                        (Ok(rp), Ok(rc)) => {
                            let c = classify_pair(rp, rc, diffs, pair);
                            if let ManifestEntry::Pair {
                                actionable,
                                non_actionable,
                                ..
                            } = &mut entry
                            {
                                *actionable = c.actionable.len();
                                *non_actionable = c.non_actionable.len();
                            }
                            rows.extend(
                                c.into_stream().map(|cw| MinedRow::from_classified(&cw, *i)),
                            );
                            any = true;
                        }
                        (Err(e), _) | (_, Err(e)) => {
                            if let ManifestEntry::Pair {
                                status,
                                reason,
                                detail,
                                ..
                            } = &mut entry
                            {
                                *status = Status::Skipped;
                                *reason = Some(match e {
                                    AnalyzerError::BuildFailed(_) => SkipReason::BuildFailed,
                                    _ => SkipReason::AnalyzerError,
                                });
                                *detail = Some(e.to_string());
                            }
                        }
                    }
                    pair_entries.push(entry);
                }
                if any {
                    write_jsonl(&pairs_dir.join(format!("{}.jsonl", pair.child.sha)), &rows)?;
                }
                Ok((rows.len(), pair_entries))
            })
            .collect()
    });
    for result in classified {
        let (n, mut pair_entries) = result?;
        outcome.records += n;
        entries.append(&mut pair_entries);
    }
    Ok(())
}

/// Builtin warnings keyed by (path, blob id).
type BlobCache = HashMap<(String, String), Arc<Vec<Warning>>>;

struct Analysis<'a> {
    repo: &'a Repository,
    base: &'a Path,
    config: &'a RunConfig,
    /// Unchanged files are analyzed once.
    blob_cache: Mutex<BlobCache>,
    worktree_lock: Mutex<()>,
}

impl Analysis<'_> {
    /// The report and whether it came from an earlier run's cache.
    fn run(&self, tool: Tool, sha: &Sha) -> Result<(Report, bool), AnalyzerError> {
        match tool {
            Tool::Builtin => self.builtin(sha).map(|r| (r, false)),
            Tool::Pmd | Tool::SpotBugs => self.external(tool, sha),
        }
    }

    fn builtin(&self, sha: &Sha) -> Result<Report, AnalyzerError> {
        let repo_err = |e: crate::repo::RepoError| AnalyzerError::ToolFailed {
            tool: Tool::Builtin,
            detail: e.to_string(),
        };
        let files = self.repo.java_files_at(sha).map_err(repo_err)?;
        let missing: Vec<&crate::repo::TreeEntry> = {
            let cache = self.blob_cache.lock().expect("cache lock");
            files
                .iter()
                .filter(|f| !cache.contains_key(&(f.path.clone(), f.oid.clone())))
                .collect()
        };
        let oids: Vec<&str> = missing.iter().map(|f| f.oid.as_str()).collect();
        let blobs = self.repo.read_blobs(&oids).map_err(repo_err)?;
        let fresh: Vec<_> = missing
            .iter()
            .zip(&blobs)
            .map(|(f, text)| {
                (
                    (f.path.clone(), f.oid.clone()),
                    Arc::new(builtin_analyze_file(&f.path, text)),
                )
            })
            .collect();
        let mut cache = self.blob_cache.lock().expect("cache lock");
        cache.extend(fresh);
        let warnings = files
            .iter()
            .flat_map(|f| cache[&(f.path.clone(), f.oid.clone())].iter().cloned())
            .collect();
        Ok(Report {
            commit_sha: sha.clone(),
            warnings,
            skipped_instances: 0,
        })
    }

    fn external(&self, tool: Tool, sha: &Sha) -> Result<(Report, bool), AnalyzerError> {
        let name = format!("{}-{}", tool.cli_name(), sha);
        let report_path = self.base.join("reports").join(format!("{name}.xml"));
        let worktree = self.base.join("worktrees").join(&name);
        let cached = report_path.is_file();
        if !cached {
            let tmp = report_path.with_extension("xml.partial");
            self.with_worktree(sha, &worktree, |wt| {
                run_external_analyzer(tool, wt, &tmp, &self.config.external).map(|_| ())
            })?;
            std::fs::rename(&tmp, &report_path)?;
        }
        let mut report = parse_report_file(tool, &report_path, sha.clone())?;
        report.relativize(&worktree);
        if tool == Tool::SpotBugs {
            let files = self
                .repo
                .java_files_at(sha)
                .map_err(|e| AnalyzerError::ToolFailed {
                    tool,
                    detail: e.to_string(),
                })?;
            report.resolve_source_paths(files.iter().map(|f| f.path.as_str()));
        }
        Ok((report, cached))
    }

    fn with_worktree(
        &self,
        sha: &Sha,
        dir: &Path,
        f: impl FnOnce(&Path) -> Result<(), AnalyzerError>,
    ) -> Result<(), AnalyzerError> {
        let git_err = |e: crate::repo::RepoError| AnalyzerError::ToolFailed {
            tool: Tool::Builtin,
            detail: format!("worktree: {e}"),
        };
        {
            let _guard = self.worktree_lock.lock().expect("worktree lock");
            if dir.exists() {
                let _ = self.repo.remove_worktree(dir);
                let _ = std::fs::remove_dir_all(dir);
            }
            self.repo.add_worktree(sha, dir).map_err(git_err)?;
        }
        let result = f(dir);
        let _guard = self.worktree_lock.lock().expect("worktree lock");
        if let Err(e) = self.repo.remove_worktree(dir) {
            log::warn!("could not remove worktree {}: {e}", dir.display());
        }
        result
    }
}
