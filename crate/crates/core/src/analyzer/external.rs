use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use super::{AnalyzerError, RuleUniverse, Tool};

/// A command line with `{src}`, `{report}`, `{ruleset}` and `{classes}`
/// placeholders. Arguments are split on whitespace; no shell quoting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTemplate {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandTemplate {
    pub fn parse(line: &str) -> Option<CommandTemplate> {
        let mut parts = line.split_whitespace().map(str::to_string);
        Some(CommandTemplate {
            program: parts.next()?,
            args: parts.collect(),
        })
    }

    fn render(&self, vars: &[(&str, &str)]) -> Command {
        let expand = |s: &str| {
            vars.iter().fold(s.to_string(), |acc, (k, v)| {
                acc.replace(&format!("{{{k}}}"), v)
            })
        };
        let mut cmd = Command::new(expand(&self.program));
        cmd.args(self.args.iter().map(|a| expand(a)));
        cmd
    }
}

/// How PMD, SpotBugs and the project build are invoked.
#[derive(Debug, Clone)]
pub struct ExternalConfig {
    pub pmd: CommandTemplate,
    pub spotbugs: CommandTemplate,
    /// Build command run before SpotBugs; `None` picks Maven or Gradle from
    /// the files present in the worktree.
    pub build: Option<CommandTemplate>,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        ExternalConfig {
            pmd: CommandTemplate::parse(
                "pmd check --no-progress --no-cache --no-fail-on-violation -d {src} -R {ruleset} -f xml -r {report}",
            )
            .expect("non-empty"),
            spotbugs: CommandTemplate::parse("spotbugs -textui -quiet -xml:withMessages -output {report} {classes}")
                .expect("non-empty"),
            build: None,
        }
    }
}

/// Run an external analyzer over a checked-out worktree and return the path
/// of the XML report it produced (`report_path`).
///
/// PMD analyzes sources directly. SpotBugs needs compiled classes, so the
/// project is built first and a failing build yields
/// [`AnalyzerError::BuildFailed`], which the pipeline records as a skip for
/// SpotBugs only.
pub fn run_external_analyzer(
    tool: Tool,
    worktree: &Path,
    report_path: &Path,
    config: &ExternalConfig,
) -> Result<PathBuf, AnalyzerError> {
    if let Some(dir) = report_path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let src = worktree.to_string_lossy().into_owned();
    let report = report_path.to_string_lossy().into_owned();
    match tool {
        Tool::Pmd => {
            if !contains_java(worktree)? {
                std::fs::write(report_path, EMPTY_PMD_REPORT)?;
                return Ok(report_path.to_path_buf());
            }
            let ruleset_path = report_path.with_extension("ruleset.xml");
            std::fs::write(&ruleset_path, pmd_ruleset_xml())?;
            let ruleset = ruleset_path.to_string_lossy().into_owned();
            let mut cmd =
                config
                    .pmd
                    .render(&[("src", &src), ("report", &report), ("ruleset", &ruleset)]);
            // PMD exits with 4 when it found violations.
            let result = run(&mut cmd, worktree, &[0, 4]);
            let _ = std::fs::remove_file(&ruleset_path);
            result.map_err(|detail| AnalyzerError::ToolFailed { tool, detail })?;
        }
        Tool::SpotBugs => {
            let build = match &config.build {
                Some(b) => b.clone(),
                None => detect_build(worktree).ok_or_else(|| {
                    AnalyzerError::BuildFailed("no pom.xml or Gradle build file".into())
                })?,
            };
            run(&mut build.render(&[("src", &src)]), worktree, &[0])
                .map_err(AnalyzerError::BuildFailed)?;
            let mut classes = class_dirs(worktree);
            if classes.is_empty() {
                classes.push(src.clone());
            }
            // `{classes}` standing alone expands to one argument per directory
            let mut cmd = Command::new(&config.spotbugs.program);
            for arg in &config.spotbugs.args {
                if arg == "{classes}" {
                    cmd.args(&classes);
                } else {
                    cmd.arg(arg.replace("{src}", &src).replace("{report}", &report));
                }
            }
            run(&mut cmd, worktree, &[0])
                .map_err(|detail| AnalyzerError::ToolFailed { tool, detail })?;
        }
        Tool::Builtin => return Err(AnalyzerError::NotExternal(tool)),
    }
    if !report_path.is_file() {
        return Err(AnalyzerError::ToolFailed {
            tool,
            detail: format!("no report written to {}", report_path.display()),
        });
    }
    Ok(report_path.to_path_buf())
}

const EMPTY_PMD_REPORT: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pmd xmlns=\"http://pmd.sourceforge.net/report/2.0.0\"/>\n";

/// PMD ruleset enabling every bundled rule category except Documentation.
pub fn pmd_ruleset_xml() -> String {
    let universe = RuleUniverse::bundled(Tool::Pmd).expect("bundled");
    let mut refs: Vec<String> = universe
        .rule_ids()
        .filter_map(|r| universe.category_of(r))
        .map(|c| c.to_ascii_lowercase().replace(' ', ""))
        .collect();
    refs.sort();
    refs.dedup();
    let mut xml = String::from(
        "<?xml version=\"1.0\"?>\n<ruleset name=\"nascar\" xmlns=\"http://pmd.sourceforge.net/ruleset/2.0.0\">\n  <description>All built-in Java rules except Documentation</description>\n",
    );
    for r in refs {
        xml.push_str(&format!("  <rule ref=\"category/java/{r}.xml\"/>\n"));
    }
    xml.push_str("</ruleset>\n");
    xml
}

fn run(cmd: &mut Command, cwd: &Path, ok_codes: &[i32]) -> Result<(), String> {
    let output = cmd
        .current_dir(cwd)
        .stdin(Stdio::null())
        .output()
        .map_err(|e| format!("cannot run {:?}: {e}", cmd.get_program()))?;
    match output.status.code() {
        Some(code) if ok_codes.contains(&code) => Ok(()),
        code => {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let tail: String = stderr
                .lines()
                .rev()
                .take(5)
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect::<Vec<_>>()
                .join("\n");
            Err(format!("exit status {code:?}: {tail}"))
        }
    }
}

fn detect_build(worktree: &Path) -> Option<CommandTemplate> {
    if worktree.join("pom.xml").is_file() {
        CommandTemplate::parse("mvn -q -B -DskipTests compile")
    } else if worktree.join("build.gradle").is_file() || worktree.join("build.gradle.kts").is_file()
    {
        let gradle = if worktree.join("gradlew").is_file() {
            "./gradlew"
        } else {
            "gradle"
        };
        CommandTemplate::parse(&format!("{gradle} -q compileJava"))
    } else {
        None
    }
}

fn class_dirs(worktree: &Path) -> Vec<String> {
    ["target/classes", "build/classes/java/main"]
        .iter()
        .map(|d| worktree.join(d))
        .filter(|d| d.is_dir())
        .map(|d| d.to_string_lossy().into_owned())
        .collect()
}

fn contains_java(dir: &Path) -> std::io::Result<bool> {
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let entry = entry?;
            let ty = entry.file_type()?;
            if ty.is_dir() {
                if entry.file_name() != ".git" {
                    stack.push(entry.path());
                }
            } else if entry.path().extension().is_some_and(|e| e == "java") {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
