//! Small synthetic Git repositories with known histories, built with the
//! `git` command line. Author and committer identity and dates are fixed, so
//! every build yields the same commit ids.
//!
//! The demo repository (`build_demo_repo`) has this main-branch history,
//! one commit per day from 2023-01-01 10:00 UTC:
//!
//! ```text
//! c1  App.java, Util.java, README.md
//! c2  README only
//! c3  insert `throw e;` into App's empty catch block
//! c4  add an import above Util's class (shifts its lines)
//! c5  delete Util.java
//! c6  add Config.java with an over-long line        f1  add Side.java (branch `feature`)
//! m   merge `feature` (first parent c6)
//! c9  wrap Config's long line
//! c10 edit App's println argument
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::repo::{RepoError, Sha};

#[derive(Debug, Clone)]
pub struct FixtureRepo {
    pub path: PathBuf,
    /// Commit name -> id.
    pub commits: BTreeMap<String, Sha>,
}

impl FixtureRepo {
    pub fn sha(&self, name: &str) -> &Sha {
        &self.commits[name]
    }

    /// Reverse lookup of a commit id.
    pub fn name_of(&self, sha: &str) -> Option<&str> {
        self.commits
            .iter()
            .find(|(_, s)| s.as_str() == sha)
            .map(|(n, _)| n.as_str())
    }
}

struct Builder {
    dir: PathBuf,
    commits: BTreeMap<String, Sha>,
}

impl Builder {
    fn init(dir: &Path) -> Result<Builder, RepoError> {
        std::fs::create_dir_all(dir)?;
        let b = Builder {
            dir: dir.to_path_buf(),
            commits: BTreeMap::new(),
        };
        b.git(&["init", "--quiet", "--initial-branch=main"], None)?;
        Ok(b)
    }

    fn git(&self, args: &[&str], date: Option<&str>) -> Result<String, RepoError> {
        let mut cmd = Command::new("git");
        cmd.arg("-C")
            .arg(&self.dir)
            .args([
                "-c",
                "commit.gpgsign=false",
                "-c",
                "core.autocrlf=false",
                "-c",
                "merge.ff=false",
            ])
            .args(args)
            .env("GIT_AUTHOR_NAME", "Fixture Author")
            .env("GIT_AUTHOR_EMAIL", "author@example.org")
            .env("GIT_COMMITTER_NAME", "Fixture Committer")
            .env("GIT_COMMITTER_EMAIL", "committer@example.org")
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("GIT_CONFIG_GLOBAL", "/dev/null")
            .env("LC_ALL", "C");
        if let Some(d) = date {
            cmd.env("GIT_AUTHOR_DATE", d).env("GIT_COMMITTER_DATE", d);
        }
        let out = cmd.output().map_err(RepoError::Spawn)?;
        if !out.status.success() {
            return Err(RepoError::Git {
                args: args.join(" "),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    fn write(&self, path: &str, content: &str) -> Result<(), RepoError> {
        let full = self.dir.join(path);
        std::fs::create_dir_all(full.parent().expect("file in a directory"))?;
        std::fs::write(full, content)?;
        Ok(())
    }

    fn remove(&self, path: &str) -> Result<(), RepoError> {
        self.git(&["rm", "--quiet", path], None).map(|_| ())
    }

    fn commit(&mut self, name: &str, day: u32, message: &str) -> Result<Sha, RepoError> {
        let date = format!("2023-01-{day:02}T10:00:00Z");
        self.git(&["add", "--all"], None)?;
        self.git(
            &["commit", "--quiet", "--allow-empty", "-m", message],
            Some(&date),
        )?;
        self.record(name)
    }

    fn record(&mut self, name: &str) -> Result<Sha, RepoError> {
        let sha: Sha = self.git(&["rev-parse", "HEAD"], None)?.trim().parse()?;
        self.commits.insert(name.to_string(), sha.clone());
        Ok(sha)
    }

    fn finish(self) -> FixtureRepo {
        FixtureRepo {
            path: self.dir,
            commits: self.commits,
        }
    }
}

const APP_V1: &str = r#"package demo;
public class App {
    static void start() { System.out.println("start"); }
    static void run() {
        try {
            work();
        } catch (RuntimeException e) {
            handle(e);
        }
        try { work(); } catch (IllegalStateException e) {
        }
    }
    static void handle(RuntimeException e) { }
    static void work() {
    }
}
"#;

const UTIL_V1: &str = r#"package demo;
class Util {
    static void log(String s) { System.out.print(s); }
}
"#;

const CONFIG_LONG: &str = concat!(
    "package demo;\n",
    "class Config {\n",
    "    static final String DEFAULT_ENDPOINT = \"https://service.example.org/api/v1/resources/items?expand=all&limit=500&offset=0&sort=name\";\n",
    "}\n",
);

const CONFIG_WRAPPED: &str = concat!(
    "package demo;\n",
    "class Config {\n",
    "    static final String DEFAULT_ENDPOINT =\n",
    "        \"https://service.example.org/api/v1/resources/items?expand=all&limit=500&offset=0&sort=name\";\n",
    "}\n",
);

const SIDE: &str = r#"package demo;
class Side {
    void show() { System.out.println("side"); }
}
"#;

/// The ten-commit demo history described in the module docs. `dir` must not
/// exist or be empty.
pub fn build_demo_repo(dir: &Path) -> Result<FixtureRepo, RepoError> {
    let mut b = Builder::init(dir)?;
    b.write("src/App.java", APP_V1)?;
    b.write("src/Util.java", UTIL_V1)?;
    b.write("README.md", "demo\n")?;
    b.commit("c1", 1, "Initial import")?;

    b.write("README.md", "demo\n\nA fixture project.\n")?;
    b.commit("c2", 2, "Describe the project")?;

    b.write(
        "src/App.java",
        &APP_V1.replace(
            "catch (IllegalStateException e) {\n        }",
            "catch (IllegalStateException e) {\n            throw e;\n        }",
        ),
    )?;
    b.commit("c3", 3, "Rethrow instead of swallowing")?;

    b.write(
        "src/Util.java",
        &UTIL_V1.replace(
            "package demo;\n",
            "package demo;\nimport java.util.List;\n\n",
        ),
    )?;
    b.commit("c4", 4, "Import List")?;

    b.remove("src/Util.java")?;
    b.commit("c5", 5, "Drop Util")?;

    b.git(&["checkout", "--quiet", "-b", "feature"], None)?;
    b.write("src/Side.java", SIDE)?;
    b.commit("f1", 6, "Add Side")?;

    b.git(&["checkout", "--quiet", "main"], None)?;
    b.write("src/Config.java", CONFIG_LONG)?;
    b.commit("c6", 7, "Add Config")?;

    b.git(
        &[
            "merge",
            "--quiet",
            "--no-ff",
            "--no-edit",
            "-m",
            "Merge feature",
            "feature",
        ],
        Some("2023-01-08T10:00:00Z"),
    )?;
    b.record("m")?;

    b.write("src/Config.java", CONFIG_WRAPPED)?;
    b.commit("c9", 9, "Wrap long line")?;

    let app = std::fs::read_to_string(dir.join("src/App.java"))?;
    b.write(
        "src/App.java",
        &app.replace("println(\"start\")", "println(\"begin\")"),
    )?;
    b.commit("c10", 10, "Rename start message")?;
    Ok(b.finish())
}

/// Two commits: `W.java` has the same `System.out.println` warning at lines 3
/// and 10; the second commit deletes line 3.
pub fn build_conflict_repo(dir: &Path) -> Result<FixtureRepo, RepoError> {
    let mut b = Builder::init(dir)?;
    let mut lines = vec![
        "package demo;".to_string(),
        "class W {".to_string(),
        "    void a() { System.out.println(\"x\"); }".to_string(),
    ];
    for i in 4..=9 {
        lines.push(format!("    int f{i} = {i};"));
    }
    lines.push("    void c() { System.out.println(\"x\"); }".to_string());
    lines.push("}".to_string());
    b.write("src/W.java", &(lines.join("\n") + "\n"))?;
    b.commit("c1", 1, "Add W")?;
    lines.remove(2);
    b.write("src/W.java", &(lines.join("\n") + "\n"))?;
    b.commit("c2", 2, "Remove a()")?;
    Ok(b.finish())
}

/// Four commits: `K.java` keeps one `System.out.println` warning while each
/// later commit edits `Other.java`, so the warning persists across three
/// Java-changing pairs.
pub fn build_keep_last_repo(dir: &Path) -> Result<FixtureRepo, RepoError> {
    let mut b = Builder::init(dir)?;
    b.write(
        "src/K.java",
        "package demo;\nclass K {\n    void k() { System.out.println(\"k\"); }\n}\n",
    )?;
    b.write(
        "src/Other.java",
        "package demo;\nclass Other {\n    int v = 0;\n}\n",
    )?;
    b.commit("c1", 1, "Add K and Other")?;
    for (i, day) in [(1, 2), (2, 3), (3, 4)] {
        b.write(
            "src/Other.java",
            &format!("package demo;\nclass Other {{\n    int v = {i};\n}}\n"),
        )?;
        b.commit(&format!("c{}", i + 1), day, &format!("Bump v to {i}"))?;
    }
    Ok(b.finish())
}
