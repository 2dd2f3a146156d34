//! Zero-context unified diff model and parser.
//!
//! Input is the output of `git diff -U0 --no-renames`; only the file headers
//! and `@@ -a,b +c,d @@` hunk headers matter; changed lines are consumed by
//! count so that content lines such as `--- a/x` are never mistaken for headers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One block of changed lines. `old_len == 0` is a pure insertion after line
/// `old_start`; `new_len == 0` is a pure deletion after line `new_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
}

impl Hunk {
    pub fn is_pure_insertion(&self) -> bool {
        self.old_len == 0
    }

    pub fn is_pure_deletion(&self) -> bool {
        self.new_len == 0
    }

    /// Inclusive old-side line range, `None` for pure insertions.
    pub fn old_range(&self) -> Option<(u32, u32)> {
        (self.old_len > 0).then(|| (self.old_start, self.old_start + self.old_len - 1))
    }

    /// Region of the new file that corresponds to this change. Pure deletions
    /// map to the two lines adjacent to the deletion point.
    pub fn new_region(&self) -> (u32, u32) {
        if self.new_len == 0 {
            (self.new_start, self.new_start + 1)
        } else {
            (self.new_start, self.new_start + self.new_len - 1)
        }
    }
}

/// Changes to a single file. `old_path` is absent for added files and
/// `new_path` for deleted ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
}

impl FileDiff {
    pub fn is_deletion(&self) -> bool {
        self.old_path.is_some() && self.new_path.is_none()
    }

    pub fn is_addition(&self) -> bool {
        self.old_path.is_none() && self.new_path.is_some()
    }

    /// Either path, preferring the new one.
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }

    /// Net change in line count implied by the hunks.
    pub fn line_delta(&self) -> i64 {
        self.hunks
            .iter()
            .map(|h| i64::from(h.new_len) - i64::from(h.old_len))
            .sum()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffParseError {
    #[error("line {line}: malformed hunk header {header:?}")]
    HunkHeader { line: usize, header: String },
    #[error("line {line}: hunk content before any file header")]
    Orphan { line: usize },
    #[error("line {line}: unexpected {found:?} inside hunk")]
    HunkBody { line: usize, found: String },
    #[error("unterminated hunk at end of input for {path}")]
    Truncated { path: String },
    #[error("{path}: {reason}")]
    Invariant { path: String, reason: String },
    #[error("line {line}: bad quoted path {raw:?}")]
    Quoting { line: usize, raw: String },
}

#[derive(Default)]
struct Pending {
    header_paths: Option<(String, String)>,
    old_path: Option<Option<String>>,
    new_path: Option<Option<String>>,
    created: bool,
    deleted: bool,
    hunks: Vec<Hunk>,
}

impl Pending {
    fn finish(self) -> Result<Option<FileDiff>, DiffParseError> {
        let (hdr_old, hdr_new) = self
            .header_paths
            .map(|(a, b)| (Some(a), Some(b)))
            .unwrap_or((None, None));
        let old_path = match self.old_path {
            Some(p) => p,
            None if self.created => None,
            None => hdr_old,
        };
        let new_path = match self.new_path {
            Some(p) => p,
            None if self.deleted => None,
            None => hdr_new,
        };
        if old_path.is_none() && new_path.is_none() {
            return Ok(None);
        }
        let diff = FileDiff {
            old_path,
            new_path,
            hunks: self.hunks,
        };
        check_hunks(&diff)?;
        Ok(Some(diff))
    }
}

fn check_hunks(diff: &FileDiff) -> Result<(), DiffParseError> {
    let invariant = |reason: String| DiffParseError::Invariant {
        path: diff.path().to_string(),
        reason,
    };
    let mut prev_end: Option<u32> = None;
    for h in &diff.hunks {
        if h.old_len == 0 && h.new_len == 0 {
            return Err(invariant("empty hunk".into()));
        }
        // Insertions sit between lines, so an insertion after line k may
        // follow a change ending at line k.
        let start = if h.old_len == 0 {
            h.old_start + 1
        } else {
            h.old_start
        };
        if let Some(end) = prev_end {
            if start <= end {
                return Err(invariant(format!(
                    "hunk at old line {} overlaps previous hunk",
                    h.old_start
                )));
            }
        }
        prev_end = Some(if h.old_len == 0 {
            h.old_start
        } else {
            h.old_start + h.old_len - 1
        });
    }
    Ok(())
}

/// Parse `git diff` output into per-file hunks.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FileDiff>, DiffParseError> {
    let mut files = Vec::new();
    let mut current: Option<Pending> = None;
    let mut remaining_old = 0u32;
    let mut remaining_new = 0u32;

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);

        if remaining_old > 0 || remaining_new > 0 {
            match line.as_bytes().first() {
                Some(b'-') if remaining_old > 0 => remaining_old -= 1,
                Some(b'+') if remaining_new > 0 => remaining_new -= 1,
                Some(b' ') if remaining_old > 0 && remaining_new > 0 => {
                    remaining_old -= 1;
                    remaining_new -= 1;
                }
                Some(b'\\') => {}
                _ => {
                    return Err(DiffParseError::HunkBody {
                        line: line_no,
                        found: line.to_string(),
                    })
                }
            }
            continue;
        }

        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(done) = current.take() {
                files.extend(done.finish()?);
            }
            current = Some(Pending {
                header_paths: split_git_header(rest),
                ..Pending::default()
            });
            continue;
        }
        if line.starts_with("@@") {
            let Some(pending) = current.as_mut() else {
                return Err(DiffParseError::Orphan { line: line_no });
            };
            let hunk = parse_hunk_header(line).ok_or_else(|| DiffParseError::HunkHeader {
                line: line_no,
                header: line.to_string(),
            })?;
            remaining_old = hunk.old_len;
            remaining_new = hunk.new_len;
            pending.hunks.push(hunk);
            continue;
        }
        let Some(pending) = current.as_mut() else {
            continue;
        };
        if let Some(rest) = line.strip_prefix("--- ") {
            pending.old_path = Some(parse_side_path(rest, "a/", line_no)?);
        } else if let Some(rest) = line.strip_prefix("+++ ") {
            pending.new_path = Some(parse_side_path(rest, "b/", line_no)?);
        } else if line.starts_with("new file mode") {
            pending.created = true;
        } else if line.starts_with("deleted file mode") {
            pending.deleted = true;
        }
        // index, mode, similarity and binary lines carry nothing we use.
    }

    if remaining_old > 0 || remaining_new > 0 {
        let path = current
            .as_ref()
            .and_then(|p| p.header_paths.as_ref().map(|(a, _)| a.clone()))
            .unwrap_or_default();
        return Err(DiffParseError::Truncated { path });
    }
    if let Some(done) = current.take() {
        files.extend(done.finish()?);
    }
    Ok(files)
}

fn parse_hunk_header(line: &str) -> Option<Hunk> {
    let body = line.strip_prefix("@@ ")?;
    let end = body.find(" @@")?;
    let mut parts = body[..end].split(' ');
    let old = parts.next()?.strip_prefix('-')?;
    let new = parts.next()?.strip_prefix('+')?;
    if parts.next().is_some() {
        return None;
    }
    let (old_start, old_len) = parse_range(old)?;
    let (new_start, new_len) = parse_range(new)?;
    Some(Hunk {
        old_start,
        old_len,
        new_start,
        new_len,
    })
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    match s.split_once(',') {
        Some((start, len)) => Some((start.parse().ok()?, len.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_side_path(
    rest: &str,
    prefix: &str,
    line: usize,
) -> Result<Option<String>, DiffParseError> {
    // git appends a tab after names containing spaces
    let rest = rest.strip_suffix('\t').unwrap_or(rest);
    if rest == "/dev/null" {
        return Ok(None);
    }
    let name = if rest.starts_with('"') {
        unquote_c_style(rest).ok_or_else(|| DiffParseError::Quoting {
            line,
            raw: rest.to_string(),
        })?
    } else {
        rest.to_string()
    };
    Ok(Some(name.strip_prefix(prefix).unwrap_or(&name).to_string()))
}

/// Paths from `diff --git a/X b/X`. Without renames both sides are equal,
/// which resolves the ambiguity of unquoted names containing spaces.
fn split_git_header(rest: &str) -> Option<(String, String)> {
    if rest.starts_with('"') {
        let (first, tail) = take_quoted(rest)?;
        let second = tail.trim_start();
        let second = if second.starts_with('"') {
            unquote_c_style(second)?
        } else {
            second.to_string()
        };
        return Some((strip(&first, "a/"), strip(&second, "b/")));
    }
    let bytes = rest.len();
    if bytes % 2 == 1 {
        let half = bytes / 2;
        let (a, b) = (&rest[..half], &rest[half + 1..]);
        if rest.as_bytes()[half] == b' ' && a.strip_prefix("a/") == b.strip_prefix("b/") {
            return Some((strip(a, "a/"), strip(b, "b/")));
        }
    }
    let (a, b) = rest.split_once(" b/")?;
    Some((strip(a, "a/"), b.to_string()))
}

fn strip(s: &str, prefix: &str) -> String {
    s.strip_prefix(prefix).unwrap_or(s).to_string()
}

fn take_quoted(s: &str) -> Option<(String, &str)> {
    let bytes = s.as_bytes();
    let mut i = 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return Some((unquote_c_style(&s[..=i])?, &s[i + 1..])),
            _ => i += 1,
        }
    }
    None
}

/// Decode git's C-style quoted path (`"a/caf\303\251.java"`).
fn unquote_c_style(s: &str) -> Option<String> {
    let inner = s.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = Vec::with_capacity(inner.len());
    let mut bytes = inner.bytes().peekable();
    while let Some(b) = bytes.next() {
        if b != b'\\' {
            out.push(b);
            continue;
        }
        let esc = bytes.next()?;
        let decoded = match esc {
            b'n' => b'\n',
            b't' => b'\t',
            b'r' => b'\r',
            b'a' => 0x07,
            b'b' => 0x08,
            b'f' => 0x0c,
            b'v' => 0x0b,
            b'\\' => b'\\',
            b'"' => b'"',
            b'0'..=b'3' => {
                let d1 = bytes.next()?;
                let d2 = bytes.next()?;
                if !(b'0'..=b'7').contains(&d1) || !(b'0'..=b'7').contains(&d2) {
                    return None;
                }
                ((esc - b'0') << 6) | ((d1 - b'0') << 3) | (d2 - b'0')
            }
            _ => return None,
        };
        out.push(decoded);
    }
    Some(String::from_utf8_lossy(&out).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODIFY: &str = "\
diff --git a/src/A.java b/src/A.java
index 1111111..2222222 100644
--- a/src/A.java
+++ b/src/A.java
@@ -3,2 +2,0 @@ class A {
-    int x;
-    int y;
@@ -10 +9 @@ void m() {
-        old();
+        neu();
@@ -20,0 +20,2 @@
+--- a/looks/like/a/header
++++ b/so/does/this
";

    #[test]
    fn parses_modify_with_three_hunks() {
        let files = parse_unified_diff(MODIFY).unwrap();
        assert_eq!(files.len(), 1);
        let f = &files[0];
        assert_eq!(f.old_path.as_deref(), Some("src/A.java"));
        assert_eq!(f.new_path.as_deref(), Some("src/A.java"));
        assert_eq!(
            f.hunks,
            vec![
                Hunk {
                    old_start: 3,
                    old_len: 2,
                    new_start: 2,
                    new_len: 0
                },
                Hunk {
                    old_start: 10,
                    old_len: 1,
                    new_start: 9,
                    new_len: 1
                },
                Hunk {
                    old_start: 20,
                    old_len: 0,
                    new_start: 20,
                    new_len: 2
                },
            ]
        );
        assert_eq!(f.line_delta(), 0);
    }

    #[test]
    fn added_and_deleted_files() {
        let text = "\
diff --git a/B.java b/B.java
new file mode 100644
index 0000000..3333333
--- /dev/null
+++ b/B.java
@@ -0,0 +1,2 @@
+class B {
+}
diff --git a/C.java b/C.java
deleted file mode 100644
index 4444444..0000000
--- a/C.java
+++ /dev/null
@@ -1 +0,0 @@
-class C {}
";
        let files = parse_unified_diff(text).unwrap();
        assert_eq!(files.len(), 2);
        assert!(files[0].is_addition());
        assert_eq!(files[0].new_path.as_deref(), Some("B.java"));
        assert_eq!(
            files[0].hunks[0],
            Hunk {
                old_start: 0,
                old_len: 0,
                new_start: 1,
                new_len: 2
            }
        );
        assert!(files[1].is_deletion());
        assert_eq!(
            files[1].hunks[0],
            Hunk {
                old_start: 1,
                old_len: 1,
                new_start: 0,
                new_len: 0
            }
        );
    }

    #[test]
    fn empty_new_file_has_no_hunks() {
        let text = "\
diff --git a/dir/Empty.java b/dir/Empty.java
new file mode 100644
index 0000000..e69de29
";
        let files = parse_unified_diff(text).unwrap();
        assert_eq!(
            files,
            vec![FileDiff {
                old_path: None,
                new_path: Some("dir/Empty.java".into()),
                hunks: vec![]
            }]
        );
    }

    #[test]
    fn spaces_and_quoted_names() {
        let text = "\
diff --git a/my dir/X.java b/my dir/X.java
index 1..2 100644
--- a/my dir/X.java\t
+++ b/my dir/X.java\t
@@ -1 +1 @@
-a
+b
diff --git \"a/caf\\303\\251.java\" \"b/caf\\303\\251.java\"
index 1..2 100644
--- \"a/caf\\303\\251.java\"
+++ \"b/caf\\303\\251.java\"
@@ -1 +1 @@
-a
+b
";
        let files = parse_unified_diff(text).unwrap();
        assert_eq!(files[0].old_path.as_deref(), Some("my dir/X.java"));
        assert_eq!(files[1].new_path.as_deref(), Some("café.java"));
    }

    #[test]
    fn no_newline_marker_is_not_counted() {
        let text = "\
diff --git a/A.java b/A.java
--- a/A.java
+++ b/A.java
@@ -5 +5 @@
-x
\\ No newline at end of file
+y
\\ No newline at end of file
";
        assert_eq!(parse_unified_diff(text).unwrap()[0].hunks.len(), 1);
    }

    #[test]
    fn rejects_bad_headers_and_truncation() {
        let bad = "diff --git a/A.java b/A.java\n@@ -x +1 @@\n";
        assert!(matches!(
            parse_unified_diff(bad),
            Err(DiffParseError::HunkHeader { line: 2, .. })
        ));
        let orphan = "@@ -1 +1 @@\n-a\n+b\n";
        assert!(matches!(
            parse_unified_diff(orphan),
            Err(DiffParseError::Orphan { line: 1 })
        ));
        let truncated =
            "diff --git a/A.java b/A.java\n--- a/A.java\n+++ b/A.java\n@@ -1,2 +1 @@\n-a\n";
        assert!(matches!(
            parse_unified_diff(truncated),
            Err(DiffParseError::HunkBody { .. })
        ));
    }

    #[test]
    fn rejects_overlapping_hunks() {
        let text = "diff --git a/A.java b/A.java\n--- a/A.java\n+++ b/A.java\n@@ -3,2 +3 @@\n-a\n-b\n+c\n@@ -4 +4 @@\n-d\n+e\n";
        assert!(matches!(
            parse_unified_diff(text),
            Err(DiffParseError::Invariant { .. })
        ));
    }

    #[test]
    fn pure_deletion_region_is_adjacency_pair() {
        let h = Hunk {
            old_start: 11,
            old_len: 1,
            new_start: 10,
            new_len: 0,
        };
        assert_eq!(h.new_region(), (10, 11));
        assert_eq!(h.old_range(), Some((11, 11)));
        let ins = Hunk {
            old_start: 10,
            old_len: 0,
            new_start: 11,
            new_len: 3,
        };
        assert_eq!(ins.old_range(), None);
        assert_eq!(ins.new_region(), (11, 13));
    }
}
