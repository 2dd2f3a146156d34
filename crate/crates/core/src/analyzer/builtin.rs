//! A deterministic line-oriented analyzer with three rules, for running the
//! pipeline without a Java toolchain.
//!
//! | rule         | category       | fires on                                   |
//! |--------------|----------------|--------------------------------------------|
//! | `LongLine`   | Code Style     | a line longer than 120 characters          |
//! | `EmptyCatch` | Error Prone    | `catch (...) { }` with a whitespace body   |
//! | `SysOut`     | Best Practices | `System.out.print`, `println` or `printf`  |

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::{Report, Span, Tool, Warning};
use crate::repo::Sha;

pub const LONG_LINE_LIMIT: usize = 120;

fn empty_catch_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bcatch\s*\(\s*([^)]*?)\s*\)\s*\{\s*\}").unwrap())
}

fn sysout_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bSystem\s*\.\s*out\s*\.\s*(printf|println|print)\b").unwrap())
}

/// Analyze every file of a commit; files are visited in path order.
pub fn builtin_analyze(files: &BTreeMap<String, String>, commit_sha: Sha) -> Report {
    let warnings = files
        .iter()
        .flat_map(|(path, text)| builtin_analyze_file(path, text))
        .collect();
    Report {
        commit_sha,
        warnings,
        skipped_instances: 0,
    }
}

/// Warnings for one file, ordered by position then rule.
pub fn builtin_analyze_file(path: &str, text: &str) -> Vec<Warning> {
    let index = LineIndex::new(text);
    let mut out = Vec::new();
    let warn = |rule: &str, category: &str, message: String, span: Span| Warning {
        tool: Tool::Builtin,
        rule_id: rule.to_string(),
        category: category.to_string(),
        message,
        file_path: path.to_string(),
        span,
    };

    for (i, line) in text.split('\n').enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let len = line.chars().count();
        if len > LONG_LINE_LIMIT {
            let n = i as u32 + 1;
            out.push(warn(
                "LongLine",
                "Code Style",
                format!("Line is {len} characters long, exceeding the limit of {LONG_LINE_LIMIT}"),
                Span::new(n, n, Some(LONG_LINE_LIMIT as u32 + 1), Some(len as u32))
                    .expect("valid span"),
            ));
        }
    }

    for caps in empty_catch_re().captures_iter(text) {
        let whole = caps.get(0).expect("match");
        let caught = caught_type(caps.get(1).map_or("", |m| m.as_str()));
        let (sl, sc) = index.position(text, whole.start());
        let (el, ec) = index.position(text, whole.end() - 1);
        out.push(warn(
            "EmptyCatch",
            "Error Prone",
            format!("Avoid empty catch blocks: '{caught}' is caught and ignored"),
            Span::new(sl, el, Some(sc), Some(ec)).expect("valid span"),
        ));
    }

    for caps in sysout_re().captures_iter(text) {
        let whole = caps.get(0).expect("match");
        let method = caps.get(1).map_or("", |m| m.as_str());
        let (sl, sc) = index.position(text, whole.start());
        let (el, ec) = index.position(text, whole.end() - 1);
        out.push(warn(
            "SysOut",
            "Best Practices",
            format!("Avoid System.out.{method}; use a logger instead"),
            Span::new(sl, el, Some(sc), Some(ec)).expect("valid span"),
        ));
    }

    out.sort_by(|a, b| {
        (a.span.start_line, a.span.start_col, &a.rule_id).cmp(&(
            b.span.start_line,
            b.span.start_col,
            &b.rule_id,
        ))
    });
    out
}

/// `final IOException | SQLException e` -> `IOException | SQLException`
fn caught_type(param: &str) -> String {
    let mut tokens: Vec<&str> = param.split_whitespace().filter(|t| *t != "final").collect();
    if tokens.len() > 1 {
        tokens.pop();
    }
    tokens.join(" ")
}

struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    fn new(text: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex { starts }
    }

    /// 1-based (line, column) of a byte offset; columns count characters.
    fn position(&self, text: &str, offset: usize) -> (u32, u32) {
        let line = self.starts.partition_point(|&s| s <= offset) - 1;
        let col = text[self.starts[line]..offset].chars().count() + 1;
        (line as u32 + 1, col as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sha() -> Sha {
        "3".repeat(40).parse().unwrap()
    }

    #[test]
    fn long_line_at_line_seven() {
        let mut text = String::new();
        for i in 1..=9 {
            if i == 7 {
                text.push_str(&"x".repeat(150));
            } else {
                text.push_str("int a;");
            }
            text.push('\n');
        }
        let ws = builtin_analyze_file("A.java", &text);
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].tool, Tool::Builtin);
        assert_eq!(ws[0].rule_id, "LongLine");
        assert_eq!((ws[0].span.start_line, ws[0].span.end_line), (7, 7));
        assert_eq!(
            ws[0].message,
            "Line is 150 characters long, exceeding the limit of 120"
        );
    }

    #[test]
    fn exactly_limit_is_fine() {
        assert!(builtin_analyze_file("A.java", &"y".repeat(120)).is_empty());
    }

    #[test]
    fn empty_catch_single_and_multi_line() {
        let text = "class A {\n  void m() {\n    try { f(); } catch (final IOException e) {}\n    try { g(); } catch (IllegalStateException | IllegalArgumentException ex) {\n\n    }\n    try { h(); } catch (Exception e) { log(e); }\n  }\n}\n";
        let ws = builtin_analyze_file("A.java", text);
        assert_eq!(ws.len(), 2);
        assert_eq!(
            ws[0].message,
            "Avoid empty catch blocks: 'IOException' is caught and ignored"
        );
        assert_eq!((ws[0].span.start_line, ws[0].span.end_line), (3, 3));
        assert_eq!(ws[0].span.start_col, Some(18));
        assert_eq!(
            ws[1].message,
            "Avoid empty catch blocks: 'IllegalStateException | IllegalArgumentException' is caught and ignored"
        );
        assert_eq!((ws[1].span.start_line, ws[1].span.end_line), (4, 6));
    }

    #[test]
    fn sysout_variants() {
        let text = "System.out.println(\"a\");\n  System.out.print(x); System.out.printf(\"%d\", 1);\nSystem.err.println(1);\n";
        let ws = builtin_analyze_file("A.java", text);
        let msgs: Vec<_> = ws
            .iter()
            .map(|w| (w.span.start_line, w.span.start_col, w.message.as_str()))
            .collect();
        assert_eq!(
            msgs,
            [
                (1, Some(1), "Avoid System.out.println; use a logger instead"),
                (2, Some(3), "Avoid System.out.print; use a logger instead"),
                (2, Some(24), "Avoid System.out.printf; use a logger instead"),
            ]
        );
        assert_eq!(ws[0].span.end_col, Some(18));
    }

    #[test]
    fn deterministic_and_empty() {
        assert!(builtin_analyze(&BTreeMap::new(), sha()).warnings.is_empty());
        let mut files = BTreeMap::new();
        files.insert("b/B.java".to_string(), "System.out.print(1);".to_string());
        files.insert(
            "a/A.java".to_string(),
            format!("{}\ncatch (E e) {{}}", "z".repeat(130)),
        );
        let one = serde_json::to_vec(&builtin_analyze(&files, sha())).unwrap();
        let two = serde_json::to_vec(&builtin_analyze(&files, sha())).unwrap();
        assert_eq!(one, two);
        let report = builtin_analyze(&files, sha());
        assert_eq!(report.warnings[0].file_path, "a/A.java");
        assert_eq!(report.warnings.len(), 3);
    }

    #[test]
    fn crlf_lines() {
        let text = format!("{}\r\nSystem.out.println();\r\n", "q".repeat(120));
        let ws = builtin_analyze_file("A.java", &text);
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].span.start_line, 2);
    }
}
