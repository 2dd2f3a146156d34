//! Differential labeling of a parent commit's warnings.
//!
//! A warning reported on the parent is *actionable* when the child's Java
//! changes touch it and the same warning is not reported inside the changed
//! region of the child; it is *non-actionable* when the child still reports
//! it anywhere. Identity is [`WarningKey`], which ignores line numbers.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::hash::Hash;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::analyzer::{Report, Tool, Warning};
use crate::repo::{CommitPair, FileDiff, Sha};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WarningKey {
    pub tool: Tool,
    pub rule_id: String,
    pub message: String,
    pub file_path: String,
}

impl From<&Warning> for WarningKey {
    fn from(w: &Warning) -> Self {
        WarningKey {
            tool: w.tool,
            rule_id: w.rule_id.clone(),
            message: w.message.clone(),
            file_path: w.file_path.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    NonActionable,
    Actionable,
}

impl Label {
    /// Dataset encoding: 1 actionable, 0 non-actionable.
    pub fn as_int(self) -> i64 {
        match self {
            Label::Actionable => 1,
            Label::NonActionable => 0,
        }
    }

    pub fn from_int(v: i64) -> Option<Label> {
        match v {
            1 => Some(Label::Actionable),
            0 => Some(Label::NonActionable),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Actionable => "ACTIONABLE",
            Label::NonActionable => "NON_ACTIONABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedWarning {
    pub warning: Warning,
    pub label: Label,
    pub pair: Arc<CommitPair>,
    /// The parent commit, where the warning was reported.
    pub observed_at_sha: Sha,
}

impl ClassifiedWarning {
    pub fn key(&self) -> WarningKey {
        WarningKey::from(&self.warning)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    pub actionable: Vec<ClassifiedWarning>,
    pub non_actionable: Vec<ClassifiedWarning>,
}

impl Classification {
    pub fn len(&self) -> usize {
        self.actionable.len() + self.non_actionable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Actionable first, then non-actionable, each in parent-report order.
    pub fn into_stream(self) -> impl Iterator<Item = ClassifiedWarning> {
        self.actionable.into_iter().chain(self.non_actionable)
    }
}

/// Whether a change in `diffs` touches the warning's lines in the parent.
///
/// Hunks that remove or replace lines affect warnings whose span overlaps the
/// removed range. A pure insertion after old line `k` affects a warning when
/// `start_line <= k + 1` and `k <= end_line`, i.e. when it lands inside the
/// span or directly before its first line. Deleting the file affects all of
/// its warnings.
pub fn affected_by_diff(w: &Warning, diffs: &[FileDiff]) -> bool {
    diffs
        .iter()
        .filter(|d| d.old_path.as_deref() == Some(w.file_path.as_str()))
        .any(|d| {
            d.is_deletion()
                || d.hunks.iter().any(|h| match h.old_range() {
                    Some((lo, hi)) => w.span.intersects(lo, hi),
                    None => w.span.start_line <= h.old_start + 1 && h.old_start <= w.span.end_line,
                })
        })
}

/// Label the warnings of `parent` (R_p) against `child` (R_c) and the pair's
/// Java diff.
///
/// A warning that qualifies both ways is kept as actionable only, and any
/// key that has an actionable warning is removed from the non-actionable set
/// so the two sets never share a key. Warnings that are neither (untouched but
/// gone from R_c) are dropped. Identical duplicate warnings count once.
pub fn classify_pair(
    parent: &Report,
    child: &Report,
    diffs: &[FileDiff],
    pair: &Arc<CommitPair>,
) -> Classification {
    let mut child_by_key: HashMap<WarningKey, Vec<&Warning>> = HashMap::new();
    for w in &child.warnings {
        child_by_key.entry(WarningKey::from(w)).or_default().push(w);
    }

    let mut seen = HashSet::new();
    let mut out = Classification::default();
    let mut actionable_keys = HashSet::new();
    for w in &parent.warnings {
        if !seen.insert(w) {
            continue;
        }
        let key = WarningKey::from(w);
        let in_child = child_by_key.get(&key);
        let label = if affected_by_diff(w, diffs) && !persists_in_changed_region(w, in_child, diffs)
        {
            Label::Actionable
        } else if in_child.is_some() {
            Label::NonActionable
        } else {
            continue;
        };
        let cw = ClassifiedWarning {
            warning: w.clone(),
            label,
            pair: Arc::clone(pair),
            observed_at_sha: pair.parent.sha.clone(),
        };
        match label {
            Label::Actionable => {
                actionable_keys.insert(key);
                out.actionable.push(cw);
            }
            Label::NonActionable => out.non_actionable.push(cw),
        }
    }
    out.non_actionable
        .retain(|cw| !actionable_keys.contains(&cw.key()));
    out
}

/// True when a same-key child warning overlaps the new-side region of any
/// hunk of the warning's file.
fn persists_in_changed_region(
    w: &Warning,
    in_child: Option<&Vec<&Warning>>,
    diffs: &[FileDiff],
) -> bool {
    let Some(candidates) = in_child else {
        return false;
    };
    diffs
        .iter()
        .filter(|d| d.new_path.as_deref() == Some(w.file_path.as_str()))
        .flat_map(|d| &d.hunks)
        .any(|h| {
            let (lo, hi) = h.new_region();
            candidates.iter().any(|c| c.span.intersects(lo, hi))
        })
}

/// Something that can take part in keep-last collapsing of non-actionable
/// warnings.
pub trait KeepLastItem {
    type Key: Eq + Hash;

    fn keep_last_key(&self) -> Self::Key;
    fn is_non_actionable(&self) -> bool;
    fn child_commit_date(&self) -> DateTime<Utc>;
}

impl KeepLastItem for ClassifiedWarning {
    type Key = WarningKey;

    fn keep_last_key(&self) -> WarningKey {
        self.key()
    }

    fn is_non_actionable(&self) -> bool {
        self.label == Label::NonActionable
    }

    fn child_commit_date(&self) -> DateTime<Utc> {
        self.pair.child.commit_date
    }
}

/// For every non-actionable key keep only the occurrence with the latest
/// child commit date; among equal dates the one later in `stream` wins.
/// Actionable items pass through. Survivors keep their stream order.
pub fn keep_last<T: KeepLastItem>(stream: Vec<T>) -> Vec<T> {
    let mut best: HashMap<T::Key, (DateTime<Utc>, usize)> = HashMap::new();
    for (i, item) in stream.iter().enumerate() {
        if !item.is_non_actionable() {
            continue;
        }
        let date = item.child_commit_date();
        best.entry(item.keep_last_key())
            .and_modify(|slot| {
                if date >= slot.0 {
                    *slot = (date, i);
                }
            })
            .or_insert((date, i));
    }
    let winners: BTreeSet<usize> = best.into_values().map(|(_, i)| i).collect();
    stream
        .into_iter()
        .enumerate()
        .filter(|(i, item)| !item.is_non_actionable() || winners.contains(i))
        .map(|(_, item)| item)
        .collect()
}

/// [`keep_last`] over classified warnings of one repository, oldest pair
/// first.
pub fn dedupe_na_keep_last(stream: Vec<ClassifiedWarning>) -> Vec<ClassifiedWarning> {
    keep_last(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::Span;
    use crate::repo::{CommitMeta, Hunk};
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn sha(c: char) -> Sha {
        c.to_string().repeat(40).parse().unwrap()
    }

    fn pair_at(day: u32) -> Arc<CommitPair> {
        let meta = |c, d| CommitMeta {
            sha: sha(c),
            commit_date: Utc.with_ymd_and_hms(2023, 1, d, 0, 0, 0).unwrap(),
            parent_shas: vec![],
        };
        Arc::new(CommitPair {
            repo_url: "https://example.org/r".into(),
            parent: meta('a', day),
            child: meta('b', day),
        })
    }

    fn warn(file: &str, rule: &str, lo: u32, hi: u32) -> Warning {
        Warning {
            tool: Tool::Builtin,
            rule_id: rule.into(),
            category: "Best Practices".into(),
            message: format!("{rule} message"),
            file_path: file.into(),
            span: Span::lines(lo, hi).unwrap(),
        }
    }

    fn report(ws: Vec<Warning>) -> Report {
        Report {
            commit_sha: sha('c'),
            warnings: ws,
            skipped_instances: 0,
        }
    }

    fn modified(path: &str, hunks: &[(u32, u32, u32, u32)]) -> FileDiff {
        FileDiff {
            old_path: Some(path.into()),
            new_path: Some(path.into()),
            hunks: hunks
                .iter()
                .map(|&(old_start, old_len, new_start, new_len)| Hunk {
                    old_start,
                    old_len,
                    new_start,
                    new_len,
                })
                .collect(),
        }
    }

    #[test]
    fn affected_examples() {
        let w = warn("F.java", "R", 10, 12);
        assert!(affected_by_diff(
            &w,
            &[modified("F.java", &[(11, 1, 10, 0)])]
        ));
        assert!(!affected_by_diff(
            &w,
            &[modified("F.java", &[(20, 3, 19, 0)])]
        ));
        assert!(affected_by_diff(
            &w,
            &[modified("F.java", &[(10, 0, 11, 2)])]
        ));
        // directly before the first line
        assert!(affected_by_diff(
            &w,
            &[modified("F.java", &[(9, 0, 10, 1)])]
        ));
        assert!(!affected_by_diff(
            &w,
            &[modified("F.java", &[(8, 0, 9, 1)])]
        ));
        assert!(affected_by_diff(
            &w,
            &[modified("F.java", &[(12, 0, 13, 1)])]
        ));
        assert!(!affected_by_diff(
            &w,
            &[modified("F.java", &[(13, 0, 14, 1)])]
        ));
        assert!(!affected_by_diff(
            &w,
            &[modified("G.java", &[(11, 1, 11, 1)])]
        ));
        let deleted = FileDiff {
            old_path: Some("F.java".into()),
            new_path: None,
            hunks: vec![],
        };
        assert!(affected_by_diff(&w, &[deleted]));
    }

    #[test]
    fn fix_removes_warning() {
        let p = pair_at(2);
        let rp = report(vec![warn("F.java", "R", 5, 5)]);
        let c = classify_pair(
            &rp,
            &report(vec![]),
            &[modified("F.java", &[(5, 1, 4, 0)])],
            &p,
        );
        assert_eq!(c.actionable.len(), 1);
        assert!(c.non_actionable.is_empty());
        assert_eq!(c.actionable[0].observed_at_sha, p.parent.sha);
    }

    #[test]
    fn warning_persists() {
        let p = pair_at(2);
        let w = warn("F.java", "R", 5, 5);
        let c = classify_pair(
            &report(vec![w.clone()]),
            &report(vec![w]),
            &[modified("G.java", &[(1, 1, 1, 1)])],
            &p,
        );
        assert!(c.actionable.is_empty());
        assert_eq!(c.non_actionable.len(), 1);
    }

    #[test]
    fn changed_but_still_reported_in_region_is_non_actionable() {
        let p = pair_at(2);
        let c = classify_pair(
            &report(vec![warn("F.java", "R", 5, 5)]),
            &report(vec![warn("F.java", "R", 5, 5)]),
            &[modified("F.java", &[(5, 1, 5, 1)])],
            &p,
        );
        assert!(c.actionable.is_empty());
        assert_eq!(c.non_actionable.len(), 1);
    }

    #[test]
    fn flagged_both_ways_is_actionable_only() {
        let p = pair_at(2);
        let rp = report(vec![warn("F.java", "R", 5, 5), warn("F.java", "R", 40, 40)]);
        let rc = report(vec![warn("F.java", "R", 39, 39)]);
        let c = classify_pair(&rp, &rc, &[modified("F.java", &[(5, 1, 4, 0)])], &p);
        assert_eq!(c.actionable.len(), 1);
        assert_eq!(c.actionable[0].warning.span.start_line, 5);
        assert!(c.non_actionable.is_empty());
    }

    #[test]
    fn deleted_file_makes_warnings_actionable() {
        let p = pair_at(2);
        let deleted = FileDiff {
            old_path: Some("F.java".into()),
            new_path: None,
            hunks: vec![],
        };
        let c = classify_pair(
            &report(vec![warn("F.java", "R", 3, 3)]),
            &report(vec![]),
            &[deleted],
            &p,
        );
        assert_eq!(c.actionable.len(), 1);
    }

    #[test]
    fn untouched_and_vanished_is_dropped() {
        let p = pair_at(2);
        let c = classify_pair(
            &report(vec![warn("F.java", "R", 30, 30)]),
            &report(vec![]),
            &[modified("F.java", &[(5, 1, 5, 1)])],
            &p,
        );
        assert!(c.is_empty());
    }

    #[test]
    fn keep_last_examples() {
        let w = warn("F.java", "R", 1, 1);
        let other = warn("G.java", "R", 1, 1);
        let mk = |w: &Warning, day, label| ClassifiedWarning {
            warning: w.clone(),
            label,
            pair: pair_at(day),
            observed_at_sha: sha('a'),
        };
        let stream = vec![
            mk(&w, 1, Label::NonActionable),
            mk(&other, 1, Label::NonActionable),
            mk(&w, 3, Label::NonActionable),
            mk(&w, 2, Label::NonActionable),
            mk(&w, 2, Label::Actionable),
        ];
        let out = dedupe_na_keep_last(stream);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].warning.file_path, "G.java");
        assert_eq!(out[1].pair.child.commit_date.format("%d").to_string(), "03");
        assert_eq!(out[2].label, Label::Actionable);
    }

    #[test]
    fn keep_last_ties_prefer_later_in_stream() {
        let mk = |line| ClassifiedWarning {
            warning: warn("F.java", "R", line, line),
            label: Label::NonActionable,
            pair: pair_at(4),
            observed_at_sha: sha('a'),
        };
        let out = dedupe_na_keep_last(vec![mk(3), mk(9), mk(6)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].warning.span.start_line, 6);
    }

    fn arb_warning() -> impl Strategy<Value = Warning> {
        (0..3usize, 0..3usize, 1..60u32, 0..4u32).prop_map(|(f, r, lo, len)| {
            warn(
                ["A.java", "B.java", "C.java"][f],
                ["R1", "R2", "R3"][r],
                lo,
                lo + len,
            )
        })
    }

    // Hunk geometry is not validated by the classifier, so loose shapes suffice.
    fn arb_diff() -> impl Strategy<Value = FileDiff> {
        (
            0..3usize,
            prop::collection::vec((0..60u32, 0..4u32, 0..6i32, 0..4u32), 1..4),
        )
            .prop_map(|(f, raw)| {
                let hunks: Vec<_> = raw
                    .into_iter()
                    .map(|(old_start, old_len, shift, new_len)| {
                        (
                            old_start.max(u32::from(old_len > 0)),
                            old_len,
                            (old_start as i32 + shift - 2).max(1) as u32,
                            new_len,
                        )
                    })
                    .collect();
                modified(["A.java", "B.java", "C.java"][f], &hunks)
            })
    }

    proptest! {
        #[test]
        fn sets_never_share_a_key(
            rp in prop::collection::vec(arb_warning(), 0..25),
            rc in prop::collection::vec(arb_warning(), 0..25),
            diffs in prop::collection::vec(arb_diff(), 1..3),
        ) {
            let c = classify_pair(&report(rp), &report(rc), &diffs, &pair_at(1));
            let a: HashSet<_> = c.actionable.iter().map(ClassifiedWarning::key).collect();
            for na in &c.non_actionable {
                prop_assert!(!a.contains(&na.key()));
            }
            for cw in &c.actionable {
                prop_assert!(affected_by_diff(&cw.warning, &diffs));
            }
        }

        #[test]
        fn shift_from_insertion_above_keeps_persisting_warnings(
            ws in prop::collection::vec(arb_warning(), 1..20),
            at in 0..20u32,
            k in 1..10u32,
        ) {
            // insert k lines after line `at` of every file; warnings start below the insertion
            let ws: Vec<Warning> = ws
                .into_iter()
                .map(|mut w| {
                    let len = w.span.end_line - w.span.start_line;
                    w.span.start_line += at + 2;
                    w.span.end_line = w.span.start_line + len;
                    w
                })
                .collect();
            let shifted: Vec<Warning> = ws
                .iter()
                .cloned()
                .map(|mut w| {
                    w.span.start_line += k;
                    w.span.end_line += k;
                    w
                })
                .collect();
            let diffs: Vec<FileDiff> = ["A.java", "B.java", "C.java"]
                .iter()
                .map(|f| modified(f, &[(at, 0, at + 1, k)]))
                .collect();
            let c = classify_pair(&report(ws.clone()), &report(shifted), &diffs, &pair_at(1));
            prop_assert!(c.actionable.is_empty());
            let unique: HashSet<&Warning> = ws.iter().collect();
            prop_assert_eq!(c.non_actionable.len(), unique.len());
        }

        #[test]
        fn keep_last_leaves_one_per_na_key(
            items in prop::collection::vec((arb_warning(), 1..28u32, any::<bool>()), 0..40),
        ) {
            let stream: Vec<ClassifiedWarning> = items
                .iter()
                .map(|(w, day, a)| ClassifiedWarning {
                    warning: w.clone(),
                    label: if *a { Label::Actionable } else { Label::NonActionable },
                    pair: pair_at(*day),
                    observed_at_sha: sha('a'),
                })
                .collect();
            let out = dedupe_na_keep_last(stream.clone());
            let na_keys: HashSet<_> = stream.iter().filter(|c| c.is_non_actionable()).map(ClassifiedWarning::key).collect();
            let out_na: Vec<_> = out.iter().filter(|c| c.is_non_actionable()).collect();
            prop_assert_eq!(out_na.len(), na_keys.len());
            for cw in out_na {
                let max = stream
                    .iter()
                    .filter(|c| c.is_non_actionable() && c.key() == cw.key())
                    .map(|c| c.pair.child.commit_date)
                    .max()
                    .unwrap();
                prop_assert_eq!(cw.pair.child.commit_date, max);
            }
            prop_assert_eq!(
                out.iter().filter(|c| c.label == Label::Actionable).count(),
                stream.iter().filter(|c| c.label == Label::Actionable).count()
            );
        }
    }
}
