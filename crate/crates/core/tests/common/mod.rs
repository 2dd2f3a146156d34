#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nascar_core::dataset::{repo_slug, LabeledRecord, MinedRow};
use nascar_core::fixture::{self, FixtureRepo};
use nascar_core::pipeline::{self, ManifestEntry, MineSummary, RunConfig};
use nascar_core::{Label, Tool};
use serde_json::Value;

/// (label, rule, file, start, end, parent name, child name)
pub type Labeled = (i64, String, String, u32, u32, String, String);

pub struct Mined {
    pub tmp: tempfile::TempDir,
    pub fixture: FixtureRepo,
    pub workdir: PathBuf,
    pub summary: MineSummary,
}

impl Mined {
    pub fn pairs_dir(&self) -> PathBuf {
        self.workdir.join(repo_slug(&self.url())).join("pairs")
    }

    pub fn url(&self) -> String {
        self.fixture.path.to_string_lossy().into_owned()
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        pipeline::read_manifest(&self.summary.manifest).unwrap()
    }

    /// Every classified warning of every pair, commit ids mapped to names.
    pub fn pair_rows(&self) -> BTreeSet<Labeled> {
        let mut out = BTreeSet::new();
        let Ok(dir) = std::fs::read_dir(self.pairs_dir()) else {
            return out;
        };
        for entry in dir {
            let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
            for line in text.lines() {
                let row: MinedRow = serde_json::from_str(line).unwrap();
                out.insert(self.named(
                    row.label.as_int(),
                    &row.warning_type,
                    &row.filename,
                    row.positions.start_line,
                    row.positions.end_line,
                    &row.parent_sha,
                    &row.commit_sha,
                ));
            }
        }
        out
    }

    pub fn records_named(&self, records: &[LabeledRecord]) -> BTreeSet<Labeled> {
        records
            .iter()
            .map(|r| {
                let p = r.positions().unwrap();
                self.named(
                    r.label,
                    &r.warning_type,
                    &r.filename,
                    p.start_line,
                    p.end_line,
                    &r.parent_sha,
                    &r.commit_sha,
                )
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn named(
        &self,
        label: i64,
        rule: &str,
        file: &str,
        s: u32,
        e: u32,
        parent: &str,
        child: &str,
    ) -> Labeled {
        let name = |sha: &str| self.fixture.name_of(sha).unwrap_or(sha).to_string();
        (
            label,
            rule.to_string(),
            file.to_string(),
            s,
            e,
            name(parent),
            name(child),
        )
    }
}

pub enum Kind {
    Demo,
    Conflict,
    KeepLast,
}

pub fn build(kind: Kind, dir: &Path) -> FixtureRepo {
    match kind {
        Kind::Demo => fixture::build_demo_repo(dir),
        Kind::Conflict => fixture::build_conflict_repo(dir),
        Kind::KeepLast => fixture::build_keep_last_repo(dir),
    }
    .unwrap()
}

pub fn builtin_config(workdir: &Path) -> RunConfig {
    let mut config = RunConfig::new(workdir);
    config.analyzers = vec![Tool::Builtin];
    config
}

pub fn mine_with(kind: Kind, tweak: impl FnOnce(&mut RunConfig)) -> Mined {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = build(kind, &tmp.path().join("origin"));
    let workdir = tmp.path().join("work");
    let mut config = builtin_config(&workdir);
    config.repos = vec![fixture.path.to_string_lossy().into_owned()];
    tweak(&mut config);
    let summary = pipeline::run_mine(&config).unwrap();
    Mined {
        tmp,
        fixture,
        workdir,
        summary,
    }
}

pub fn mine(kind: Kind) -> Mined {
    mine_with(kind, |_| {})
}

pub struct Truth {
    pub pairs: BTreeSet<Labeled>,
    pub dataset: BTreeSet<Labeled>,
    pub skipped: Vec<(String, String, String)>,
}

pub fn demo_truth() -> Truth {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/demo_truth.json");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let s = |v: &Value| v.as_str().unwrap().to_string();
    let n = |v: &Value| v.as_u64().unwrap() as u32;
    let mut pairs = BTreeSet::new();
    for p in v["pairs"].as_array().unwrap() {
        for (field, label) in [
            ("actionable", Label::Actionable),
            ("non_actionable", Label::NonActionable),
        ] {
            for w in p[field].as_array().unwrap() {
                pairs.insert((
                    label.as_int(),
                    s(&w[0]),
                    s(&w[1]),
                    n(&w[2]),
                    n(&w[3]),
                    s(&p["parent"]),
                    s(&p["child"]),
                ));
            }
        }
    }
    let dataset = v["dataset"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["label"].as_i64().unwrap(),
                s(&r["rule"]),
                s(&r["file"]),
                n(&r["start"]),
                n(&r["end"]),
                s(&r["parent"]),
                s(&r["child"]),
            )
        })
        .collect();
    let skipped = v["skipped"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (s(&p["parent"]), s(&p["child"]), s(&p["reason"])))
        .collect();
    Truth {
        pairs,
        dataset,
        skipped,
    }
}

/// Precision and recall of `found` against `truth`, per label.
pub fn precision_recall(
    found: &BTreeSet<Labeled>,
    truth: &BTreeSet<Labeled>,
    label: i64,
) -> (f64, f64) {
    let f: BTreeSet<_> = found.iter().filter(|r| r.0 == label).collect();
    let t: BTreeSet<_> = truth.iter().filter(|r| r.0 == label).collect();
    let hit = f.intersection(&t).count() as f64;
    let precision = if f.is_empty() {
        1.0
    } else {
        hit / f.len() as f64
    };
    let recall = if t.is_empty() {
        1.0
    } else {
        hit / t.len() as f64
    };
    (precision, recall)
}

const RULES: [(&str, &str); 6] = [
    ("PMD", "SystemPrintln"),
    ("PMD", "EmptyCatchBlock"),
    ("PMD", "UnusedPrivateField"),
    ("SpotBugs", "NP_NULL_ON_SOME_PATH"),
    ("SpotBugs", "DM_DEFAULT_ENCODING"),
    ("Builtin", "LongLine"),
];

/// A well-formed record with varied field contents. The archive file named
/// by `filepath` is not created.
pub fn random_record(rng: &mut impl rand::Rng, i: usize) -> LabeledRecord {
    use chrono::{Duration, TimeZone, Utc};
    let (tool, rule) = RULES[rng.gen_range(0..RULES.len())];
    let hex = |rng: &mut dyn rand::RngCore| -> String {
        (0..40)
            .map(|_| format!("{:x}", rng.next_u32() % 16))
            .collect()
    };
    let parent_sha = hex(rng);
    let commit_sha = hex(rng);
    let parent = Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).unwrap()
        + Duration::seconds(rng.gen_range(0..300_000_000));
    let child = parent + Duration::seconds(rng.gen_range(0..10_000_000));
    let repo = format!(
        "https://github.com/org{}/proj-{}",
        rng.gen_range(0..5),
        rng.gen_range(0..7)
    );
    let filename = format!("src/main/java/p{}/Cls{i}.java", rng.gen_range(0..4));
    let start = rng.gen_range(1..5_000u32);
    let end = start + rng.gen_range(0..40);
    let positions = if rng.gen_bool(0.3) {
        format!(r#"{{"startLine":{start},"endLine":{end}}}"#)
    } else {
        format!(
            r#"{{"startLine":{start},"endLine":{end},"startColumn":{},"endColumn":{}}}"#,
            rng.gen_range(1..80),
            rng.gen_range(1..120)
        )
    };
    let msgs = [
        "Avoid \"System.out\"",
        "Null päth → dereference",
        "tab\there, comma, quote'",
        "行が長すぎます",
    ];
    LabeledRecord {
        tool: tool.to_string(),
        warning_type: rule.to_string(),
        warning_msg: format!("{} #{i}", msgs[rng.gen_range(0..msgs.len())]),
        parent_sha: parent_sha.clone(),
        parent_date: nascar_core::dataset::format_date(&parent),
        commit_sha,
        commit_date: nascar_core::dataset::format_date(&child),
        filepath: format!("files/{}/{parent_sha}/{filename}", repo_slug(&repo)),
        repo,
        filename,
        positions,
        label: rng.gen_range(0..2),
    }
}

pub fn random_records(n: usize, seed: u64) -> Vec<LabeledRecord> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_record(&mut rng, i)).collect()
}

/// Random Java-ish text of `lines` lines, ten tokens each.
pub fn random_text(rng: &mut impl rand::Rng, lines: usize) -> Vec<Vec<String>> {
    (0..lines)
        .map(|_| {
            (0..10)
                .map(|_| format!("t{:x}", rng.gen::<u32>()))
                .collect()
        })
        .collect()
}

/// Replace `edits` tokens, spread evenly so their shingles do not overlap.
pub fn mutate(text: &[Vec<String>], edits: usize, rng: &mut impl rand::Rng) -> Vec<Vec<String>> {
    let mut out = text.to_vec();
    let total = text.len() * 10;
    let step = total / edits.max(1);
    for e in 0..edits {
        let pos = e * step + step / 2;
        out[pos / 10][pos % 10] = format!("m{:x}", rng.gen::<u32>());
    }
    out
}

pub fn join(text: &[Vec<String>]) -> String {
    text.iter()
        .map(|l| l.join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Exact Jaccard similarity of the 3-token window sets, computed on the
/// token strings themselves.
pub fn exact_jaccard(a: &str, b: &str) -> f64 {
    let windows = |s: &str| -> std::collections::HashSet<String> {
        let t: Vec<String> = s.split_whitespace().map(str::to_lowercase).collect();
        t.windows(3).map(|w| w.join(" ")).collect()
    };
    let (a, b) = (windows(a), windows(b));
    let inter = a.intersection(&b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

pub struct Corpus {
    pub records: Vec<LabeledRecord>,
    /// (original row, near-copy row, exact Jaccard of their contexts)
    pub planted: Vec<(usize, usize, f64)>,
    pub decoys: Vec<(usize, usize, f64)>,
}

/// Records over archive files below `root`: `planted` near-duplicate pairs
/// (five token edits, J just above 0.98), `decoys` pairs with 60 edits
/// (J about 0.79), and `singles` unrelated records. Rows are shuffled.
pub fn write_corpus(
    root: &Path,
    planted: usize,
    decoys: usize,
    singles: usize,
    seed: u64,
) -> Corpus {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut texts: Vec<(String, usize)> = Vec::new(); // text, group
    let mut groups = Vec::new();
    for (kind, count, edits) in [(0, planted, 5), (1, decoys, 60)] {
        for _ in 0..count {
            let base = random_text(&mut rng, 150);
            let copy = mutate(&base, edits, &mut rng);
            let g = groups.len();
            groups.push((kind, texts.len(), texts.len() + 1));
            texts.push((join(&base), g));
            texts.push((join(&copy), g));
        }
    }
    for _ in 0..singles {
        texts.push((join(&random_text(&mut rng, 40)), usize::MAX));
    }
    let mut order: Vec<usize> = (0..texts.len()).collect();
    order.shuffle(&mut rng);
    let mut row_of = vec![0; texts.len()];
    let mut records = Vec::with_capacity(texts.len());
    for (row, &t) in order.iter().enumerate() {
        row_of[t] = row;
        let mut r = random_record(&mut rng, row);
        let (text, group) = &texts[t];
        // members of a group share the dedup partition
        let part = if *group == usize::MAX { row } else { *group };
        r.tool = "PMD".into();
        r.warning_type = format!("Rule{}", part % 17);
        r.label = (part % 2) as i64;
        let lines = text.lines().count() as u32;
        r.positions = format!(r#"{{"startLine":4,"endLine":{}}}"#, lines - 3);
        std::fs::create_dir_all(root.join(&r.filepath).parent().unwrap()).unwrap();
        std::fs::write(root.join(&r.filepath), text).unwrap();
        records.push(r);
    }
    let mut corpus = Corpus {
        records,
        planted: Vec::new(),
        decoys: Vec::new(),
    };
    for (kind, a, b) in groups {
        let j = exact_jaccard(&texts[a].0, &texts[b].0);
        let entry = (row_of[a], row_of[b], j);
        if kind == 0 {
            corpus.planted.push(entry);
        } else {
            corpus.decoys.push(entry);
        }
    }
    corpus
}
