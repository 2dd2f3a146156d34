mod common;

use std::collections::{BTreeMap, HashMap};

use nascar_core::stats::{self, CoverageClass, SampleSpec};
use nascar_core::{LabeledRecord, RuleUniverse, Tool};
use proptest::prelude::*;

fn record(tool: &str, rule: &str, label: i64, repo: &str) -> LabeledRecord {
    let mut r = common::random_records(1, 7).remove(0);
    r.tool = tool.into();
    r.warning_type = rule.into();
    r.label = label;
    r.repo = repo.into();
    r
}

#[test]
fn category_counts_match_a_direct_tally() {
    let pmd = RuleUniverse::bundled(Tool::Pmd).unwrap();
    let records = common::random_records(2_000, 11);
    let rows = stats::category_distribution(&records, Tool::Pmd, Some(&pmd));

    let mut tally: BTreeMap<String, [u64; 2]> = BTreeMap::new();
    for r in records.iter().filter(|r| r.tool == "PMD") {
        let cat = pmd.category_of(&r.warning_type).unwrap().to_string();
        tally.entry(cat).or_default()[r.label as usize] += 1;
    }
    assert_eq!(rows.len(), tally.len());
    for row in &rows {
        let t = tally[&row.category];
        assert_eq!((row.actionable, row.non_actionable), (t[1], t[0]));
    }
    let a: f64 = rows.iter().map(|r| r.actionable_pct).sum();
    let na: f64 = rows.iter().map(|r| r.non_actionable_pct).sum();
    assert!((a - 100.0).abs() < 1e-9 && (na - 100.0).abs() < 1e-9);
}

#[test]
fn documentation_and_noise_rows_are_never_shown() {
    let universe = RuleUniverse::from_rules(
        Tool::SpotBugs,
        [
            ("NOISE_X", "NOISE"),
            ("NP_Y", "Correctness"),
            ("DOC_Z", "Documentation"),
        ],
    );
    let records = vec![
        record("SpotBugs", "NOISE_X", 1, "r"),
        record("SpotBugs", "NP_Y", 0, "r"),
        record("SpotBugs", "DOC_Z", 1, "r"),
    ];
    let rows = stats::category_distribution(&records, Tool::SpotBugs, Some(&universe));
    assert_eq!(
        rows.iter().map(|r| r.category.as_str()).collect::<Vec<_>>(),
        ["Correctness"]
    );
}

#[test]
fn coverage_classes_from_labels() {
    let universe = RuleUniverse::from_rules(
        Tool::Pmd,
        [("R1", "C"), ("R2", "C"), ("R3", "C"), ("R4", "C")],
    );
    let records = vec![
        record("PMD", "R1", 1, "r"),
        record("PMD", "R1", 0, "r"),
        record("PMD", "R2", 1, "r"),
        record("PMD", "R3", 0, "r"),
        record("PMD", "Gone", 0, "r"),
        record("SpotBugs", "R4", 1, "r"),
    ];
    let c = stats::rule_coverage_classes(&records, &universe);
    assert_eq!(
        CoverageClass::ALL.map(|k| c.count(k)),
        [1, 1, 1, 1],
        "BOTH, ONLY_A, ONLY_NA, NEITHER"
    );
    assert_eq!(c.unknown_rules.keys().collect::<Vec<_>>(), ["Gone"]);
    let table = stats::coverage_table(&c);
    assert!(table.contains("Gone"), "{table}");
}

#[test]
fn project_sum_row_matches_columns() {
    let records = common::random_records(500, 3);
    let p = stats::project_stats(&records);
    for tool in &p.tools {
        let col: (u64, u64) = p
            .rows
            .iter()
            .filter_map(|r| r.counts.get(tool))
            .fold((0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
        assert_eq!(col, p.sum.counts[tool]);
    }
    let total: u64 = p.sum.counts.values().map(|c| c.0 + c.1).sum();
    assert_eq!(total, 500);
    assert!(stats::project_table(&p)
        .lines()
        .last()
        .unwrap()
        .starts_with("Sum"));
}

#[test]
fn csv_outputs_parse_back() {
    let pmd = RuleUniverse::bundled(Tool::Pmd).unwrap();
    let records = common::random_records(300, 5);
    let rows = stats::category_distribution(&records, Tool::Pmd, Some(&pmd));
    let text = stats::category_csv(&rows);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(reader.records().count(), rows.len());
    let svg = stats::category_svg("PMD", &rows);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

/// Hand evaluation for the large population used below:
/// n0 = z² / 4 / 0.01, n = n0 / (1 + (n0 - 1) / N).
#[test]
fn cochran_against_hand_values() {
    let n = |z: f64| {
        stats::cochran_sample_size(&SampleSpec {
            population: 1_083_073,
            z,
            p_hat: 0.5,
            epsilon: 0.10,
        })
        .unwrap()
    };
    // 1.65: n0 = 68.0625 -> 68.058 -> 69; 1.645: n0 = 67.650625 -> 67.646 -> 68
    assert_eq!(n(1.65), 69);
    assert_eq!(n(1.645), 68);
    let z = stats::z_for_confidence(0.90).unwrap();
    assert!((z - 1.644_853_626_951_472).abs() < 1e-9);
    assert_eq!(n(z), 68);
    assert_eq!(stats::table_z(z), 1.65);
}

#[test]
fn small_population_caps_sample() {
    let spec = SampleSpec {
        population: 10,
        z: 1.96,
        p_hat: 0.5,
        epsilon: 0.05,
    };
    assert!(stats::cochran_sample_size(&spec).unwrap() <= 10);
}

#[test]
fn sampling_frequencies_are_uniform() {
    // Per-record frequency needs many draws to be measurable; with 20,000
    // draws of 10 out of 1,000 each record expects 200 hits (sd about 14).
    let draws = 20_000u64;
    let mut hits = vec![0u64; 1_000];
    for seed in 0..draws {
        for i in stats::sample_indices(1_000, 10, seed).unwrap() {
            hits[i] += 1;
        }
    }
    for (i, &h) in hits.iter().enumerate() {
        let freq = h as f64 / draws as f64;
        assert!((freq - 0.01).abs() <= 0.005, "record {i}: {freq}");
    }
}

#[test]
fn sample_draws_distinct_records() {
    let records = common::random_records(1_000, 9);
    let a = stats::draw_validation_sample(&records, 10, 42).unwrap();
    let b = stats::draw_validation_sample(&records, 10, 42).unwrap();
    assert_eq!(a, b);
    let mut seen = HashMap::new();
    for r in &a {
        *seen.entry(&r.warning_msg).or_insert(0) += 1;
    }
    assert!(seen.values().all(|&c| c == 1));
    assert!(stats::draw_validation_sample(&records, 1_001, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coverage_partitions_random_universes(
        rules in 1..60usize,
        picks in prop::collection::vec((0..80usize, 0..2i64), 0..300),
    ) {
        let universe = RuleUniverse::from_rules(Tool::Pmd, (0..rules).map(|i| (format!("R{i}"), "C".to_string())));
        let records: Vec<_> = picks.iter().map(|&(r, l)| record("PMD", &format!("R{r}"), l, "x")).collect();
        let c = stats::rule_coverage_classes(&records, &universe);
        prop_assert_eq!(c.total(), rules);
        prop_assert_eq!(c.per_rule.len(), rules);
        // oracle: a rule is in BOTH iff both labels occur for it
        for (rule, class) in &c.per_rule {
            let has = |l| records.iter().any(|r| &r.warning_type == rule && r.label == l);
            let expect = match (has(1), has(0)) {
                (true, true) => CoverageClass::Both,
                (true, false) => CoverageClass::OnlyA,
                (false, true) => CoverageClass::OnlyNa,
                (false, false) => CoverageClass::Neither,
            };
            prop_assert_eq!(*class, expect);
        }
        let unknown = picks.iter().filter(|p| p.0 >= rules).map(|p| p.0).collect::<std::collections::BTreeSet<_>>();
        prop_assert_eq!(c.unknown_rules.len(), unknown.len());
    }
}
