//! Summary tables over a dataset and sizing/drawing of the manual
//! validation sample.

mod render;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::analyzer::{RuleUniverse, Tool};
use crate::dataset::LabeledRecord;

pub use render::{
    category_csv, category_svg, category_table, coverage_csv, coverage_table, project_csv,
    project_table,
};

/// Categories left out of the distribution tables.
pub const EXCLUDED_CATEGORIES: [&str; 2] = ["Documentation", "NOISE"];
pub const UNKNOWN_CATEGORY: &str = "Unknown";

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid sample spec: {0}")]
    InvalidSpec(String),
    #[error("cannot draw {n} records from {available}")]
    SampleTooLarge { n: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryRow {
    pub category: String,
    pub actionable: u64,
    pub actionable_pct: f64,
    pub non_actionable: u64,
    pub non_actionable_pct: f64,
}

/// Per-category label counts for one tool, with each label's percentages
/// summing to exactly 100 (largest-remainder rounding to 2 decimals).
///
/// Categories come from `universe`; rules it does not know are grouped
/// under [`UNKNOWN_CATEGORY`]. Documentation and NOISE rows are omitted.
pub fn category_distribution(
    records: &[LabeledRecord],
    tool: Tool,
    universe: Option<&RuleUniverse>,
) -> Vec<CategoryRow> {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.tool == tool.dataset_name()) {
        let category = universe
            .and_then(|u| u.category_of(&r.warning_type))
            .unwrap_or(UNKNOWN_CATEGORY);
        if EXCLUDED_CATEGORIES.contains(&category) {
            continue;
        }
        let slot = counts.entry(category.to_string()).or_default();
        if r.label == 1 {
            slot.0 += 1;
        } else {
            slot.1 += 1;
        }
    }
    let a: Vec<u64> = counts.values().map(|c| c.0).collect();
    let na: Vec<u64> = counts.values().map(|c| c.1).collect();
    let (a_pct, na_pct) = (percentages(&a), percentages(&na));
    counts
        .into_iter()
        .enumerate()
        .map(
            |(i, (category, (actionable, non_actionable)))| CategoryRow {
                category,
                actionable,
                actionable_pct: a_pct[i],
                non_actionable,
                non_actionable_pct: na_pct[i],
            },
        )
        .collect()
}

/// Shares of `counts` in percent with two decimals that add up to exactly
/// 100.00, using largest-remainder apportionment of 10,000 hundredths.
/// All zeros when the total is zero.
pub fn percentages(counts: &[u64]) -> Vec<f64> {
    let total: u128 = counts.iter().map(|&c| u128::from(c)).sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    let mut units: Vec<u128> = counts
        .iter()
        .map(|&c| u128::from(c) * 10_000 / total)
        .collect();
    let mut left = 10_000 - units.iter().sum::<u128>();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // largest remainder first, earlier entry on ties
    order.sort_by_key(|&i| std::cmp::Reverse(u128::from(counts[i]) * 10_000 % total));
    for &i in &order {
        if left == 0 {
            break;
        }
        units[i] += 1;
        left -= 1;
    }
    units.into_iter().map(|u| u as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CoverageClass {
    Both,
    OnlyA,
    OnlyNa,
    Neither,
}

impl CoverageClass {
    pub const ALL: [CoverageClass; 4] = [
        CoverageClass::Both,
        CoverageClass::OnlyA,
        CoverageClass::OnlyNa,
        CoverageClass::Neither,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CoverageClass::Both => "BOTH",
            CoverageClass::OnlyA => "ONLY_A",
            CoverageClass::OnlyNa => "ONLY_NA",
            CoverageClass::Neither => "NEITHER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub tool: Tool,
    pub universe_size: usize,
    pub per_rule: BTreeMap<String, CoverageClass>,
    /// Rules seen in the records but absent from the universe, with their
    /// (actionable, non-actionable) counts.
    pub unknown_rules: BTreeMap<String, (u64, u64)>,
}

impl Coverage {
    pub fn count(&self, class: CoverageClass) -> usize {
        self.per_rule.values().filter(|&&c| c == class).count()
    }

    pub fn total(&self) -> usize {
        CoverageClass::ALL.iter().map(|&c| self.count(c)).sum()
    }

    /// Share of the universe in `class`, in percent.
    pub fn share(&self, class: CoverageClass) -> f64 {
        if self.universe_size == 0 {
            0.0
        } else {
            self.count(class) as f64 * 100.0 / self.universe_size as f64
        }
    }
}

/// Assign every rule of `universe` to the coverage class given by the labels
/// of its records. Records of other tools are ignored.
pub fn rule_coverage_classes(records: &[LabeledRecord], universe: &RuleUniverse) -> Coverage {
    let mut seen: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.tool == universe.tool.dataset_name())
    {
        let slot = seen.entry(r.warning_type.as_str()).or_default();
        if r.label == 1 {
            slot.0 += 1;
        } else {
            slot.1 += 1;
        }
    }
    let per_rule = universe
        .rule_ids()
        .map(|rule| {
            let class = match seen.get(rule) {
                Some(&(a, na)) if a > 0 && na > 0 => CoverageClass::Both,
                Some(&(a, _)) if a > 0 => CoverageClass::OnlyA,
                Some(&(_, na)) if na > 0 => CoverageClass::OnlyNa,
                _ => CoverageClass::Neither,
            };
            (rule.to_string(), class)
        })
        .collect();
    let unknown_rules = seen
        .into_iter()
        .filter(|(rule, _)| !universe.contains(rule))
        .map(|(rule, c)| (rule.to_string(), c))
        .collect();
    Coverage {
        tool: universe.tool,
        universe_size: universe.len(),
        per_rule,
        unknown_rules,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectRow {
    pub repo: String,
    /// tool -> (actionable, non-actionable)
    pub counts: BTreeMap<String, (u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectStats {
    pub tools: Vec<String>,
    pub rows: Vec<ProjectRow>,
    pub sum: ProjectRow,
}

/// Label counts per repository and tool, plus a "Sum" row.
pub fn project_stats(records: &[LabeledRecord]) -> ProjectStats {
    let mut by_repo: BTreeMap<&str, BTreeMap<String, (u64, u64)>> = BTreeMap::new();
    let mut tools = BTreeSet::new();
    let mut sum: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for r in records {
        tools.insert(r.tool.clone());
        for slot in [
            by_repo
                .entry(&r.repo)
                .or_default()
                .entry(r.tool.clone())
                .or_default(),
            sum.entry(r.tool.clone()).or_default(),
        ] {
            if r.label == 1 {
                slot.0 += 1;
            } else {
                slot.1 += 1;
            }
        }
    }
    ProjectStats {
        tools: tools.into_iter().collect(),
        rows: by_repo
            .into_iter()
            .map(|(repo, counts)| ProjectRow {
                repo: repo.to_string(),
                counts,
            })
            .collect(),
        sum: ProjectRow {
            repo: "Sum".into(),
            counts: sum,
        },
    }
}

/// Inputs of the sample-size formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSpec {
    pub population: u64,
    pub z: f64,
    pub p_hat: f64,
    pub epsilon: f64,
}

impl SampleSpec {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.population == 0 {
            return Err(StatsError::InvalidSpec(
                "population must be at least 1".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(StatsError::InvalidSpec(format!(
                "margin {} not in (0, 1]",
                self.epsilon
            )));
        }
        if !(0.0..=1.0).contains(&self.p_hat) {
            return Err(StatsError::InvalidSpec(format!(
                "proportion {} not in [0, 1]",
                self.p_hat
            )));
        }
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(StatsError::InvalidSpec(format!(
                "z-score {} must be positive",
                self.z
            )));
        }
        Ok(())
    }

    /// Sample size before the finite population correction.
    pub fn n0(&self) -> f64 {
        self.z * self.z * self.p_hat * (1.0 - self.p_hat) / (self.epsilon * self.epsilon)
    }
}

/// Cochran's sample size with finite population correction:
/// `n0 = z² p̂ (1 - p̂) / ε²`, `n = ceil(n0 / (1 + (n0 - 1) / N))`, at most N.
pub fn cochran_sample_size(spec: &SampleSpec) -> Result<u64, StatsError> {
    spec.validate()?;
    let n0 = spec.n0();
    let n = n0 / (1.0 + (n0 - 1.0) / spec.population as f64);
    // keep values like 68.0000000001 from rounding up to 69
    let n = (n - 1e-9).ceil().max(0.0) as u64;
    Ok(n.min(spec.population))
}

/// Two-sided standard normal critical value for a confidence level in (0, 1).
pub fn z_for_confidence(confidence: f64) -> Result<f64, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidSpec(format!(
            "confidence {confidence} not in (0, 1)"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0))
}

/// `z` as it appears in two-decimal z tables: rounded to three decimals,
/// then half-up to two (1.6449 -> 1.645 -> 1.65).
pub fn table_z(z: f64) -> f64 {
    let thousandths = (z * 1000.0).round() as i64;
    ((thousandths + 5).div_euclid(10)) as f64 / 100.0
}

/// Indices of `n` distinct items drawn uniformly from `0..len`, in draw
/// order. Deterministic for a given seed.
pub fn sample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>, StatsError> {
    if n > len {
        return Err(StatsError::SampleTooLarge { n, available: len });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, len, n).into_vec())
}

pub fn draw_validation_sample<T: Clone>(
    records: &[T],
    n: usize,
    seed: u64,
) -> Result<Vec<T>, StatsError> {
    Ok(sample_indices(records.len(), n, seed)?
        .into_iter()
        .map(|i| records[i].clone())
        .collect())
}

/// Label counts of a large deduplicated reference corpus (102 Java
/// projects, PMD and SpotBugs combined), kept as a yardstick for local runs.
/// Not recomputed from anything in this crate.
pub const REFERENCE_LABEL_COUNTS: [(&str, u64); 2] =
    [("actionable", 145_997), ("non-actionable", 937_076)];

/// [`REFERENCE_LABEL_COUNTS`] with their percentage shares.
pub fn reference_table() -> Vec<(&'static str, u64, f64)> {
    let counts: Vec<u64> = REFERENCE_LABEL_COUNTS.iter().map(|c| c.1).collect();
    REFERENCE_LABEL_COUNTS
        .iter()
        .zip(percentages(&counts))
        .map(|(&(label, n), pct)| (label, n, pct))
        .collect()
}
