use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::{AnalyzerError, LocalName, Tool};

const PMD_MANIFEST: &str = include_str!("../../rules/pmd.txt");
const BUILTIN_MANIFEST: &str = include_str!("../../rules/builtin.txt");

/// The set of rules a tool can report, each mapped to its category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleUniverse {
    pub tool: Tool,
    rules: BTreeMap<String, String>,
}

impl RuleUniverse {
    /// Universe shipped with the crate, if one exists for `tool`.
    ///
    /// SpotBugs has none; build it from an installation with
    /// [`RuleUniverse::from_spotbugs_jar`].
    pub fn bundled(tool: Tool) -> Option<RuleUniverse> {
        let manifest = match tool {
            Tool::Pmd => PMD_MANIFEST,
            Tool::Builtin => BUILTIN_MANIFEST,
            Tool::SpotBugs => return None,
        };
        Some(Self::parse_manifest(tool, manifest).expect("bundled manifest is well formed"))
    }

    /// Manifest format: one rule id per line; `#` starts a comment; a
    /// `# category: <name>` comment sets the category of following rules.
    pub fn parse_manifest(tool: Tool, text: &str) -> Result<RuleUniverse, AnalyzerError> {
        let mut rules = BTreeMap::new();
        let mut category = String::from("Uncategorized");
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(name) = comment.trim().strip_prefix("category:") {
                    category = name.trim().to_string();
                }
                continue;
            }
            let rule = line.split('#').next().unwrap_or_default().trim();
            if rule.is_empty() {
                continue;
            }
            if rule.contains(char::is_whitespace) {
                return Err(AnalyzerError::Manifest {
                    line: i + 1,
                    reason: format!("rule id {rule:?} contains whitespace"),
                });
            }
            if rules.insert(rule.to_string(), category.clone()).is_some() {
                return Err(AnalyzerError::Manifest {
                    line: i + 1,
                    reason: format!("duplicate rule id {rule}"),
                });
            }
        }
        Ok(RuleUniverse { tool, rules })
    }

    pub fn load_manifest(tool: Tool, path: &Path) -> Result<RuleUniverse, AnalyzerError> {
        Self::parse_manifest(tool, &std::fs::read_to_string(path)?)
    }

    /// Read `<BugPattern type=... category=...>` entries from a SpotBugs
    /// plugin descriptor (`findbugs.xml`).
    pub fn from_spotbugs_plugin_xml(text: &str) -> Result<RuleUniverse, AnalyzerError> {
        let doc = roxmltree::Document::parse(text).map_err(AnalyzerError::from_xml)?;
        let rules = doc
            .descendants()
            .filter(|n| n.has_tag_name_local("BugPattern"))
            .filter(|n| n.attribute("deprecated") != Some("true"))
            .filter_map(|n| {
                Some((
                    n.attribute("type")?.to_string(),
                    n.attribute("category")
                        .unwrap_or("Uncategorized")
                        .to_string(),
                ))
            })
            .collect();
        Ok(RuleUniverse {
            tool: Tool::SpotBugs,
            rules,
        })
    }

    /// Extract the universe from `spotbugs.jar`.
    pub fn from_spotbugs_jar(path: &Path) -> Result<RuleUniverse, AnalyzerError> {
        let mut archive = zip::ZipArchive::new(std::fs::File::open(path)?)?;
        let mut text = String::new();
        archive.by_name("findbugs.xml")?.read_to_string(&mut text)?;
        Self::from_spotbugs_plugin_xml(&text)
    }

    pub fn from_rules<I, S, C>(tool: Tool, rules: I) -> RuleUniverse
    where
        I: IntoIterator<Item = (S, C)>,
        S: Into<String>,
        C: Into<String>,
    {
        RuleUniverse {
            tool,
            rules: rules
                .into_iter()
                .map(|(r, c)| (r.into(), c.into()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn contains(&self, rule_id: &str) -> bool {
        self.rules.contains_key(rule_id)
    }

    pub fn category_of(&self, rule_id: &str) -> Option<&str> {
        self.rules.get(rule_id).map(String::as_str)
    }

    /// Rule ids in sorted order.
    pub fn rule_ids(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    /// Write in manifest format, grouped by category.
    pub fn to_manifest(&self) -> String {
        let mut by_category: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (rule, cat) in &self.rules {
            by_category.entry(cat).or_default().push(rule);
        }
        let mut out = String::new();
        for (cat, rules) in by_category {
            out.push_str(&format!("# category: {cat}\n"));
            for r in rules {
                out.push_str(r);
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_pmd_has_283_rules_without_documentation() {
        let u = RuleUniverse::bundled(Tool::Pmd).unwrap();
        assert_eq!(u.len(), 283);
        assert_eq!(u.category_of("EmptyCatchBlock"), Some("Error Prone"));
        assert_eq!(u.category_of("UnusedPrivateField"), Some("Best Practices"));
        assert!(!u.contains("CommentRequired"));
        assert!(u
            .rule_ids()
            .all(|r| u.category_of(r) != Some("Documentation")));
    }

    #[test]
    fn bundled_builtin_matches_analyzer_rules() {
        let u = RuleUniverse::bundled(Tool::Builtin).unwrap();
        assert_eq!(
            u.rule_ids().collect::<Vec<_>>(),
            ["EmptyCatch", "LongLine", "SysOut"]
        );
        assert_eq!(u.category_of("LongLine"), Some("Code Style"));
    }

    #[test]
    fn manifest_parsing() {
        let text = "# header\n# category: A\nR1\nR2 # trailing comment\n\n# category: B\nR3\n";
        let u = RuleUniverse::parse_manifest(Tool::Pmd, text).unwrap();
        assert_eq!(u.len(), 3);
        assert_eq!(u.category_of("R2"), Some("A"));
        assert_eq!(u.category_of("R3"), Some("B"));
        let again = RuleUniverse::parse_manifest(Tool::Pmd, &u.to_manifest()).unwrap();
        assert_eq!(again, u);
        assert!(RuleUniverse::parse_manifest(Tool::Pmd, "R1\nR1\n").is_err());
        assert!(RuleUniverse::parse_manifest(Tool::Pmd, "two words\n").is_err());
    }

    #[test]
    fn spotbugs_plugin_descriptor() {
        let xml = r#"<FindbugsPlugin>
            <Detector class="x.Y" reports="NP_A,NP_B"/>
            <BugPattern abbrev="NP" type="NP_A" category="CORRECTNESS"/>
            <BugPattern abbrev="NP" type="NP_B" category="CORRECTNESS"/>
            <BugPattern abbrev="SQL" type="SQL_X" category="SECURITY"/>
            <BugPattern abbrev="OLD" type="OLD_ONE" category="STYLE" deprecated="true"/>
        </FindbugsPlugin>"#;
        let u = RuleUniverse::from_spotbugs_plugin_xml(xml).unwrap();
        assert_eq!(u.len(), 3);
        assert_eq!(u.category_of("SQL_X"), Some("SECURITY"));
    }
}
