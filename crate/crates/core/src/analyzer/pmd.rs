use roxmltree::Document;

use super::{
    attr_u32, node_line, normalize_separators, AnalyzerError, LocalName, Report, Span, Tool,
    Warning,
};
use crate::repo::Sha;

const EXCLUDED_RULESET: &str = "Documentation";

/// Parse a PMD XML report (`<pmd><file name><violation .../></file></pmd>`).
///
/// Violations from the Documentation ruleset are dropped. File names are kept
/// as reported; call [`Report::relativize`] with the analyzed root afterwards.
pub fn parse_pmd_report(bytes: &[u8], commit_sha: Sha) -> Result<Report, AnalyzerError> {
    let text = String::from_utf8_lossy(bytes);
    let doc = Document::parse(&text).map_err(AnalyzerError::from_xml)?;
    let root = doc.root_element();
    if root.tag_name().name() != "pmd" {
        return Err(AnalyzerError::Invalid {
            line: node_line(root),
            reason: format!("expected <pmd> root, found <{}>", root.tag_name().name()),
        });
    }

    let mut warnings = Vec::new();
    for file in root.children().filter(|n| n.has_tag_name_local("file")) {
        let name = file
            .attribute("name")
            .ok_or_else(|| AnalyzerError::Invalid {
                line: node_line(file),
                reason: "<file> without name".into(),
            })?;
        let file_path = normalize_separators(name);
        for v in file
            .children()
            .filter(|n| n.has_tag_name_local("violation"))
        {
            let ruleset = v.attribute("ruleset").unwrap_or_default().trim();
            if ruleset.eq_ignore_ascii_case(EXCLUDED_RULESET) {
                continue;
            }
            let invalid = |reason: String| AnalyzerError::Invalid {
                line: node_line(v),
                reason,
            };
            let rule_id = v
                .attribute("rule")
                .map(str::trim)
                .filter(|r| !r.is_empty())
                .ok_or_else(|| invalid("violation without rule".into()))?;
            let begin = attr_u32(v, "beginline")?
                .ok_or_else(|| invalid("violation without beginline".into()))?;
            let end = attr_u32(v, "endline")?.unwrap_or(begin);
            let span = Span::new(
                begin,
                end,
                attr_u32(v, "begincolumn")?,
                attr_u32(v, "endcolumn")?,
            )
            .map_err(invalid)?;
            let message = v.text().unwrap_or_default().trim();
            let message = if message.is_empty() { rule_id } else { message };
            warnings.push(Warning {
                tool: Tool::Pmd,
                rule_id: rule_id.to_string(),
                category: ruleset.to_string(),
                message: message.to_string(),
                file_path: file_path.clone(),
                span,
            });
        }
    }
    Ok(Report {
        commit_sha,
        warnings,
        skipped_instances: 0,
    })
}
