use roxmltree::{Document, Node};

use super::{
    attr_u32, node_line, normalize_separators, AnalyzerError, LocalName, Report, Span, Tool,
    Warning,
};
use crate::repo::Sha;

/// Parse a SpotBugs `<BugCollection>` XML report.
///
/// Each `<BugInstance>` is anchored at its primary `<SourceLine>`: the first
/// direct child marked `primary="true"`, else the first direct child, else the
/// same search over nested class/method/field annotations. Instances without a
/// line-bearing source location are counted in `skipped_instances`.
///
/// `sourcepath` is package-relative; see [`Report::resolve_source_paths`].
pub fn parse_spotbugs_report(bytes: &[u8], commit_sha: Sha) -> Result<Report, AnalyzerError> {
    let text = String::from_utf8_lossy(bytes);
    let doc = Document::parse(&text).map_err(AnalyzerError::from_xml)?;
    let root = doc.root_element();
    if root.tag_name().name() != "BugCollection" {
        return Err(AnalyzerError::Invalid {
            line: node_line(root),
            reason: format!(
                "expected <BugCollection> root, found <{}>",
                root.tag_name().name()
            ),
        });
    }

    let mut report = Report::empty(commit_sha);
    for bug in root
        .children()
        .filter(|n| n.has_tag_name_local("BugInstance"))
    {
        let rule_id = bug
            .attribute("type")
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| AnalyzerError::Invalid {
                line: node_line(bug),
                reason: "BugInstance without type".into(),
            })?;
        let Some((path, span)) = primary_location(bug)? else {
            report.skipped_instances += 1;
            continue;
        };
        let message = ["LongMessage", "ShortMessage"]
            .iter()
            .find_map(|tag| {
                bug.children()
                    .find(|n| n.has_tag_name_local(tag))
                    .and_then(|n| n.text())
                    .map(str::trim)
                    .filter(|m| !m.is_empty())
            })
            .unwrap_or(rule_id);
        report.warnings.push(Warning {
            tool: Tool::SpotBugs,
            rule_id: rule_id.to_string(),
            category: bug
                .attribute("category")
                .unwrap_or_default()
                .trim()
                .to_string(),
            message: message.to_string(),
            file_path: path,
            span,
        });
    }
    Ok(report)
}

fn primary_location(bug: Node<'_, '_>) -> Result<Option<(String, Span)>, AnalyzerError> {
    let direct: Vec<Node> = bug
        .children()
        .filter(|n| n.has_tag_name_local("SourceLine"))
        .collect();
    let nested: Vec<Node> = bug
        .children()
        .filter(|n| n.is_element() && !n.has_tag_name_local("SourceLine"))
        .flat_map(|n| n.children().filter(|c| c.has_tag_name_local("SourceLine")))
        .collect();
    for group in [direct, nested] {
        let usable: Vec<Node> = group
            .into_iter()
            .filter(|n| n.attribute("start").is_some() && n.attribute("sourcepath").is_some())
            .collect();
        let chosen = usable
            .iter()
            .find(|n| n.attribute("primary") == Some("true"))
            .or_else(|| usable.first());
        if let Some(node) = chosen {
            return source_line(*node).map(Some);
        }
    }
    Ok(None)
}

fn source_line(node: Node<'_, '_>) -> Result<(String, Span), AnalyzerError> {
    let start = attr_u32(node, "start")?.unwrap_or(1);
    let end = attr_u32(node, "end")?.unwrap_or(start).max(start);
    let span = Span::lines(start, end).map_err(|reason| AnalyzerError::Invalid {
        line: node_line(node),
        reason,
    })?;
    let path = normalize_separators(node.attribute("sourcepath").unwrap_or_default());
    Ok((path, span))
}
