use std::fmt::Write;

use super::{CategoryRow, Coverage, CoverageClass, ProjectStats};

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Left-aligned first column, right-aligned numbers.
fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<w$}", w = widths[0])
                } else {
                    format!("{c:>w$}", w = widths[i])
                }
            })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(rule.iter().map(String::as_str).collect());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

const CATEGORY_HEADER: [&str; 5] = [
    "category",
    "actionable",
    "actionable_pct",
    "non_actionable",
    "non_actionable_pct",
];

fn category_cells(rows: &[CategoryRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.category.clone(),
                r.actionable.to_string(),
                format!("{:.2}", r.actionable_pct),
                r.non_actionable.to_string(),
                format!("{:.2}", r.non_actionable_pct),
            ]
        })
        .collect()
}

pub fn category_csv(rows: &[CategoryRow]) -> String {
    csv_string(&CATEGORY_HEADER, category_cells(rows))
}

pub fn category_table(rows: &[CategoryRow]) -> String {
    text_table(&CATEGORY_HEADER, &category_cells(rows))
}

/// Horizontal bar chart with one pair of bars (A, NA percentages) per
/// category.
pub fn category_svg(title: &str, rows: &[CategoryRow]) -> String {
    const LABEL_W: f64 = 170.0;
    const BAR_W: f64 = 400.0;
    const ROW_H: f64 = 34.0;
    const TOP: f64 = 40.0;
    let height = TOP + ROW_H * rows.len() as f64 + 40.0;
    let width = LABEL_W + BAR_W + 80.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"  <text x="10" y="20" font-size="14">{}</text>"#,
        escape(title)
    );
    for (i, r) in rows.iter().enumerate() {
        let y = TOP + ROW_H * i as f64;
        let _ = writeln!(
            s,
            r#"  <text x="10" y="{:.1}">{}</text>"#,
            y + 18.0,
            escape(&r.category)
        );
        for (j, (pct, color)) in [
            (r.actionable_pct, "#2b8cbe"),
            (r.non_actionable_pct, "#f03b20"),
        ]
        .iter()
        .enumerate()
        {
            let by = y + 4.0 + 13.0 * j as f64;
            let w = BAR_W * pct / 100.0;
            let _ = writeln!(
                s,
                r#"  <rect x="{LABEL_W}" y="{by:.1}" width="{w:.1}" height="11" fill="{color}"/><text x="{:.1}" y="{:.1}">{pct:.2}%</text>"#,
                LABEL_W + w + 4.0,
                by + 10.0
            );
        }
    }
    let ly = height - 15.0;
    let _ = writeln!(
        s,
        r##"  <rect x="10" y="{:.1}" width="11" height="11" fill="#2b8cbe"/><text x="26" y="{ly:.1}">actionable</text><rect x="110" y="{:.1}" width="11" height="11" fill="#f03b20"/><text x="126" y="{ly:.1}">non-actionable</text>"##,
        ly - 10.0,
        ly - 10.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn coverage_cells(c: &Coverage) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = CoverageClass::ALL
        .iter()
        .map(|&class| {
            vec![
                class.name().to_string(),
                c.count(class).to_string(),
                format!("{:.2}", c.share(class)),
            ]
        })
        .collect();
    rows.push(vec![
        "TOTAL".into(),
        c.total().to_string(),
        format!("{:.2}", if c.universe_size == 0 { 0.0 } else { 100.0 }),
    ]);
    rows
}

pub fn coverage_csv(c: &Coverage) -> String {
    csv_string(&["class", "rules", "pct"], coverage_cells(c))
}

pub fn coverage_table(c: &Coverage) -> String {
    let mut out = text_table(&["class", "rules", "pct"], &coverage_cells(c));
    for (rule, (a, na)) in &c.unknown_rules {
        let _ = writeln!(
            out,
            "unknown rule {rule}: {a} actionable, {na} non-actionable"
        );
    }
    out
}

fn project_cells(p: &ProjectStats) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["repo".to_string()];
    for t in &p.tools {
        header.push(format!("{t} A"));
        header.push(format!("{t} NA"));
    }
    let rows = p
        .rows
        .iter()
        .chain(std::iter::once(&p.sum))
        .map(|row| {
            let mut cells = vec![row.repo.clone()];
            for t in &p.tools {
                let (a, na) = row.counts.get(t).copied().unwrap_or_default();
                cells.push(a.to_string());
                cells.push(na.to_string());
            }
            cells
        })
        .collect();
    (header, rows)
}

pub fn project_csv(p: &ProjectStats) -> String {
    let (header, rows) = project_cells(p);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_string(&header, rows)
}

pub fn project_table(p: &ProjectStats) -> String {
    let (header, rows) = project_cells(p);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    text_table(&header, &rows)
}
