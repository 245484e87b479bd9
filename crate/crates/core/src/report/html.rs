//! Self-contained HTML reports: inline SVG and styles, zero external
//! requests.

use std::collections::BTreeSet;

use super::svg::{Series, SeriesStyle};
use super::{ReportError, SectionContent, Table};
use crate::device::ArraySet;
use crate::executor::{ActionRecord, ActionStatus, RunRecord};
use crate::platform::diff_platforms;
use crate::protocols::{self, Results};

pub(crate) fn escape_html(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const STYLE: &str = "body{font-family:sans-serif;margin:1.5em;color:#222;}\
 h1{font-size:1.5em;}h2{font-size:1.2em;border-bottom:1px solid #ccc;}\
 table{border-collapse:collapse;margin:0.6em 0;}\
 th,td{border:1px solid #bbb;padding:0.25em 0.6em;font-size:0.9em;text-align:left;}\
 th{background:#f0f0f0;}\
 .status-completed{color:#176117;}.status-failed{color:#a11212;}\
 .status-acquired{color:#6a5d11;}\
 figure{display:inline-block;margin:0.4em;}";

fn render_table(out: &mut String, table: &Table) {
    out.push_str("<table><tr>");
    for cell in &table.header {
        out.push_str(&format!("<th>{}</th>", escape_html(cell)));
    }
    out.push_str("</tr>");
    for row in &table.rows {
        out.push_str("<tr>");
        for cell in row {
            out.push_str(&format!("<td>{}</td>", escape_html(cell)));
        }
        out.push_str("</tr>");
    }
    out.push_str("</table>");
}

fn render_section_content(out: &mut String, content: &SectionContent, include_tables: bool) {
    out.push_str(&format!("<h3>{}</h3>", escape_html(&content.title)));
    for figure in &content.figures {
        out.push_str("<figure>");
        out.push_str(figure);
        out.push_str("</figure>");
    }
    if include_tables {
        for table in &content.tables {
            render_table(out, table);
        }
    }
    if let Some(raw) = &content.raw_html {
        out.push_str(raw);
    }
}

fn status_label(status: ActionStatus) -> &'static str {
    match status {
        ActionStatus::Acquired => "acquired",
        ActionStatus::Completed => "completed",
        ActionStatus::Failed => "failed",
    }
}

fn action_sections(action: &ActionRecord) -> Vec<SectionContent> {
    let Some(data) = &action.data else {
        return Vec::new();
    };
    let Ok(routine) = protocols::lookup(&action.operation) else {
        return Vec::new();
    };
    let empty = Results::new(&action.operation);
    let results = action.results.as_ref().unwrap_or(&empty);
    routine.report(data, results)
}

fn document(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"/>\
         <title>{}</title><style>{}</style></head><body>{}</body></html>\n",
        escape_html(title),
        STYLE,
        body
    )
}

/// Render a run directory into one self-contained HTML document: a header
/// with the platform diff, then one section per action in execution order.
pub fn render_report(run: &RunRecord) -> Result<String, ReportError> {
    if run.meta.runcard.actions.is_empty() {
        return Err(ReportError::EmptyRun);
    }
    let mut body = String::new();
    body.push_str(&format!(
        "<h1>Calibration run: {}</h1>",
        escape_html(&run.meta.platform)
    ));
    body.push_str(&format!(
        "<p>started {} - finished {} - seed {}</p>",
        escape_html(&run.meta.started_at),
        escape_html(&run.meta.finished_at),
        run.meta.seed
    ));
    match &run.platform_final {
        Some(final_config) => {
            let diffs = diff_platforms(&run.platform_start, final_config);
            if diffs.is_empty() {
                body.push_str("<p>No config changes.</p>");
            } else {
                let table = Table {
                    header: vec!["field".into(), "start".into(), "final".into()],
                    rows: diffs
                        .iter()
                        .map(|d| {
                            vec![d.path.clone(), d.old.to_string(), d.new.to_string()]
                        })
                        .collect(),
                };
                body.push_str("<h2>Platform changes</h2>");
                render_table(&mut body, &table);
            }
        }
        None => body.push_str("<p>No final platform snapshot (acquisition only).</p>"),
    }

    for action in &run.actions {
        body.push_str(&format!(
            "<section id=\"{}\">",
            escape_html(&action.id)
        ));
        body.push_str(&format!(
            "<h2>{} <small>({})</small> <span class=\"status-{}\">{}</span></h2>",
            escape_html(&action.id),
            escape_html(&action.operation),
            status_label(action.status),
            status_label(action.status),
        ));
        if let Some(error) = &action.error {
            body.push_str(&format!("<p>Error: {}</p>", escape_html(error)));
        }
        // Failed and acquire-only actions render their raw-data figures but
        // no results tables.
        let include_tables =
            action.status == ActionStatus::Completed && action.results.is_some();
        for content in action_sections(action) {
            render_section_content(&mut body, &content, include_tables);
        }
        body.push_str("</section>");
    }
    Ok(document(
        &format!("qcal report - {}", run.meta.platform),
        &body,
    ))
}

/// The primary 1D series of an acquisition, for compare overlays.
fn primary_series(set: &ArraySet) -> Option<(String, Vec<(f64, f64)>)> {
    const AXES: [(&str, &str); 8] = [
        ("amplitude", "amplitude"),
        ("duration_ns", "duration (ns)"),
        ("delay_ns", "delay (ns)"),
        ("n_flips", "number of flips"),
        ("beta", "DRAG beta"),
        ("depth", "sequence depth"),
        ("phase_rad", "phase (rad)"),
        ("frequency_hz", "frequency (Hz)"),
    ];
    if let Ok(extraction) = protocols::extract_probabilities(set) {
        for (name, label) in AXES {
            if let Some(axis) = set.array(name).and_then(|a| a.as_f64()) {
                if axis.len() == extraction.probs.len() {
                    return Some((
                        label.to_string(),
                        axis.iter().copied().zip(extraction.probs.iter().copied()).collect(),
                    ));
                }
            }
        }
    }
    let signal = set.array("signal").and_then(|a| a.as_c64())?;
    let freqs = set.array("frequency_hz").and_then(|a| a.as_f64())?;
    if freqs.len() != signal.len() {
        return None;
    }
    Some((
        "frequency (Hz)".to_string(),
        freqs
            .iter()
            .zip(signal)
            .map(|(&f, z)| (f, z.norm()))
            .collect(),
    ))
}

fn compare_table(target: &str, a: Option<&Results>, b: Option<&Results>) -> Table {
    let mut names: BTreeSet<String> = BTreeSet::new();
    for results in [a, b].into_iter().flatten() {
        if let Some(tr) = results.per_target.get(target) {
            names.extend(tr.values.keys().cloned());
        }
    }
    let value_of = |results: Option<&Results>, name: &str| -> String {
        results
            .and_then(|r| r.per_target.get(target))
            .and_then(|tr| tr.value(name))
            .map(|v| format!("{v:.6e}"))
            .unwrap_or_else(|| "-".into())
    };
    Table {
        header: vec!["metric".into(), "run A".into(), "run B".into()],
        rows: names
            .iter()
            .map(|name| {
                vec![
                    name.clone(),
                    value_of(a, name),
                    value_of(b, name),
                ]
            })
            .collect(),
    }
}

/// Render a combined report for two runs: overlaid data series and
/// side-by-side result tables for every shared (operation, target) pair.
pub fn render_compare(run_a: &RunRecord, run_b: &RunRecord) -> Result<String, ReportError> {
    let pairs = |run: &RunRecord| -> Vec<(String, String)> {
        let mut out = Vec::new();
        for action in &run.actions {
            if action.data.is_none() {
                continue;
            }
            for target in &action.targets {
                out.push((action.operation.clone(), target.clone()));
            }
        }
        out
    };
    let set_b: BTreeSet<(String, String)> = pairs(run_b).into_iter().collect();
    let mut shared: Vec<(String, String)> = Vec::new();
    for pair in pairs(run_a) {
        if set_b.contains(&pair) && !shared.contains(&pair) {
            shared.push(pair);
        }
    }
    if shared.is_empty() {
        return Err(ReportError::NothingShared);
    }

    let find_action = |run: &RunRecord, op: &str, target: &str| -> Option<ActionRecord> {
        run.actions
            .iter()
            .find(|a| a.operation == op && a.targets.iter().any(|t| t == target))
            .cloned()
    };

    let mut body = String::new();
    body.push_str(&format!(
        "<h1>Comparison: {} vs {}</h1>",
        escape_html(&run_a.dir.display().to_string()),
        escape_html(&run_b.dir.display().to_string()),
    ));
    for (operation, target) in &shared {
        let action_a = find_action(run_a, operation, target);
        let action_b = find_action(run_b, operation, target);
        body.push_str(&format!(
            "<section id=\"compare-{}-{}\">",
            escape_html(operation),
            escape_html(target)
        ));
        body.push_str(&format!(
            "<h2>{} on {}</h2>",
            escape_html(operation),
            escape_html(target)
        ));
        let series_of = |action: &Option<ActionRecord>| {
            action
                .as_ref()
                .and_then(|a| a.data.as_ref())
                .and_then(|d| d.per_target.get(target))
                .and_then(primary_series)
        };
        match (series_of(&action_a), series_of(&action_b)) {
            (Some((x_label, points_a)), Some((_, points_b))) => {
                let overlay = super::svg::xy_figure(
                    &format!("{operation} - {target}"),
                    &x_label,
                    "signal",
                    &[
                        Series::new("run A", 0, SeriesStyle::LineWithMarkers)
                            .with_points(points_a),
                        Series::new("run B", 1, SeriesStyle::LineWithMarkers)
                            .with_points(points_b),
                    ],
                );
                body.push_str("<figure>");
                body.push_str(&overlay);
                body.push_str("</figure>");
            }
            _ => {
                // 2D acquisitions render side by side instead of overlaid.
                for (label, action) in [("run A", &action_a), ("run B", &action_b)] {
                    if let Some(action) = action {
                        body.push_str(&format!("<h3>{}</h3>", escape_html(label)));
                        for content in action_sections(action) {
                            for figure in &content.figures {
                                body.push_str("<figure>");
                                body.push_str(figure);
                                body.push_str("</figure>");
                            }
                        }
                    }
                }
            }
        }
        let results_a = action_a.as_ref().and_then(|a| a.results.clone());
        let results_b = action_b.as_ref().and_then(|a| a.results.clone());
        render_table(
            &mut body,
            &compare_table(target, results_a.as_ref(), results_b.as_ref()),
        );
        body.push_str("</section>");
    }

    // Actions present in only one run are listed, not compared.
    let shared_set: BTreeSet<&(String, String)> = shared.iter().collect();
    let mut unshared = Vec::new();
    for (label, run) in [("run A", run_a), ("run B", run_b)] {
        for pair in pairs(run) {
            if !shared_set.contains(&pair) {
                unshared.push(format!("{label}: {} on {}", pair.0, pair.1));
            }
        }
    }
    if !unshared.is_empty() {
        body.push_str("<section id=\"unshared\"><h2>Not compared</h2><ul>");
        for entry in unshared {
            body.push_str(&format!("<li>{}</li>", escape_html(&entry)));
        }
        body.push_str("</ul></section>");
    }
    Ok(document("qcal comparison", &body))
}

/// Strict well-formedness check: balanced tags, quoted attributes, valid
/// entities. The HTML this crate emits is XML-compatible, so any failure
/// here is a rendering bug.
pub fn check_well_formed(html: &str) -> Result<(), String> {
    let mut stack: Vec<String> = Vec::new();
    let bytes = html.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        match bytes[i] {
            b'<' => {
                if html[i..].starts_with("<!DOCTYPE") || html[i..].starts_with("<!doctype") {
                    let end = html[i..].find('>').ok_or("unterminated doctype")?;
                    i += end + 1;
                    continue;
                }
                if html[i..].starts_with("<!--") {
                    let end = html[i..].find("-->").ok_or("unterminated comment")?;
                    i += end + 3;
                    continue;
                }
                let end = html[i..].find('>').ok_or("unterminated tag")?;
                let tag = &html[i + 1..i + end];
                i += end + 1;
                if let Some(name) = tag.strip_prefix('/') {
                    let name = name.trim();
                    match stack.pop() {
                        Some(open) if open == name => {}
                        Some(open) => {
                            return Err(format!("mismatched tag: <{open}> closed by </{name}>"))
                        }
                        None => return Err(format!("unexpected closing tag </{name}>")),
                    }
                    continue;
                }
                let self_closing = tag.ends_with('/');
                let tag = tag.trim_end_matches('/');
                let name: String = tag
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '-')
                    .collect();
                if name.is_empty() {
                    return Err(format!("invalid tag: <{tag}>"));
                }
                check_attributes(&tag[name.len()..])?;
                if !self_closing {
                    stack.push(name);
                }
            }
            b'>' => return Err("stray '>' in text".into()),
            b'&' => {
                let entity_end = html[i..]
                    .find(';')
                    .filter(|&e| e <= 12)
                    .ok_or("unterminated entity")?;
                let entity = &html[i + 1..i + entity_end];
                let valid = matches!(entity, "amp" | "lt" | "gt" | "quot" | "apos")
                    || (entity.starts_with('#')
                        && entity[1..].chars().all(|c| c.is_ascii_digit()));
                if !valid {
                    return Err(format!("invalid entity &{entity};"));
                }
                i += entity_end + 1;
            }
            _ => i += 1,
        }
    }
    if let Some(open) = stack.pop() {
        return Err(format!("unclosed tag <{open}>"));
    }
    Ok(())
}

fn check_attributes(rest: &str) -> Result<(), String> {
    // Attributes must be name="value" with double quotes.
    let mut chars = rest.chars().peekable();
    loop {
        while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
            chars.next();
        }
        if chars.peek().is_none() {
            return Ok(());
        }
        let mut name = String::new();
        while matches!(chars.peek(), Some(c) if c.is_ascii_alphanumeric() || *c == '-' || *c == ':')
        {
            name.push(chars.next().unwrap());
        }
        if name.is_empty() {
            return Err(format!("malformed attribute near {rest:?}"));
        }
        if chars.peek() != Some(&'=') {
            return Err(format!("attribute {name} missing value"));
        }
        chars.next();
        if chars.next() != Some('"') {
            return Err(format!("attribute {name} must use double quotes"));
        }
        for c in chars.by_ref() {
            if c == '"' {
                break;
            }
            if c == '<' {
                return Err(format!("raw '<' inside attribute {name}"));
            }
        }
    }
}
