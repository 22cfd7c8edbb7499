use std::io::Write;

use serde_json::{json, Value};

use crate::config::{Format, RunConfig};
use crate::report::{Cell, Report};

fn status(report: &Report) -> &'static str {
    if report.passed() {
        "ok"
    } else {
        "invariant_failure"
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_json(report: &Report) -> String {
    let doc = json!({
        "config": report.config,
        "results": report.results,
        "checks": report.checks,
        "status": status(report),
    });
    // `Value` objects are BTreeMaps, so keys come out sorted.
    let mut out = serde_json::to_string_pretty(&doc).expect("json serializes");
    out.push('\n');
    out
}

fn comment_lines(out: &mut String, key: &str, value: &Value) {
    out.push_str(&format!("# {key} = {value}\n"));
}

fn cell(c: &Cell) -> String {
    match c {
        Cell::Float(v) => format!("{v:.16e}"),
        Cell::Int(v) => v.to_string(),
        Cell::Bool(v) => v.to_string(),
        Cell::Missing => String::new(),
    }
}

/// `#` comment lines carrying the resolved config, the summary scalars and
/// the checks, then a header and one record per row.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::new();
    let config = serde_json::to_value(&report.config).expect("config serializes");
    if let Value::Object(map) = &config {
        let sorted: std::collections::BTreeMap<_, _> = map.iter().collect();
        for (k, v) in sorted {
            comment_lines(&mut out, &format!("config.{k}"), v);
        }
    }
    for (k, v) in &report.summary {
        comment_lines(&mut out, k, v);
    }
    for c in &report.checks {
        comment_lines(&mut out, &format!("check.{}", c.name), &json!({"pass": c.pass, "threshold": c.threshold, "value": c.value}));
    }
    comment_lines(&mut out, "status", &json!(status(report)));

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&report.table.columns).expect("in-memory write");
    for row in &report.table.rows {
        w.write_record(row.iter().map(cell)).expect("in-memory write");
    }
    let body = w.into_inner().expect("in-memory flush");
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    out
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Csv => to_csv(report),
    }
}

/// Writes the rendered report once, to `path` or stdout.
pub fn emit(report: &Report, config: &RunConfig) -> std::io::Result<()> {
    let text = render(report, config.format);
    match &config.output {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}
