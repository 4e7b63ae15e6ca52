use std::io::{self, Write};

use resonance_core::Complex64;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Number(f64),
    Complex(Complex64),
    Text(String),
    Flag(bool),
}

/// Everything a command produces: scalar results, an optional table, and
/// diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub summary: Vec<(String, Item)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub diagnostics: Vec<String>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, item: Item) {
        self.summary.push((key.into(), item));
    }
}

fn number(x: f64, digits: usize) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{:.*e}", digits - 1, x)
    }
}

fn item_text(item: &Item, digits: usize) -> String {
    match item {
        Item::Number(x) => number(*x, digits),
        Item::Complex(z) => format!("{} {}", number(z.re, digits), number(z.im, digits)),
        Item::Text(s) => s.clone(),
        Item::Flag(b) => b.to_string(),
    }
}

fn json_number(x: f64) -> Value {
    // NaN and infinities have no JSON form
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn item_json(item: &Item) -> Value {
    match item {
        Item::Number(x) => json_number(*x),
        Item::Complex(z) => json!([json_number(z.re), json_number(z.im)]),
        Item::Text(s) => Value::String(s.clone()),
        Item::Flag(b) => Value::Bool(*b),
    }
}

/// CSV with a `#` header holding the version, command and resolved config.
/// A report without a table writes its summary as `quantity,value` rows.
pub fn write_csv(out: &mut dyn Write, command: &str, config: &RunConfig, report: &Report) -> io::Result<()> {
    let digits = config.output.precision;
    writeln!(out, "# resonance {} {command}", env!("CARGO_PKG_VERSION"))?;
    for line in config.to_text() {
        writeln!(out, "# {line}")?;
    }
    for d in &report.diagnostics {
        writeln!(out, "# warning: {d}")?;
    }
    if report.columns.is_empty() {
        writeln!(out, "quantity,value")?;
        for (key, item) in &report.summary {
            writeln!(out, "{key},{}", item_text(item, digits))?;
        }
        return Ok(());
    }
    for (key, item) in &report.summary {
        writeln!(out, "# {key} = {}", item_text(item, digits))?;
    }
    writeln!(out, "{}", report.columns.join(","))?;
    for row in &report.rows {
        let cells: Vec<String> = row.iter().map(|&x| number(x, digits)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// One JSON object: version, command, config, summary, column arrays and
/// diagnostics. Numbers are written at full precision.
pub fn to_json(command: &str, config: &RunConfig, report: &Report) -> Value {
    let summary: Map<String, Value> = report.summary.iter().map(|(k, v)| (k.clone(), item_json(v))).collect();
    let mut results = Map::new();
    for (j, name) in report.columns.iter().enumerate() {
        results.insert(name.to_string(), report.rows.iter().map(|r| json_number(r[j])).collect());
    }
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config.to_json(),
        "summary": summary,
        "results": results,
        "diagnostics": report.diagnostics,
    })
}
