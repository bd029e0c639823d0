//! JSON and CSV output with stable key order and 17 significant digits.

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Rows for CSV output. Reports without one are flattened to a single row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
}

impl Report {
    pub fn new(json: Value) -> Self {
        Self { json, table: None }
    }

    pub fn with_table(json: Value, table: Table) -> Self {
        Self { json, table: Some(table) }
    }
}

/// `%.17g`-style formatting that always reads back as a float.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return "null".into();
    }
    if v == 0.0 {
        return "0.0".into();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        let trimmed = if fixed.contains('.') { fixed.trim_end_matches('0').to_string() } else { fixed };
        if trimmed.ends_with('.') {
            format!("{trimmed}0")
        } else if trimmed.contains('.') {
            trimmed
        } else {
            format!("{trimmed}.0")
        }
    } else {
        let m = mantissa.trim_end_matches('0');
        let m = if m.ends_with('.') { format!("{m}0") } else { m.to_string() };
        format!("{m}e{exp}")
    }
}

fn write_json(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().expect("float")));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_json(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_json(item, out);
            }
            out.push('}');
        }
    }
}

pub fn to_json(v: &Value) -> String {
    let mut out = String::new();
    write_json(v, &mut out);
    out.push('\n');
    out
}

fn csv_cell(v: &Value) -> String {
    let text = match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(_) | Value::Bool(_) => {
            let mut s = String::new();
            write_json(v, &mut s);
            s
        }
        other => {
            let mut s = String::new();
            write_json(other, &mut s);
            s
        }
    };
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text
    }
}

pub fn to_csv(report: &Report) -> String {
    let table = match &report.table {
        Some(t) => t.clone(),
        None => match &report.json {
            Value::Object(map) => Table {
                headers: map.keys().cloned().collect(),
                rows: vec![map.values().cloned().collect()],
            },
            other => Table { headers: vec!["value".into()], rows: vec![vec![other.clone()]] },
        },
    };
    let mut out = table.headers.join(",");
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(csv_cell).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn emit(report: &Report, format: Format) -> String {
    match format {
        Format::Json => to_json(&report.json),
        Format::Csv => to_csv(report),
    }
}
