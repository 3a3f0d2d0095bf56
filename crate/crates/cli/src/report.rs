//! Flat key/value reports rendered as text, JSON or CSV.

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Field {
    fn plain(&self) -> String {
        match self {
            Field::Num(v) => fmt_num(*v),
            Field::Int(v) => v.to_string(),
            Field::Bool(b) => b.to_string(),
            Field::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Num(v) if v.is_finite() => Value::from(*v),
            Field::Num(v) => Value::from(fmt_num(*v)),
            Field::Int(v) => Value::from(*v),
            Field::Bool(b) => Value::from(*b),
            Field::Text(s) => Value::from(s.as_str()),
        }
    }
}

/// Shortest round-trip decimal; `inf`, `-inf` and `nan` spelled out.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    fields: Vec<(String, Field)>,
    tables: Vec<(String, Table)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Report {
    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.fields.push((key.into(), Field::Num(v)));
        self
    }

    pub fn int(&mut self, key: &str, v: u64) -> &mut Self {
        self.fields.push((key.into(), Field::Int(v)));
        self
    }

    pub fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        self.fields.push((key.into(), Field::Bool(v)));
        self
    }

    pub fn text(&mut self, key: &str, v: impl Into<String>) -> &mut Self {
        self.fields.push((key.into(), Field::Text(v.into())));
        self
    }

    pub fn table(&mut self, key: &str, table: Table) -> &mut Self {
        self.tables.push((key.into(), table));
        self
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Text => self.render_text(),
            OutputFormat::Json => self.render_json(),
            OutputFormat::Csv => self.render_csv(),
        }
    }

    fn render_text(&self) -> String {
        let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.fields {
            out.push_str(&format!("{k:<width$}  {}\n", v.plain()));
        }
        for (name, t) in &self.tables {
            out.push_str(&format!("\n[{name}]\n"));
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(Field::plain).collect()).collect();
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|c| cells.iter().map(|r| r[c].len()).chain([t.columns[c].len()]).max().unwrap_or(0))
                .collect();
            let line = |row: &[String]| {
                let padded: Vec<String> = row.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
                padded.join("  ").trim_end().to_string() + "\n"
            };
            out.push_str(&line(&t.columns));
            for r in &cells {
                out.push_str(&line(r));
            }
        }
        out
    }

    fn render_json(&self) -> String {
        let mut obj = Map::new();
        for (k, v) in &self.fields {
            obj.insert(k.clone(), v.json());
        }
        for (name, t) in &self.tables {
            let rows: Vec<Value> = t
                .rows
                .iter()
                .map(|r| {
                    let mut row = Map::new();
                    for (c, v) in t.columns.iter().zip(r) {
                        row.insert(c.clone(), v.json());
                    }
                    Value::Object(row)
                })
                .collect();
            obj.insert(name.clone(), Value::Array(rows));
        }
        serde_json::to_string_pretty(&Value::Object(obj)).expect("report values serialize") + "\n"
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        if !self.fields.is_empty() {
            out.push_str("field,value\n");
            for (k, v) in &self.fields {
                out.push_str(&format!("{k},{}\n", csv_cell(&v.plain())));
            }
        }
        for (_, t) in &self.tables {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&t.render_csv());
        }
        out
    }
}

impl Table {
    pub fn render_csv(&self) -> String {
        let mut out = self.columns.join(",") + "\n";
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|f| csv_cell(&f.plain())).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
