//! Tabular results and their CSV and JSON encodings.

use std::fmt::Write as _;

use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};

/// Version of the column layouts; bumped whenever a schema changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    B(bool),
    /// Absent value: empty in CSV, `null` in JSON.
    Null,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => format_float(*x),
            Cell::U(n) => n.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) if x.is_finite() => Value::from(*x),
            Cell::F(x) => Value::from(format_float(*x)),
            Cell::U(n) => Value::from(*n),
            Cell::S(s) => Value::from(s.clone()),
            Cell::B(b) => Value::from(*b),
            Cell::Null => Value::Null,
        }
    }
}

/// 17 significant digits, enough to reproduce every `f64` exactly.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub schema: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Command-specific header entries, in order.
    pub extra: Vec<(&'static str, Value)>,
}

impl Table {
    pub fn new(schema: &'static str, columns: &[&'static str]) -> Self {
        Self { schema, columns: columns.to_vec(), rows: Vec::new(), extra: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &'static str, value: impl Into<Value>) {
        self.extra.push((key, value.into()));
    }

    fn header(&self, cfg: &RunConfig) -> Vec<(&'static str, Value)> {
        let mut h = vec![
            ("artifact", Value::from("alphapred")),
            ("version", Value::from(env!("CARGO_PKG_VERSION"))),
            ("schema", Value::from(format!("{}/{SCHEMA_VERSION}", self.schema))),
            ("seed", Value::from(cfg.seed)),
            ("config", serde_json::to_value(cfg).expect("config serializes")),
        ];
        h.extend(self.extra.iter().cloned());
        h
    }

    pub fn render(&self, cfg: &RunConfig) -> String {
        match cfg.format {
            Format::Csv => self.to_csv(cfg),
            Format::Json => self.to_json(cfg),
        }
    }

    pub fn to_csv(&self, cfg: &RunConfig) -> String {
        let mut out = String::new();
        for (k, v) in self.header(cfg) {
            let text = match v {
                Value::String(s) => s,
                other => other.to_string(),
            };
            writeln!(out, "# {k}: {text}").unwrap();
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory write");
        out.push_str(std::str::from_utf8(&body).expect("cells are utf-8"));
        out
    }

    pub fn to_json(&self, cfg: &RunConfig) -> String {
        let mut meta = Map::new();
        for (k, v) in self.header(cfg) {
            meta.insert(k.to_string(), v);
        }
        meta.insert("columns".into(), Value::from(self.columns.clone()));
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                Value::Object(obj)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("meta".into(), Value::Object(meta));
        doc.insert("rows".into(), Value::Array(rows));
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("json serializes");
        s.push('\n');
        s
    }
}
