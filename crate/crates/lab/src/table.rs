use serde::{Deserialize, Serialize};

use crate::VERSION;

/// Hints for a gnuplot script drawn from a curve table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    pub ys: Vec<String>,
    pub xlabel: String,
    pub ylabel: String,
    #[serde(default)]
    pub logx: bool,
    #[serde(default)]
    pub logy: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::F(v) => format!("{v}"),
            Value::I(v) => v.to_string(),
            Value::S(s) => s.clone(),
            Value::B(b) => b.to_string(),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::F(v)
    }
}
impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::I(v as i64)
    }
}
impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::B(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::S(v.to_string())
    }
}
impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::S(v)
    }
}

/// A CSV output with documented columns.
#[derive(Clone, Debug)]
pub struct Table {
    /// File name, e.g. `fig2.csv`.
    pub file: String,
    pub description: String,
    /// (column, meaning)
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<Value>>,
    pub plot: Option<PlotSpec>,
}

/// Schema revision written into every CSV header comment.
pub const SCHEMA_REVISION: u32 = 1;

impl Table {
    pub fn new(file: &str, description: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            file: file.to_string(),
            description: description.to_string(),
            columns: columns.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn from_columns(file: &str, description: &str, columns: Vec<(String, String)>) -> Self {
        Self {
            file: file.to_string(),
            description: description.to_string(),
            columns,
            rows: Vec::new(),
            plot: None,
        }
    }

    pub fn with_plot(mut self, plot: PlotSpec) -> Self {
        self.plot = Some(plot);
        self
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.file);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.0 == name)
    }

    /// CSV bytes: a `#` comment line with artifact version and schema
    /// revision, the header, then the rows.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut out = format!("# explosion-lab {VERSION} schema {SCHEMA_REVISION} {}\n", self.file).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(self.columns.iter().map(|c| c.0.as_str())).expect("in-memory write");
            for row in &self.rows {
                w.write_record(row.iter().map(Value::render)).expect("in-memory write");
            }
            w.flush().expect("in-memory write");
        }
        out
    }
}
