use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

/// A numeric table with an ordered metadata header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            meta: Vec::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Serializes the table. Floats use 17 significant digits in CSV and the
/// shortest round-tripping form in JSON.
pub fn render(table: &Table, format: super::Format) -> String {
    match format {
        super::Format::Csv => render_csv(table),
        super::Format::Json => render_json(table),
    }
}

fn render_csv(table: &Table) -> String {
    let mut s = String::new();
    for (k, v) in &table.meta {
        // header values never span lines
        let _ = writeln!(s, "# {k} = {}", v.replace('\n', " "));
    }
    let _ = writeln!(s, "# columns = {}", table.columns.join(","));
    for row in &table.rows {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn render_json(table: &Table) -> String {
    let meta: Map<String, Value> = table
        .meta
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
        .collect();
    let doc = json!({
        "meta": meta,
        "columns": table.columns,
        "rows": table.rows,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("table is serializable");
    s.push('\n');
    s
}

/// Writes to `path`, or stdout when `None`.
pub fn emit(table: &Table, format: super::Format, path: Option<&Path>) -> io::Result<()> {
    let text = render(table, format);
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::Format;

    fn sample() -> Table {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.meta("mode", "ideal");
        t.push_row(vec![0.1, -1.0 / 3.0]);
        t.push_row(vec![1e-300, 2.0]);
        t
    }

    #[test]
    fn csv_layout() {
        let s = render(&sample(), Format::Csv);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# mode = ideal");
        assert_eq!(lines[1], "# columns = a,b");
        assert_eq!(lines[2], "1.0000000000000001e-1,-3.3333333333333331e-1");
        let back: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, -1.0 / 3.0);
    }

    #[test]
    fn json_round_trip() {
        let s = render(&sample(), Format::Json);
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["rows"][0][1].as_f64().unwrap(), -1.0 / 3.0);
        assert_eq!(v["rows"][1][0].as_f64().unwrap(), 1e-300);
        assert_eq!(v["meta"]["mode"], "ideal");
    }
}
