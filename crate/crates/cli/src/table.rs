use crate::error::CliError;
use serde_json::{Map, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

/// A report: CSV rows plus a summary, mirrored as JSON.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub command: String,
    pub parameters: Map<String, Value>,
    pub summary: Map<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `report.csv` → `report.csv.json`.
pub fn mirror_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

impl Table {
    pub fn new(command: impl Into<String>, columns: Vec<&'static str>) -> Self {
        Table {
            command: command.into(),
            parameters: Map::new(),
            summary: Map::new(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.parameters.insert(key.into(), value.into());
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.into(), value.into());
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| CliError::Format(e.to_string());
        w.write_record(&self.columns).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell)).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    self.columns
                        .iter()
                        .map(|c| c.to_string())
                        .zip(r.iter().cloned())
                        .collect(),
                )
            })
            .collect();
        let mut m = Map::new();
        m.insert("command".into(), Value::String(self.command.clone()));
        m.insert("parameters".into(), Value::Object(self.parameters.clone()));
        m.insert("summary".into(), Value::Object(self.summary.clone()));
        m.insert(
            "columns".into(),
            self.columns
                .iter()
                .map(|c| Value::String(c.to_string()))
                .collect(),
        );
        m.insert("rows".into(), Value::Array(rows));
        Value::Object(m)
    }

    /// CSV to `out` and JSON to its mirror path, or CSV to stdout.
    pub fn emit(&self, out: Option<&Path>) -> Result<(), CliError> {
        match out {
            Some(path) => {
                let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
                self.write_csv(std::io::BufWriter::new(file))?;
                let mirror = mirror_path(path);
                let text = serde_json::to_string_pretty(&self.to_json()).expect("values serialize");
                std::fs::write(&mirror, text + "\n").map_err(|e| CliError::io(&mirror, e))
            }
            None => self.write_csv(std::io::stdout().lock()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_and_json_agree() {
        let mut t = Table::new("demo", vec!["a", "b"]);
        t.push(vec![json!(1), json!("x,y")]);
        t.push(vec![json!(null), json!(true)]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,\"x,y\"\n,true\n");
        assert_eq!(t.to_json()["rows"][0]["b"], json!("x,y"));
        assert_eq!(
            mirror_path(Path::new("r/out.csv")),
            PathBuf::from("r/out.csv.json")
        );
    }
}
