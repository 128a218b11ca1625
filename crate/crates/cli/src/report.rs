use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::table::Table;
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

pub const SPACE_COLUMNS: [&str; 7] = [
    "source",
    "eps",
    "L",
    "strict",
    "capacity",
    "words",
    "words_bound",
];
pub const COMMUNICATION_COLUMNS: [&str; 10] = [
    "source",
    "protocol",
    "n",
    "k",
    "l",
    "eps",
    "trials",
    "error_rate",
    "max_bits",
    "mean_bits",
];

fn field(section: &Value, key: &str) -> Value {
    section.get(key).cloned().unwrap_or(Value::Null)
}

type Mirror = (String, Map<String, Value>);

fn mirrors(dir: &Path) -> Result<Vec<Mirror>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(&text) {
            if obj.get("command").is_some_and(Value::is_string) {
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                out.push((name, obj));
            }
        }
    }
    Ok(out)
}

/// Space and communication tables built from the JSON mirrors in `--input`.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<(&'static str, Table)>, CliError> {
    let dir = cfg.input()?;
    let mut space = Table::new("report space", SPACE_COLUMNS.to_vec());
    let mut comm = Table::new("report communication", COMMUNICATION_COLUMNS.to_vec());
    for (name, obj) in mirrors(&dir)? {
        let command = obj["command"].as_str().unwrap_or_default();
        let params = obj.get("parameters").cloned().unwrap_or(Value::Null);
        let summary = obj.get("summary").cloned().unwrap_or(Value::Null);
        if command == "run turnstile-hh" {
            space.push(vec![
                Value::String(name),
                field(&params, "eps"),
                field(&params, "L"),
                field(&params, "strict"),
                field(&params, "capacity"),
                field(&summary, "words"),
                field(&summary, "words_bound"),
            ]);
        } else if let Some(protocol) = command
            .strip_prefix("protocol ")
            .filter(|p| *p != "clean-sim")
        {
            comm.push(vec![
                Value::String(name),
                Value::String(protocol.to_string()),
                field(&params, "n"),
                field(&params, "k"),
                field(&params, "l"),
                field(&params, "eps"),
                field(&params, "trials"),
                field(&summary, "error_rate"),
                field(&summary, "max_bits"),
                field(&summary, "mean_bits"),
            ]);
        }
    }
    space.param("directory", dir.display().to_string());
    comm.param("directory", dir.display().to_string());
    space.note("rows", space.rows.len());
    comm.note("rows", comm.rows.len());
    Ok(vec![("space.csv", space), ("communication.csv", comm)])
}
