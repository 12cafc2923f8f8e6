//! CSV writers with optional JSON mirrors.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub struct Emitter {
    out_dir: PathBuf,
    pub json: bool,
}

impl Emitter {
    pub fn new(out_dir: &Path, json: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| CliError::data(format!("creating {}: {e}", out_dir.display())))?;
        Ok(Emitter {
            out_dir: out_dir.to_path_buf(),
            json,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Writes `name` as CSV and, when JSON output is on, mirrors it as an
    /// array of objects under the same stem.
    pub fn table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut text = String::new();
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        write_file(&path, text.as_bytes())?;

        if self.json {
            let objects: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let map: serde_json::Map<String, serde_json::Value> = header
                        .iter()
                        .zip(row)
                        .map(|(&key, value)| {
                            let parsed = value
                                .parse::<f64>()
                                .ok()
                                .filter(|v| v.is_finite())
                                .and_then(serde_json::Number::from_f64)
                                .map(serde_json::Value::Number)
                                .unwrap_or_else(|| serde_json::Value::String(value.clone()));
                            (key.to_string(), parsed)
                        })
                        .collect();
                    serde_json::Value::Object(map)
                })
                .collect();
            let json_path = path.with_extension("json");
            let text = serde_json::to_string_pretty(&objects)
                .map_err(|e| CliError::data(e.to_string()))?;
            write_file(&json_path, text.as_bytes())?;
        }
        Ok(path)
    }

    /// Serializes the resolved configuration as TOML next to the outputs.
    pub fn resolved_config<T: serde::Serialize>(
        &self,
        command: &str,
        config: &T,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(&format!("{command}_config.toml"));
        let text = toml::to_string_pretty(config)
            .map_err(|e| CliError::data(format!("serializing config: {e}")))?;
        write_file(&path, text.as_bytes())?;
        Ok(path)
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::data(format!("creating {}: {e}", path.display())))?;
    file.write_all(bytes)
        .and_then(|_| file.flush())
        .map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))
}
