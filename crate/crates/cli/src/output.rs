//! Config loading, output bookkeeping and the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;
use crate::manifest::{config_hash, RunManifest, MANIFEST_SCHEMA};
use crate::Io;

pub struct Run {
    command: &'static str,
    config: Value,
    config_dir: PathBuf,
    out: PathBuf,
    outputs: Vec<String>,
    started: Instant,
}

/// Parses `text` into `T`, naming the offending field on failure.
pub fn parse_config<T: DeserializeOwned>(text: &str) -> Result<(T, Value), CliError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid JSON: {e}")))?;
    let typed = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::config(e.into_inner())
        } else {
            CliError::config(format!("{path}: {}", e.into_inner()))
        }
    })?;
    Ok((typed, value))
}

impl Run {
    pub fn start<T: DeserializeOwned>(
        command: &'static str,
        io: &Io,
    ) -> Result<(Self, T), CliError> {
        let text = fs::read_to_string(&io.config)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", io.config.display())))?;
        let (typed, config) = parse_config(&text)
            .map_err(|e| e.context(format!("config {}", io.config.display())))?;
        fs::create_dir_all(&io.out)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", io.out.display())))?;
        let config_dir = io
            .config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok((
            Self {
                command,
                config,
                config_dir,
                out: io.out.clone(),
                outputs: Vec::new(),
                started: Instant::now(),
            },
            typed,
        ))
    }

    /// Input paths in the config are relative to the config file.
    pub fn input(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }

    /// Registers an output file and returns its path.
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.output(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_json(&mut self, name: &str, v: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(v).expect("report types serialise");
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        let manifest = RunManifest {
            schema: MANIFEST_SCHEMA,
            command: self.command.to_string(),
            config_hash: config_hash(&self.config),
            config: std::mem::take(&mut self.config),
            out_dir: self.out.display().to_string(),
            outputs: std::mem::take(&mut self.outputs),
            wall_seconds: self.started.elapsed().as_secs_f64(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        text.push('\n');
        let path = self.out.join("manifest.json");
        fs::write(&path, text)
            .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
    }
}

/// CSV text from a header and rows of already formatted fields.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::io(e))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::io(e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(e))?;
    Ok(String::from_utf8(bytes).expect("fields are UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    #[allow(dead_code)]
    struct Inner {
        seed: u64,
    }

    #[derive(Debug, serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    #[allow(dead_code)]
    struct Outer {
        task: Inner,
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_config::<Outer>(r#"{"task": {}}"#).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("task") && msg.contains("seed"), "{msg}");
        assert_eq!(e.exit_code(), 1);
        let e = parse_config::<Outer>(r#"{"task": {"seed": 1, "sed": 2}}"#).unwrap_err();
        assert!(e.to_string().contains("sed"));
        assert_eq!(parse_config::<Outer>("{").unwrap_err().exit_code(), 1);
    }

    #[test]
    fn csv_quotes_when_needed() {
        let t = csv_text(&["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap();
        assert_eq!(t, "a,b\n1,\"x,y\"\n");
    }
}
