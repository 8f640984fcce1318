use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Columns read from a CSV file with a header row.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| CliError::data(path, e.to_string()))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::data(path, e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                CliError::data(path, format!("line {line}: {e}"))
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    CliError::data(
                        path,
                        format!("line {line}: column '{}' holds '{field}', not a number", headers[j]),
                    )
                })?;
                columns[j].push(v);
            }
        }
        if columns.first().map_or(true, Vec::is_empty) {
            return Err(CliError::data(path, "no data rows"));
        }
        Ok(Table {
            path: path.to_owned(),
            headers,
            columns,
        })
    }

    pub fn has(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }

    pub fn column(&self, name: &str) -> CliResult<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|j| self.columns[j].as_slice())
            .ok_or_else(|| {
                CliError::data(
                    &self.path,
                    format!("missing column '{name}' (found: {})", self.headers.join(", ")),
                )
            })
    }

    /// Power in watts, read from `power_dbm` when `dbm` is set and from
    /// `power_w` otherwise.
    pub fn power_w(&self, dbm: bool) -> CliResult<Vec<f64>> {
        if dbm {
            Ok(self.column("power_dbm")?.iter().map(|&p| dbm_to_watt(p)).collect())
        } else {
            Ok(self.column("power_w")?.to_vec())
        }
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Formats a float so that equal values always give equal text.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

/// CSV text built row by row and written in one go.
pub struct CsvOut {
    text: String,
    width: usize,
}

impl CsvOut {
    pub fn new(headers: &[&str]) -> Self {
        CsvOut {
            text: format!("{}\n", headers.join(",")),
            width: headers.len(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.width);
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Collects the files a command writes into its output directory.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_owned(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        self.written.push(FileDigest {
            path: name.to_owned(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("json serialization");
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json` last, listing every file written before it.
    pub fn finish(mut self, run: &RunInfo<'_>) -> CliResult<()> {
        let config_toml = run.config.to_toml();
        self.write("config.toml", &config_toml)?;
        let mut inputs = Vec::new();
        if let Some(p) = run.config_path {
            inputs.push(digest_file(p)?);
        }
        for p in run.data {
            inputs.push(digest_file(p)?);
        }
        let manifest = Manifest {
            command: run.command.clone(),
            version: env!("CARGO_PKG_VERSION"),
            seed: run.seed,
            config: run.config,
            inputs,
            outputs: std::mem::take(&mut self.written),
            extra: run.extra.clone(),
        };
        self.write_json("manifest.json", &manifest)
    }
}

fn digest_file(path: &Path) -> CliResult<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

pub struct RunInfo<'a> {
    pub command: Vec<String>,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub config_path: Option<&'a Path>,
    pub data: &'a [PathBuf],
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: Vec<String>,
    version: &'static str,
    seed: u64,
    config: &'a RunConfig,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    extra: BTreeMap<String, serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_csv(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn reads_columns_by_name() {
        let (_d, p) = temp_csv("time_s, power_w\n0,1\n1,0.5\n");
        let t = Table::read(&p).unwrap();
        assert_eq!(t.column("power_w").unwrap(), &[1.0, 0.5]);
    }

    #[test]
    fn missing_column_is_named() {
        let (_d, p) = temp_csv("time_s,power_w\n0,1\n");
        let msg = Table::read(&p).unwrap().column("photons").unwrap_err().to_string();
        assert!(msg.contains("photons"), "{msg}");
    }

    #[test]
    fn bad_number_cites_line() {
        let (_d, p) = temp_csv("time_s,power_w\n0,1\n1,abc\n");
        let msg = Table::read(&p).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn ragged_row_cites_line() {
        let (_d, p) = temp_csv("time_s,power_w\n0,1\n1\n");
        let msg = Table::read(&p).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watt(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watt(-30.0) - 1e-6).abs() < 1e-20);
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, 1e17, 2.86e-7, -3.25, 1.0 / 3.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
