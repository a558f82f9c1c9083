use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::CliError;

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Run record written next to every set of outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub run: RunConfig,
    pub outputs: Vec<String>,
    /// Wall-clock timings; the only field that differs between identical runs.
    pub timings_ms: BTreeMap<String, f64>,
}

/// In-memory CSV table; the first line names the schema.
pub struct CsvTable {
    name: &'static str,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new(name: &'static str, header: &[&str]) -> Self {
        let mut buf = Vec::new();
        let _ = writeln!(buf, "# schema: amloc.{name}.v{CSV_SCHEMA_VERSION}");
        let mut writer = csv::Writer::from_writer(buf);
        let _ = writer.write_record(header);
        Self { name, writer }
    }

    pub fn row(&mut self, fields: &[String]) {
        // writing into a Vec cannot fail
        let _ = self.writer.write_record(fields);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn into_text(self) -> String {
        let bytes = self.writer.into_inner().unwrap_or_default();
        String::from_utf8(bytes).unwrap_or_default()
    }
}

/// Shortest round-trip representation, always with a decimal point.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Files produced by a command, written together at the end.
#[derive(Default)]
pub struct OutputSet {
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn add_csv(&mut self, table: CsvTable) {
        let name = table.file_name();
        self.files.push((name, table.into_text()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.files.push((name.to_string(), text));
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn write_all(
        self,
        dir: &Path,
        run: &RunConfig,
        timings_ms: BTreeMap<String, f64>,
    ) -> Result<Vec<String>, CliError> {
        let mut names = self.names();
        names.push(MANIFEST_FILE.to_string());
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text)
                .map_err(|e| CliError::Io(format!("{}: {e}", dir.join(name).display())))?;
        }
        let manifest = Manifest {
            tool: "amloc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            run: run.clone(),
            outputs: self.names(),
            timings_ms,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(names)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io(format!("output directory {} does not exist", dir.display())))
    }
}
