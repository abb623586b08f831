//! CSV emission, atomic file writes and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::constants::CONSTANTS_VERSION;
use crate::error::Result;

/// Lowercase scientific notation with 17 significant digits.
pub fn fmt_sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// In-memory table rendered with `,` separators and `\n` line endings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Companion `.manifest` path of an output file.
pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Vec<(String, String)>,
    pub constants_version: String,
    pub outputs: Vec<PathBuf>,
    pub duration: Duration,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: Vec<(&str, String)>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config: config
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            constants_version: CONSTANTS_VERSION.to_string(),
            outputs: Vec::new(),
            duration: Duration::ZERO,
        }
    }

    /// Run metadata as `#` comment lines followed by the resolved configuration,
    /// so the manifest itself loads as a `--config` file.
    pub fn render(&self) -> String {
        let mut out = format!(
            "# subcommand={}\n# constants={}\n",
            self.subcommand, self.constants_version
        );
        for p in &self.outputs {
            out.push_str(&format!("# output={}\n", p.display()));
        }
        out.push_str(&format!(
            "# duration_s={}\n",
            fmt_sci(self.duration.as_secs_f64())
        ));
        out.push_str(&self.config_text());
        out
    }

    pub fn config_text(&self) -> String {
        self.config
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}
