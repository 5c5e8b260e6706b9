//! Output directory management: manifests, sample streams, CSV artifacts.

use crate::config::{ExperimentConfig, OutputFormat};
use crate::conservation::ObservableVector;
use crate::error::{Error, Result};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct OutputWriter {
    dir: PathBuf,
    format: OutputFormat,
}

impl OutputWriter {
    pub fn create(dir: &Path, format: OutputFormat) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputWriter { dir: dir.to_path_buf(), format })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn format(&self) -> OutputFormat {
        self.format
    }

    pub fn subdir(&self, name: &str) -> Result<OutputWriter> {
        OutputWriter::create(&self.dir.join(name), self.format)
    }

    pub fn write_text(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(contents.as_bytes())?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Serialize(e.to_string()))?;
        self.write_text(name, &(text + "\n"))
    }

    /// One ObservableVector per line (JSONL) or a CSV with the fixed column
    /// order, per the configured format. Returns the file path.
    pub fn write_samples(&self, base: &str, samples: &[ObservableVector]) -> Result<PathBuf> {
        match self.format {
            OutputFormat::Jsonl => {
                let mut text = String::new();
                for ov in samples {
                    text.push_str(
                        &serde_json::to_string(ov).map_err(|e| Error::Serialize(e.to_string()))?,
                    );
                    text.push('\n');
                }
                self.write_text(&format!("{base}.jsonl"), &text)
            }
            OutputFormat::Csv => {
                let mut text = String::from(ObservableVector::CSV_HEADER);
                text.push('\n');
                for ov in samples {
                    text.push_str(&ov.csv_row());
                    text.push('\n');
                }
                self.write_text(&format!("{base}.csv"), &text)
            }
        }
    }

    pub fn write_csv(&self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    /// Binary field checkpoints, one file per checkpoint in the flat field
    /// record format, plus an index of (step file, time).
    pub fn write_checkpoints(&self, checkpoints: &[(f64, crate::spectral::Field)]) -> Result<()> {
        if checkpoints.is_empty() {
            return Ok(());
        }
        let dir = self.dir.join("checkpoints");
        fs::create_dir_all(&dir)?;
        let mut index = Vec::with_capacity(checkpoints.len());
        for (i, (t, field)) in checkpoints.iter().enumerate() {
            let name = format!("checkpoint_{i:06}.field");
            let mut f = fs::File::create(dir.join(&name))?;
            f.write_all(&field.to_bytes())?;
            index.push(format!("{name},{t}"));
        }
        let mut text = String::from("file,t\n");
        for row in index {
            text.push_str(&row);
            text.push('\n');
        }
        let mut f = fs::File::create(dir.join("index.csv"))?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    /// Manifest = resolved config + provenance; written incomplete at start
    /// and rewritten complete at the end, so interrupted runs are marked.
    pub fn write_manifest(&self, cfg: &ExperimentConfig, completed: bool) -> Result<PathBuf> {
        let mut text = cfg.to_toml_string();
        text.push_str("\n[provenance]\n");
        text.push_str(&format!("fingerprint = \"{}\"\n", cfg.fingerprint()));
        text.push_str(&format!("version = \"{}\"\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("completed = {completed}\n"));
        self.write_text("manifest.toml", &text)
    }
}
