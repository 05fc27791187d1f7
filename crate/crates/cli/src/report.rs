//! Report files: CSV curves plus one JSON summary per run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub struct Reports {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Reports {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        for row in rows {
            w.serialize(row).map_err(io)?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    pub fn summary<T: Serialize>(&mut self, verb: &str, config: &RunConfig, results: &T) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Summary<'a, T> {
            version: &'a str,
            verb: &'a str,
            config: &'a RunConfig,
            results: &'a T,
        }
        let path = self.dir.join("summary.json");
        let mut w = BufWriter::new(File::create(&path)?);
        let record = Summary { version: wipcrit::VERSION, verb, config, results };
        serde_json::to_writer_pretty(&mut w, &record).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    pub fn into_files(self) -> Vec<PathBuf> {
        self.files
    }
}
