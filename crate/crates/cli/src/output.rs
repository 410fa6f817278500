use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sojourn_core::evolve::Field;
use sojourn_core::io;

use crate::config::Format;
use crate::{CliError, CliResult};

/// Output directory filtered by the selected formats.
pub struct Output {
    dir: PathBuf,
    formats: Vec<Format>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::failure(format!("writing {}: {e}", path.display()))
}

impl Output {
    pub fn create(dir: PathBuf, formats: Vec<Format>) -> CliResult<Output> {
        fs::create_dir_all(&dir).map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output { dir, formats })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn open(&self, name: &str) -> CliResult<(PathBuf, BufWriter<fs::File>)> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        Ok((path, BufWriter::new(file)))
    }

    /// Write through `f` if `format` is selected.
    pub fn with<F>(&self, format: Format, name: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> sojourn_core::Result<()>,
    {
        if !self.wants(format) {
            return Ok(());
        }
        let (path, mut w) = self.open(name)?;
        f(&mut w).map_err(|e| io_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))
    }

    pub fn text(&self, format: Format, name: &str, contents: &str) -> CliResult<()> {
        self.with(format, name, |w| Ok(w.write_all(contents.as_bytes())?))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let s = serde_json::to_string_pretty(value).map_err(|e| CliError::failure(e.to_string()))?;
        self.text(Format::Json, name, &(s + "\n"))
    }

    pub fn svg(&self, name: &str, contents: &str) -> CliResult<()> {
        self.text(Format::Svg, name, contents)
    }

    pub fn field(&self, name: &str, field: &Field) -> CliResult<()> {
        self.with(Format::Field, name, |w| io::write_field(field, w))
    }

    /// Always written, whatever the format selection.
    pub fn manifest(&self, name: &str, contents: &str) -> CliResult<()> {
        let (path, mut w) = self.open(name)?;
        w.write_all(contents.as_bytes()).map_err(|e| io_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))
    }
}
