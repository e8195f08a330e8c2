use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::CliError;

/// Writes `contents` to `dir/name` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| CliError::validation(format!("{}: {}", name, e.error)))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::validation(format!("{}: {e}", dir.display())))
}

/// Lines of a run log, echoed to stderr as they are added.
#[derive(Debug, Default)]
pub struct RunLog {
    lines: Vec<String>,
}

impl RunLog {
    pub fn line(&mut self, s: impl Into<String>) {
        let s = s.into();
        eprintln!("{s}");
        self.lines.push(s);
    }

    /// Adds a line without echoing it.
    pub fn record(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    pub fn extend(&mut self, lines: impl IntoIterator<Item = String>) {
        for l in lines {
            self.line(l);
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        write_atomic(dir, "run.log", text.as_bytes())
    }
}
