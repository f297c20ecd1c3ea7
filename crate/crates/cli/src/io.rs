use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

fn open_error(path: &Path, e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::NotFound {
        CliError::input("input not found", path.display().to_string())
    } else {
        CliError::input("unreadable input", format!("{}: {e}", path.display()))
    }
}

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| open_error(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| open_error(path, e))
}

/// Output file inside `dir`, creating the directory as needed.
pub fn create(dir: &Path, name: &str) -> CliResult<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir).map_err(|e| write_error(dir, e))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| write_error(&path, e))?;
    Ok((path, BufWriter::new(file)))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    let (path, mut w) = create(dir, name)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| write_error(&path, e))?;
    Ok(path)
}

pub fn write_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::input("cannot write output", format!("{}: {e}", path.display()))
}

/// Path inside `dir` that must already exist, else a dependency error.
pub fn require(dir: &Path, name: &str, produced_by: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::dependency(format!(
            "{} not found; run `{produced_by}` first",
            path.display()
        )))
    }
}
