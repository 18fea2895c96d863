//! Atomic file writes: stage into a temp file in the destination directory,
//! then rename. Interrupted runs never leave half-written artifacts.

use std::io::Write;
use std::path::Path;

use crate::CliError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Data(format!("cannot stage write for {}: {e}", path.display())))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.flush())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| CliError::Data(format!("cannot finalize {}: {e}", path.display())))?;
    Ok(())
}

pub fn copy_atomic(from: &Path, to: &Path) -> Result<(), CliError> {
    let bytes = std::fs::read(from)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", from.display())))?;
    write_atomic(to, &bytes)
}
