use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let fail = |e: &dyn std::fmt::Display| CliError::runtime(format!("writing {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| fail(&e))?;
    let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| fail(&e))?;
    tmp.write_all(contents).map_err(|e| fail(&e))?;
    tmp.as_file().sync_all().map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

/// Writes to `path`, or to stdout without one.
pub fn emit(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => write_atomic(p, contents.as_bytes()),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// Parses a JSON file, reporting the offending field path and position.
pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {what} {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            CliError::usage(format!("{what} {}: {inner}", path.display()))
        } else {
            CliError::usage(format!("{what} {}: field `{field}`: {inner}", path.display()))
        }
    })
}

/// Refuses to write over any of the command's own inputs.
pub fn check_not_input(outputs: &[&Path], inputs: &[&Path]) -> CliResult<()> {
    let canon = |p: &Path| fs::canonicalize(p).ok();
    for out in outputs {
        let Some(o) = canon(out) else { continue };
        if inputs.iter().any(|i| canon(i).as_deref() == Some(o.as_path())) {
            return Err(CliError::usage(format!("output {} would overwrite an input file", out.display())));
        }
    }
    Ok(())
}
