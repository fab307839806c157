//! `{id}` file patterns.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const ID: &str = "{id}";

pub fn substitute(pattern: &str, id: &str) -> PathBuf {
    PathBuf::from(pattern.replace(ID, id))
}

/// Frame ids of the files matching `pattern`, sorted. `{id}` must appear
/// exactly once, in the file name.
pub fn discover_ids(pattern: &str) -> Result<Vec<String>, CliError> {
    let path = Path::new(pattern);
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .filter(|n| n.matches(ID).count() == 1 && pattern.matches(ID).count() == 1)
        .ok_or_else(|| CliError::Usage(format!("pattern {pattern:?} needs exactly one {ID} in the file name")))?;
    let (prefix, suffix) = name.split_once(ID).expect("checked above");
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let entries = fs::read_dir(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        let Some(file) = entry.file_name().to_str().map(str::to_owned) else { continue };
        if file.len() > prefix.len() + suffix.len() && file.starts_with(prefix) && file.ends_with(suffix) {
            ids.push(file[prefix.len()..file.len() - suffix.len()].to_owned());
        }
    }
    ids.sort();
    Ok(ids)
}
