//! All-or-nothing output: every file is staged next to its destination and
//! only renamed into place once all of them were written.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tempfile::{Builder, NamedTempFile, TempDir};

const STAGING_PREFIX: &str = ".catafinger-";

/// Staged files are created private; published ones get ordinary modes.
#[cfg(unix)]
fn publish_mode(path: &Path, mode: u32) -> std::io::Result<()> {
    use std::os::unix::fs::PermissionsExt;
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(mode))
}

#[cfg(not(unix))]
fn publish_mode(_: &Path, _: u32) -> std::io::Result<()> {
    Ok(())
}

fn parent_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Write `files` so that either all of them appear or none do.
pub fn write_files(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged: Vec<(NamedTempFile, &Path)> = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = parent_of(path);
        let mut tmp = Builder::new()
            .prefix(STAGING_PREFIX)
            .tempfile_in(dir)
            .with_context(|| format!("cannot create a file in {}", dir.display()))?;
        tmp.write_all(bytes).with_context(|| format!("writing {}", path.display()))?;
        tmp.as_file().sync_all().with_context(|| format!("writing {}", path.display()))?;
        publish_mode(tmp.path(), 0o644).with_context(|| format!("writing {}", path.display()))?;
        staged.push((tmp, path));
    }
    // Dropping an unpersisted NamedTempFile removes it, so an early
    // return above leaves nothing behind.
    for (tmp, path) in staged {
        tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    }
    Ok(())
}

/// Build a directory under a temporary name and rename it to `dir`.
/// Refuses to replace an existing path.
pub fn write_dir(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if dir.exists() {
        bail!("{} already exists", dir.display());
    }
    let parent = parent_of(dir);
    let staging: TempDir = Builder::new()
        .prefix(STAGING_PREFIX)
        .tempdir_in(parent)
        .with_context(|| format!("cannot create a directory in {}", parent.display()))?;
    fill(staging.path())?;
    publish_mode(staging.path(), 0o755).with_context(|| format!("writing {}", dir.display()))?;
    let path = staging.keep();
    std::fs::rename(&path, dir).map_err(|e| {
        let _ = std::fs::remove_dir_all(&path);
        anyhow::Error::new(e).context(format!("renaming into {}", dir.display()))
    })
}

/// `prefix` with `suffix` appended to its final component.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
