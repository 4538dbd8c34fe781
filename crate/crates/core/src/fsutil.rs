//! Atomic whole-file replacement with an advisory writer lock.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Held while a writer owns `path`; released on drop.
pub struct WriterLock {
    _file: File,
}

/// Takes the advisory lock `<path>.lock`, failing with `WouldBlock` if
/// another writer holds it.
pub fn lock_for_write(path: &Path) -> io::Result<WriterLock> {
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(sibling(path, ".lock"))?;
    match file.try_lock() {
        Ok(()) => Ok(WriterLock { _file: file }),
        Err(fs::TryLockError::WouldBlock) => Err(io::Error::new(
            io::ErrorKind::WouldBlock,
            format!("{} is being written by another process", path.display()),
        )),
        Err(fs::TryLockError::Error(e)) => Err(e),
    }
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
/// Readers holding the old file keep seeing the old contents.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = sibling(path, &format!(".tmp{}", std::process::id()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
