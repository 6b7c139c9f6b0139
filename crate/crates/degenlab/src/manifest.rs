//! Run manifest: one SHA-256 line per emitted artifact plus a trailing
//! timestamp line. Everything except the timestamp line is deterministic
//! for a fixed config and seed.

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

pub fn file_sha256(path: &Path) -> io::Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes `manifest.txt` in `dir`, listing the given files (names relative
/// to `dir`) in sorted order.
pub fn write_manifest(dir: &Path, files: &[String]) -> io::Result<()> {
    let mut names: Vec<&String> = files.iter().collect();
    names.sort();
    let mut out = String::new();
    for name in names {
        let hash = file_sha256(&dir.join(name))?;
        out.push_str(&format!("{hash}  {name}\n"));
    }
    let ts = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    out.push_str(&format!("timestamp = {ts}\n"));
    fs::write(dir.join("manifest.txt"), out)
}

/// Manifest body with the timestamp line stripped, for determinism checks.
pub fn manifest_body(dir: &Path) -> io::Result<String> {
    let text = fs::read_to_string(dir.join("manifest.txt"))?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with("timestamp"))
        .collect::<Vec<_>>()
        .join("\n"))
}
