//! SHA-256 content manifest of a working directory.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.txt";
pub const CONFIG_ECHO: &str = "config.effective";

fn files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            files(root, &path, out)?;
        } else if path.strip_prefix(root).map_or(false, |p| p != Path::new(MANIFEST)) {
            out.push(path);
        }
    }
    Ok(())
}

/// `sha256  relative/path` for every file under `dir`, sorted by path.
pub fn render(dir: &Path) -> io::Result<String> {
    let mut paths = Vec::new();
    files(dir, dir, &mut paths)?;
    let mut rel: Vec<(String, PathBuf)> = paths
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/"), p))
        .collect();
    rel.sort();
    let mut out = String::new();
    for (name, path) in rel {
        let digest = Sha256::digest(std::fs::read(&path)?);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        writeln!(out, "{hex}  {name}").unwrap();
    }
    Ok(out)
}

pub fn write(dir: &Path) -> io::Result<()> {
    std::fs::write(dir.join(MANIFEST), render(dir)?)
}
