use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::anyhow;
use decompcheck::ingest::sha256_hex;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult, Exit, OrExit};

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let file = std::fs::File::open(path).or_exit(Exit::Data, format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.or_exit(Exit::Data, format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).or_exit(Exit::Data, format!("{}:{}", path.display(), i + 1))?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).expect("records serialize");
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).or_exit(Exit::Data, format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).or_exit(Exit::Data, format!("writing {}", path.display()))
}

pub fn file_hash(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).or_exit(Exit::Data, format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Writes to `out` when given, stdout otherwise.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .or_exit(Exit::Data, "writing to stdout")
        }
    }
}

/// Splits `name=path`; a bare path is named by its file stem.
pub fn named_path(arg: &str) -> CliResult<(String, std::path::PathBuf)> {
    if let Some((name, path)) = arg.split_once('=') {
        if name.is_empty() || path.is_empty() {
            return Err(CliError::usage(anyhow!("expected NAME=PATH, got {arg:?}")));
        }
        return Ok((name.to_string(), path.into()));
    }
    let path = std::path::PathBuf::from(arg);
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::usage(anyhow!("cannot name {arg:?}; use NAME=PATH")))?
        .to_string();
    Ok((name, path))
}
