//! Output directory handling, the run manifest and exit-code mapping.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pdd_core::{Error, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::Format;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;
pub const EXIT_DATA: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ConfigInvalid(_)
        | Error::InvalidAlpha(_)
        | Error::InvalidK(_)
        | Error::InvalidBand(_)
        | Error::InvalidSpec(_) => EXIT_CONFIG,
        Error::BackendUnavailable { .. } | Error::MalformedResponse(_) | Error::SourceUnavailable(_) => EXIT_BACKEND,
        _ => EXIT_DATA,
    }
}

/// Machine-readable error line for standard error.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    })
    .to_string()
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    toolkit: &'static str,
    version: &'static str,
    subcommand: &'a str,
    seed: u64,
    format: Format,
    config: &'a Map<String, Value>,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

/// State shared by every subcommand: where outputs go and what went into them.
pub struct Run {
    pub subcommand: &'static str,
    pub seed: u64,
    pub format: Format,
    pub quiet: bool,
    out_dir: PathBuf,
    config: Map<String, Value>,
    inputs: BTreeMap<String, String>,
    input_paths: Vec<PathBuf>,
    outputs: BTreeMap<String, String>,
}

impl Run {
    pub fn new(subcommand: &'static str, seed: u64, format: Format, quiet: bool, out_dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
            path: out_dir.clone(),
            source: e,
        })?;
        Ok(Self {
            subcommand,
            seed,
            format,
            quiet,
            out_dir,
            config: Map::new(),
            inputs: BTreeMap::new(),
            input_paths: Vec::new(),
            outputs: BTreeMap::new(),
        })
    }

    /// Records one resolved setting for the manifest.
    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("config values serialize");
        self.config.insert(key.to_string(), v);
    }

    /// Reads an input file and records its hash.
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.note_input(path, &bytes);
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })
    }

    /// Hashes a file that a library routine reads on its own.
    pub fn hash_input(&mut self, path: &Path) -> Result<()> {
        self.read(path).map(drop)
    }

    /// Hashes every regular file directly inside `dir`, in name order.
    pub fn hash_input_dir(&mut self, dir: &Path) -> Result<Vec<PathBuf>> {
        let entries = fs::read_dir(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in &files {
            self.hash_input(f)?;
        }
        Ok(files)
    }

    fn note_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), sha256_hex(bytes));
        self.input_paths
            .push(fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf()));
    }

    /// Writes `name` inside the output directory, refusing to touch an input.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        if let Ok(canonical) = fs::canonicalize(&path) {
            if self.input_paths.contains(&canonical) {
                return Err(Error::ConfigInvalid(format!(
                    "output {} would overwrite an input",
                    path.display()
                )));
            }
        }
        fs::write(&path, bytes).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        if !self.quiet {
            println!("{}", path.display());
        }
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, items: &[T]) -> Result<PathBuf> {
        let text = pdd_core::jsonl::to_jsonl_string(items);
        self.write(name, text.as_bytes())
    }

    pub fn has_outputs(&self) -> bool {
        !self.outputs.is_empty()
    }

    /// Writes `manifest.json` describing this run.
    pub fn finish(self) -> Result<()> {
        let hashes = |m: &BTreeMap<String, String>| {
            m.iter()
                .map(|(path, sha256)| FileHash {
                    path: path.clone(),
                    sha256: sha256.clone(),
                })
                .collect()
        };
        let manifest = Manifest {
            toolkit: "pdd",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            seed: self.seed,
            format: self.format,
            config: &self.config,
            inputs: hashes(&self.inputs),
            outputs: hashes(&self.outputs),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.out_dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?;
        Ok(())
    }
}
