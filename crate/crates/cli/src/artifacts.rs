//! Output directory bookkeeping. Every file written through [`Artifacts`] is
//! recorded with its SHA-256 so a command can finish with a manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const ARTIFACT_VERSION: &str = concat!("trajspec/", env!("CARGO_PKG_VERSION"));

/// Provenance stamped into every JSON and SVG artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Meta {
    pub artifact_version: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Written {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    meta: Meta,
    written: Mutex<Vec<Written>>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: &'a Meta,
    kind: &'a str,
    data: &'a T,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>, meta: Meta) -> Self {
        Self {
            root: root.into(),
            meta,
            written: Mutex::new(Vec::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn meta(&self) -> &Meta {
        &self.meta
    }

    /// Writes `contents` to `rel` under the root and returns the SHA-256.
    pub fn write(&self, rel: &str, contents: &[u8]) -> io::Result<String> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        let sha256 = sha256_hex(contents);
        self.written.lock().expect("poisoned").push(Written {
            path: rel.to_string(),
            sha256: sha256.clone(),
        });
        Ok(sha256)
    }

    pub fn text(&self, rel: &str, contents: &str) -> io::Result<String> {
        self.write(rel, contents.as_bytes())
    }

    /// Pretty JSON `{meta, kind, data}` with a trailing newline.
    pub fn json<T: Serialize>(&self, rel: &str, kind: &str, data: &T) -> io::Result<String> {
        let envelope = Envelope {
            meta: &self.meta,
            kind,
            data,
        };
        let mut bytes = serde_json::to_vec_pretty(&envelope).map_err(io::Error::other)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    /// Files written so far, sorted by path.
    pub fn written(&self) -> Vec<Written> {
        let mut all = self.written.lock().expect("poisoned").clone();
        all.sort_by(|a, b| a.path.cmp(&b.path));
        all
    }

    /// Writes `rel` listing every file written so far except itself.
    pub fn manifest(&self, rel: &str, command: &str) -> io::Result<String> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            files: Vec<Written>,
        }
        let files = self.written().into_iter().filter(|w| w.path != rel).collect();
        self.json(rel, "manifest", &Manifest { command, files })
    }
}
