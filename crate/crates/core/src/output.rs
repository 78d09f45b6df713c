//! Result bundles: CSV and JSON artifacts written atomically, plus a
//! manifest of content hashes. Nothing time-dependent is recorded, so equal
//! inputs give byte-identical bundles.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

/// Shortest representation that parses back to the same f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        ryu::Buffer::new().format_finite(x).to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// CSV accumulated in memory.
pub struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Self { w }
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        self.w
            .write_record(fields.into_iter().collect::<Vec<_>>())
            .expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.w.into_inner().expect("in-memory flush")
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

/// Writes via a temporary file in the same directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let target = dir.join(name);
    let io = |source| Error::Io {
        path: target.display().to_string(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(&target).map_err(|e| io(e.error))?;
    Ok(target)
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

/// An in-memory set of output files.
#[derive(Debug, Default)]
pub struct Bundle {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    /// Writes every file, then the manifest. A bundle is complete exactly
    /// when its manifest exists; a stale manifest is removed first.
    pub fn write(&self, dir: &Path, command: &str, config_json: &str, seed: u64) -> Result<Manifest> {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let manifest_path = dir.join(MANIFEST);
        if manifest_path.exists() {
            fs::remove_file(&manifest_path).map_err(|source| Error::Io {
                path: manifest_path.display().to_string(),
                source,
            })?;
        }
        let mut files = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            write_atomic(dir, name, bytes)?;
            files.push(ManifestEntry {
                name: name.clone(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            });
        }
        let manifest = Manifest {
            artifact: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: sha256_hex(config_json.as_bytes()),
            seed,
            files,
        };
        write_atomic(dir, MANIFEST, &json_bytes(&manifest))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e21, 5.0, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(["1".to_string(), fmt_f64(0.5)]);
        assert_eq!(String::from_utf8(c.into_bytes()).unwrap(), "a,b\n1,0.5\n");
    }

    #[test]
    fn bundle_writes_manifest_last_and_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = Bundle::default();
        b.add("x.csv", b"a\n1\n".to_vec());
        let m1 = b.write(dir.path(), "eig", "{}", 0).unwrap();
        let first = fs::read(dir.path().join(MANIFEST)).unwrap();
        let m2 = b.write(dir.path(), "eig", "{}", 0).unwrap();
        let second = fs::read(dir.path().join(MANIFEST)).unwrap();
        assert_eq!(first, second);
        assert_eq!(m1.files[0].sha256, m2.files[0].sha256);
        assert_eq!(m1.files[0].sha256, sha256_hex(b"a\n1\n"));
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(leftovers.len(), 2, "{leftovers:?}");
    }
}
