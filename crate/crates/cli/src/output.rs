//! Artifacts, the manifest and the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::error::{io_err, CliError, Result};

pub const MANIFEST: &str = "manifest.json";

/// JSON envelope shared by every job output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobOutput {
    pub kind: String,
    pub name: String,
    pub seed: u64,
    /// Acceptance-level flags; empty when the job passed.
    pub flags: Vec<String>,
    pub summary: BTreeMap<String, serde_json::Value>,
    pub result: serde_json::Value,
}

/// A finished job: its JSON envelope and CSV table.
pub struct JobResult {
    pub stem: String,
    pub output: JobOutput,
    pub csv: String,
}

pub struct Artifact {
    pub file: String,
    pub scenario: String,
    pub seed: u64,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub scenario: String,
    pub seed: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Files for the requested formats, in a fixed order.
pub fn artifacts(results: &[JobResult], formats: &[Format]) -> Result<Vec<Artifact>> {
    let formats: BTreeSet<Format> = formats.iter().copied().collect();
    let mut out = Vec::new();
    for r in results {
        for f in &formats {
            let (file, bytes) = match f {
                Format::Csv => (format!("{}.csv", r.stem), r.csv.clone().into_bytes()),
                Format::Json => (format!("{}.json", r.stem), to_json_bytes(&r.output)?),
            };
            out.push(Artifact { file, scenario: r.output.name.clone(), seed: r.output.seed, bytes });
        }
    }
    Ok(out)
}

/// Files named by an existing manifest, which a new run may replace.
fn previous_outputs(dir: &Path) -> Result<BTreeSet<String>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    Ok(Manifest::load(&path)?.entries.into_iter().map(|e| e.file).collect())
}

/// Writes all artifacts and the manifest. The directory must be new, empty,
/// or hold only the outputs of an earlier run, which are replaced.
pub fn write_outputs(dir: &Path, artifacts: &[Artifact]) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let previous = previous_outputs(dir)?;
    let mut foreign = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name != MANIFEST && !previous.contains(&name) {
            foreign.push(name);
        }
    }
    if !foreign.is_empty() {
        foreign.sort();
        return Err(CliError::OutputDir {
            path: dir.to_path_buf(),
            message: format!("contains files not written by an earlier run: {}", foreign.join(", ")),
        });
    }
    for name in &previous {
        let p = dir.join(name);
        if p.is_file() {
            fs::remove_file(&p).map_err(io_err(&p))?;
        }
    }
    let mut manifest = Manifest::default();
    for a in artifacts {
        let p = dir.join(&a.file);
        fs::write(&p, &a.bytes).map_err(io_err(&p))?;
        manifest.entries.push(ManifestEntry {
            file: a.file.clone(),
            scenario: a.scenario.clone(),
            seed: a.seed,
            sha256: sha256_hex(&a.bytes),
        });
    }
    let p = dir.join(MANIFEST);
    fs::write(&p, to_json_bytes(&manifest)?).map_err(io_err(&p))?;
    Ok(manifest)
}

/// Resolves a manifest path given either the file or its directory.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST)
    } else {
        path.to_path_buf()
    }
}

/// `[A-Za-z0-9_-]` only.
pub fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// FNV-1a, used to derive per-job seed labels from file stems.
pub fn label_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// CSV text from a header and rows, with shortest round-trip floats.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// `{}` formatting of `f64` is the shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.1), "0.1");
    }

    #[test]
    fn csv_layout() {
        let s = csv_table(&["a", "b"], vec![vec![num(0.5), "x".into()]]);
        assert_eq!(s, "a,b\n0.5,x\n");
    }

    #[test]
    fn sanitized_names() {
        assert_eq!(sanitize("ridge λ=0.1"), "ridge___0_1");
    }
}
