//! Result persistence: atomic writes, a sha256 manifest, CSV and JSON layouts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wkde::deviation::UniformDeviation;

use crate::error::{LabError, Result};
use crate::harness::{fmt_coords, fmt_f64, ExperimentResult, RawTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "manifest.json";
/// Per-invocation facts (worker count, wall clock) kept out of the manifest so the digests
/// depend on the configuration only.
pub const RUN_INFO: &str = "run_info.txt";

/// An output directory collecting the digest of every file written through it.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    entries: BTreeMap<String, ManifestEntry>,
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
        Ok(OutputDir {
            dir,
            entries: BTreeMap::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` atomically and records it in the manifest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir, name, bytes)?;
        self.entries.insert(
            name.to_string(),
            ManifestEntry {
                file: name.to_string(),
                sha256: hex::encode(Sha256::digest(bytes)),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    /// Writes `name` atomically without listing it in the manifest.
    pub fn write_unlisted(&self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir, name, bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn write_table(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::io(&self.dir, e.into_error()))?;
        self.write(name, &bytes)
    }

    /// Writes `manifest.json` listing every recorded file, sorted by name.
    pub fn finish(self) -> Result<Manifest> {
        let manifest = Manifest {
            files: self.entries.into_values().collect(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.dir, MANIFEST, &bytes)?;
        Ok(manifest)
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    let target = dir.join(name);
    fs::write(&tmp, bytes).map_err(|e| LabError::io(&tmp, e))?;
    fs::rename(&tmp, &target).map_err(|e| LabError::io(&target, e))
}

fn raw_as_json(raw: &RawTable) -> Vec<BTreeMap<String, String>> {
    raw.rows
        .iter()
        .map(|row| raw.header.iter().cloned().zip(row.iter().cloned()).collect())
        .collect()
}

/// `quantiles.csv`, `raw.csv` and `summary.csv` and/or `summary.json`, `raw.json`.
pub fn write_experiment(out: &mut OutputDir, res: &ExperimentResult, format: Format) -> Result<()> {
    if format.csv() {
        let header: Vec<String> = ["series", "n", "count", "q10", "q50", "q90"].map(String::from).to_vec();
        let rows: Vec<Vec<String>> = res
            .series
            .iter()
            .flat_map(|s| {
                s.rows.iter().map(move |r| {
                    vec![
                        s.name.clone(),
                        r.n.to_string(),
                        r.count.to_string(),
                        fmt_f64(r.q10),
                        fmt_f64(r.q50),
                        fmt_f64(r.q90),
                    ]
                })
            })
            .collect();
        out.write_table("quantiles.csv", &header, &rows)?;
        out.write_table("raw.csv", &res.raw.header, &res.raw.rows)?;
        let mut summary = vec![
            vec!["experiment".to_string(), res.experiment.clone()],
            vec![
                "outcome".to_string(),
                serde_json::to_value(res.outcome)?.as_str().unwrap_or("").to_string(),
            ],
        ];
        for s in &res.series {
            let slope = s.slope.map(fmt_f64).unwrap_or_else(|| "not-applicable".into());
            summary.push(vec![format!("slope:{}", s.name), slope]);
        }
        for (k, v) in &res.metrics {
            summary.push(vec![k.clone(), fmt_f64(*v)]);
        }
        for c in &res.conditions {
            let verdict = serde_json::to_value(c.verdict)?;
            summary.push(vec![
                format!("condition:{}", c.condition_id),
                verdict.as_str().unwrap_or("").to_string(),
            ]);
        }
        for note in &res.notes {
            summary.push(vec!["note".to_string(), note.clone()]);
        }
        out.write_table("summary.csv", &["key".to_string(), "value".to_string()], &summary)?;
    }
    if format.json() {
        out.write_json("summary.json", res)?;
        out.write_json("raw.json", &raw_as_json(&res.raw))?;
    }
    Ok(())
}

/// The per-bandwidth records of one `Δₙ` computation.
pub fn write_profile(out: &mut OutputDir, dev: &UniformDeviation, format: Format) -> Result<()> {
    if format.csv() {
        let header: Vec<String> = ["n", "h", "sup_weighted_dev", "rescaled", "argsup_coords", "grid_id"]
            .map(String::from)
            .to_vec();
        let rows: Vec<Vec<String>> = dev
            .profile
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    fmt_f64(r.h),
                    fmt_f64(r.sup_weighted_dev),
                    fmt_f64(r.rescaled),
                    fmt_coords(&r.argsup),
                    format!("{:016x}", r.grid_id),
                ]
            })
            .collect();
        out.write_table("profile.csv", &header, &rows)?;
    }
    if format.json() {
        out.write_json("profile.json", dev)?;
    }
    Ok(())
}

/// Reads a manifest back.
pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let bytes = fs::read(&path).map_err(|e| LabError::io(&path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// `error.json` with the error kind, message and exit code.
pub fn write_error(dir: &Path, err: &LabError) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let body = serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    });
    let mut bytes = serde_json::to_vec_pretty(&body)?;
    bytes.push(b'\n');
    write_atomic(dir, "error.json", &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_digests() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        out.write("b.txt", b"beta").unwrap();
        out.write("a.txt", b"").unwrap();
        out.write_unlisted(RUN_INFO, b"workers=3").unwrap();
        let m = out.finish().unwrap();
        assert_eq!(m.files.len(), 2);
        assert_eq!(m.files[0].file, "a.txt");
        assert_eq!(
            m.files[0].sha256,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(read_manifest(tmp.path()).unwrap(), m);
        assert!(!tmp.path().join(".b.txt.tmp").exists());
    }
}
