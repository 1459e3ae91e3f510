use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one run, written last so its presence marks a complete output
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub toolkit_version: String,
    pub config: RunConfig,
    /// sha256 over the resolved config and every input file
    pub input_hash: String,
    pub inputs: Vec<InputRecord>,
    /// paths relative to the output directory, in creation order
    pub files: Vec<String>,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    /// `sha256("blob <len>\0" ++ contents)`
    pub blob_hash: String,
}

pub fn blob_hash(contents: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", contents.len()).as_bytes());
    h.update(contents);
    hex::encode(h.finalize())
}

/// Hash a file, or every file below a directory in sorted order.
pub fn hash_inputs(paths: &[PathBuf]) -> Result<Vec<InputRecord>> {
    let mut files = Vec::new();
    for p in paths {
        collect_files(p, &mut files)?;
    }
    files
        .into_iter()
        .map(|f| {
            let bytes = fs::read(&f).with_context(|| format!("reading input {}", f.display()))?;
            Ok(InputRecord {
                path: f.display().to_string(),
                blob_hash: blob_hash(&bytes),
            })
        })
        .collect()
}

fn collect_files(p: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if p.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(p)
            .with_context(|| format!("listing {}", p.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for e in entries {
            collect_files(&e, out)?;
        }
    } else if p.is_file() {
        out.push(p.to_path_buf());
    } else {
        bail!("input {} does not exist", p.display());
    }
    Ok(())
}

pub fn combined_hash(config: &RunConfig, inputs: &[InputRecord]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config)?);
    for i in inputs {
        h.update(b"\n");
        h.update(i.blob_hash.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

/// Output directory of a run. Every file goes through here so the manifest
/// lists exactly what was written and nothing lands outside the directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Resolve a relative name inside the directory and record it.
    pub fn path(&mut self, name: &str) -> Result<PathBuf> {
        let rel = Path::new(name);
        if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
            bail!("output name `{name}` must stay inside the output directory");
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(path)
    }

    pub fn writer(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name)?;
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(f))
    }

    /// Record files that a library routine wrote below `subdir`.
    pub fn record(&mut self, subdir: &str, names: &[String]) {
        for n in names {
            let name = format!("{subdir}/{n}");
            if !self.files.contains(&name) {
                self.files.push(name);
            }
        }
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Write `manifest.json` through a temporary file and a rename.
    pub fn finish(self, manifest: &RunManifest) -> Result<PathBuf> {
        let tmp = self.root.join(format!(".{MANIFEST_FILE}.tmp"));
        let dest = self.root.join(MANIFEST_FILE);
        {
            let mut w = BufWriter::new(
                File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?,
            );
            serde_json::to_writer_pretty(&mut w, manifest)?;
            writeln!(w)?;
            w.flush()?;
            w.get_ref().sync_all()?;
        }
        fs::rename(&tmp, &dest)
            .with_context(|| format!("renaming manifest into {}", dest.display()))?;
        Ok(dest)
    }
}
