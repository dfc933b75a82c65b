//! Atomic output files. Each file is written to a temporary sibling and
//! renamed into place; if a command fails, every file it already produced is
//! removed again.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

#[derive(Debug)]
pub struct Written {
    pub path: PathBuf,
    pub sha256: String,
    /// False for files holding wall-clock measurements.
    pub deterministic: bool,
}

/// Files produced by one command. Dropping an uncommitted set deletes them.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    written: Vec<Written>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutputSet {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` through `fill` and moves it into place.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<&Written>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        self.write_inner(name, true, fill)
    }

    /// Like [`write`](Self::write) for files whose content varies run to run.
    pub fn write_timing<F>(&mut self, name: &str, fill: F) -> Result<&Written>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        self.write_inner(name, false, fill)
    }

    fn write_inner<F>(&mut self, name: &str, deterministic: bool, fill: F) -> Result<&Written>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.dir.join(name);
        let tmp = NamedTempFile::new_in(&self.dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            fill(&mut w).with_context(|| format!("writing {name}"))?;
            w.flush()?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(&path).with_context(|| format!("moving {name} into place"))?;
        let sha256 = file_sha256(&path)?;
        self.written.push(Written {
            path,
            sha256,
            deterministic,
        });
        Ok(self.written.last().expect("just pushed"))
    }

    /// Keeps the files and returns what was written.
    pub fn commit(mut self) -> Vec<Written> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for w in &self.written {
                let _ = fs::remove_file(&w.path);
            }
        }
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_command_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut out = OutputSet::new(dir.path()).unwrap();
            out.write("a.txt", |w| Ok(w.write_all(b"hello")?)).unwrap();
            assert!(out.write("b.txt", |_| anyhow::bail!("boom")).is_err());
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn committed_files_stay_with_digest() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(dir.path()).unwrap();
        out.write("a.txt", |w| Ok(w.write_all(b"abc")?)).unwrap();
        let files = out.commit();
        assert_eq!(
            files[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(fs::read(dir.path().join("a.txt")).unwrap(), b"abc");
    }
}
