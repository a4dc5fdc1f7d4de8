//! Fixed artifact layout under the working directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Debug, Clone)]
pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workdir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn create(&self) -> Result<()> {
        for dir in [
            self.splits(),
            self.embeddings(),
            self.models(),
            self.committee_dir(),
            self.baselines_dir(),
            self.reports(),
        ] {
            fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        Ok(())
    }

    pub fn resolved_config(&self) -> PathBuf {
        self.root.join("config.resolved.toml")
    }

    pub fn splits(&self) -> PathBuf {
        self.root.join("splits")
    }

    pub fn train_split(&self) -> PathBuf {
        self.splits().join("train.csv")
    }

    pub fn test_split(&self) -> PathBuf {
        self.splits().join("test.csv")
    }

    pub fn split_manifest(&self) -> PathBuf {
        self.splits().join("manifest.json")
    }

    pub fn embeddings(&self) -> PathBuf {
        self.root.join("embeddings")
    }

    pub fn vocabulary(&self) -> PathBuf {
        self.embeddings().join("vocab.tsv")
    }

    pub fn table(&self, dim: usize) -> PathBuf {
        self.embeddings().join(format!("skipgram-d{dim}.bin"))
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn single_model(&self) -> PathBuf {
        self.models().join("single.bin")
    }

    pub fn single_loss(&self) -> PathBuf {
        self.models().join("single-loss.csv")
    }

    pub fn committee_dir(&self) -> PathBuf {
        self.models().join("committee")
    }

    pub fn committee_manifest(&self) -> PathBuf {
        self.committee_dir().join("committee.json")
    }

    /// Member file name, relative to the committee directory.
    pub fn member_file(index: usize) -> PathBuf {
        PathBuf::from(format!("member-{index:03}.bin"))
    }

    pub fn baselines_dir(&self) -> PathBuf {
        self.models().join("baselines")
    }

    pub fn baseline(&self, name: &str) -> PathBuf {
        self.baselines_dir().join(format!("{name}.json"))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn report(&self, name: &str, ext: &str) -> PathBuf {
        self.reports().join(format!("{name}.{ext}"))
    }
}

/// Writes through a sibling temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    let mut f =
        fs::File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
