//! On-disk layout shared by the stages.
//!
//! ```text
//! <out>/pairs/<id>.jpg, <id>.wav, index.tsv
//! <out>/extract_summary.toml
//! <out>/captions.tsv, caption_drops.tsv
//! <out>/shards/shard_NNNNN.zip, manifest.toml
//! <out>/reports/words.toml, amplitude.pgm, amplitude.toml, adi.toml
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// One line of the pair index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub id: u64,
    pub video_id: String,
    pub fragment_index: usize,
    pub window_index: usize,
    pub start_sample: u64,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn pairs_dir(&self) -> PathBuf {
        self.root.join("pairs")
    }

    pub fn index(&self) -> PathBuf {
        self.pairs_dir().join("index.tsv")
    }

    pub fn image(&self, id: u64) -> PathBuf {
        self.pairs_dir().join(format!("{id}.jpg"))
    }

    pub fn wav(&self, id: u64) -> PathBuf {
        self.pairs_dir().join(format!("{id}.wav"))
    }

    pub fn extract_summary(&self) -> PathBuf {
        self.root.join("extract_summary.toml")
    }

    pub fn captions(&self) -> PathBuf {
        self.root.join("captions.tsv")
    }

    pub fn caption_drops(&self) -> PathBuf {
        self.root.join("caption_drops.tsv")
    }

    pub fn shards_dir(&self) -> PathBuf {
        self.root.join("shards")
    }

    pub fn manifest(&self) -> PathBuf {
        self.shards_dir().join("manifest.toml")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn require(&self, path: &Path) -> Result<(), CliError> {
        if path.exists() {
            Ok(())
        } else {
            Err(CliError::MissingStore(path.to_path_buf()))
        }
    }

    pub fn read_index(&self) -> Result<Vec<IndexEntry>, CliError> {
        let path = self.index();
        self.require(&path)?;
        let text = fs::read_to_string(&path)?;
        let bad =
            |n: usize| CliError::Usage(format!("{}: malformed line {}", path.display(), n + 1));
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad(n));
            }
            out.push(IndexEntry {
                id: f[0].parse().map_err(|_| bad(n))?,
                video_id: f[1].to_string(),
                fragment_index: f[2].parse().map_err(|_| bad(n))?,
                window_index: f[3].parse().map_err(|_| bad(n))?,
                start_sample: f[4].parse().map_err(|_| bad(n))?,
            });
        }
        Ok(out)
    }

    pub fn write_index(&self, entries: &[IndexEntry]) -> Result<(), CliError> {
        let mut text = String::from("id\tvideo_id\tfragment\twindow\tstart_sample\n");
        for e in entries {
            let _ = writeln!(
                text,
                "{}\t{}\t{}\t{}\t{}",
                e.id, e.video_id, e.fragment_index, e.window_index, e.start_sample
            );
        }
        fs::write(self.index(), text)?;
        Ok(())
    }

    /// `(id, text)` rows of a two-column tab-separated file with a header.
    pub fn read_tsv(&self, path: &Path) -> Result<Vec<(u64, String)>, CliError> {
        self.require(path)?;
        let text = fs::read_to_string(path)?;
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            let (id, rest) = line.split_once('\t').ok_or_else(|| {
                CliError::Usage(format!("{}: malformed line {}", path.display(), n + 1))
            })?;
            let id = id.parse().map_err(|_| {
                CliError::Usage(format!("{}: bad id on line {}", path.display(), n + 1))
            })?;
            out.push((id, rest.to_string()));
        }
        Ok(out)
    }

    pub fn write_tsv(
        &self,
        path: &Path,
        header: &str,
        rows: &[(u64, String)],
    ) -> Result<(), CliError> {
        let mut text = format!("id\t{header}\n");
        for (id, value) in rows {
            // values are single-line by construction; flatten defensively
            let value = value.replace(['\t', '\n', '\r'], " ");
            let _ = writeln!(text, "{id}\t{value}");
        }
        fs::write(path, text)?;
        Ok(())
    }
}

/// Removes `dir` if present and recreates it empty.
pub fn reset_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    Ok(())
}
