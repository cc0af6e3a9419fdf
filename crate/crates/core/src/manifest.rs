//! Labelled index of frame-set files.
//!
//! One entry per line, tab separated:
//! `<relative path>\t<class label>\t<repetition>\t<upper|lower>\t<seed>`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RadarPosition {
    /// In front of the lips.
    Upper,
    /// Below the chin.
    Lower,
}

impl fmt::Display for RadarPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RadarPosition::Upper => "upper",
            RadarPosition::Lower => "lower",
        })
    }
}

impl FromStr for RadarPosition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(RadarPosition::Upper),
            "lower" => Ok(RadarPosition::Lower),
            other => Err(Error::Domain(format!("unknown radar position {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
    pub repetition: u32,
    pub position: RadarPosition,
    pub seed: u64,
}

impl ManifestEntry {
    /// Stable identifier used in fold logs.
    pub fn id(&self) -> String {
        format!("{}#{}@{}", self.label, self.repetition, self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("manifest has no entries".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.label.is_empty() || e.label.contains(['\t', '\n']) {
                return Err(Error::Domain(format!("invalid class label {:?}", e.label)));
            }
            if !seen.insert((e.label.as_str(), e.repetition, e.position)) {
                return Err(Error::Domain(format!(
                    "duplicate entry for class {:?} repetition {} at {}",
                    e.label, e.repetition, e.position
                )));
            }
        }
        Ok(CorpusManifest { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct class labels, sorted.
    pub fn classes(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.label.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// `B`, the number of distinct classes.
    pub fn class_count(&self) -> usize {
        self.classes().len()
    }

    /// Repetitions recorded per class when every class has the same count.
    pub fn reps_per_class(&self) -> Option<usize> {
        let classes = self.classes();
        let counts: BTreeSet<usize> = classes
            .iter()
            .map(|c| self.entries.iter().filter(|e| &e.label == c).count())
            .collect();
        (counts.len() == 1).then(|| *counts.iter().next().expect("one count"))
    }

    pub fn positions(&self) -> BTreeSet<RadarPosition> {
        self.entries.iter().map(|e| e.position).collect()
    }

    /// Entries captured at `position`, in manifest order.
    pub fn at_position(&self, position: RadarPosition) -> Result<CorpusManifest> {
        CorpusManifest::new(
            self.entries
                .iter()
                .filter(|e| e.position == position)
                .cloned()
                .collect(),
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = |what: &str| Error::Domain(format!("manifest line {}: {what}", i + 1));
            if fields.len() != 5 {
                return Err(bad(&format!("expected 5 tab-separated fields, got {}", fields.len())));
            }
            entries.push(ManifestEntry {
                path: PathBuf::from(fields[0]),
                label: fields[1].to_string(),
                repetition: fields[2].parse().map_err(|_| bad("repetition is not an integer"))?,
                position: fields[3].parse().map_err(|_| bad("position must be upper or lower"))?,
                seed: fields[4].parse().map_err(|_| bad("seed is not an unsigned integer"))?,
            });
        }
        CorpusManifest::new(entries)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                e.path.display(),
                e.label,
                e.repetition,
                e.position,
                e.seed
            ));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        CorpusManifest::parse(&fs::read_to_string(path)?)
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    /// Same entries in a different order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.entries.len() {
            return Err(Error::Dimension("permutation length differs from manifest".into()));
        }
        CorpusManifest::new(order.iter().map(|&i| self.entries[i].clone()).collect())
    }
}
