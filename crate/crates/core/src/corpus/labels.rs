//! Saliency labels for a corpus and their on-disk cache.
//!
//! Label file format (UTF-8, one record per line):
//!
//! ```text
//! currsum-labels 1
//! corpus <sha256 hex of the corpus content>
//! <id>\t<score> <score> …
//! ```
//!
//! Scores use shortest round-trip exponent formatting, so a file read back
//! reproduces the labels bit for bit.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{corpus_hash, Example};
use crate::error::{Error, Result};
use crate::textmetrics::{relative_importance, SaliencyLabels, TokenSeq};

const HEADER: &str = "currsum-labels 1";

#[derive(Clone, Debug, PartialEq)]
pub struct LabelSet {
    pub corpus_hash: String,
    /// Labels in corpus order, keyed by example id.
    pub labels: Vec<(String, SaliencyLabels)>,
    /// Examples without any extractable source sentence.
    pub skipped: Vec<String>,
}

impl LabelSet {
    pub fn get(&self, id: &str) -> Option<&SaliencyLabels> {
        self.labels.iter().find(|(i, _)| i == id).map(|(_, l)| l)
    }
}

/// Relative importance of every source sentence against the summary.
/// Summary terminal punctuation is dropped the same way it is for source
/// sentences.
pub fn label_example(example: &Example) -> Result<SaliencyLabels> {
    let sentences = example.source_sentences();
    let summary = TokenSeq(
        crate::textmetrics::split_sentences(&example.summary)
            .into_iter()
            .flat_map(|s| s.0)
            .collect(),
    );
    relative_importance(&sentences, &summary)
}

pub fn label_corpus(examples: &[Example]) -> LabelSet {
    let results: Vec<_> = examples.par_iter().map(label_example).collect();
    let mut labels = Vec::with_capacity(examples.len());
    let mut skipped = Vec::new();
    for (ex, r) in examples.iter().zip(results) {
        match r {
            Ok(l) => labels.push((ex.id.clone(), l)),
            Err(_) => skipped.push(ex.id.clone()),
        }
    }
    LabelSet {
        corpus_hash: corpus_hash(examples),
        labels,
        skipped,
    }
}

pub fn labels_to_string(set: &LabelSet) -> String {
    let mut out = format!("{HEADER}\ncorpus {}\n", set.corpus_hash);
    for (id, l) in &set.labels {
        let scores: Vec<String> = l.scores.iter().map(|s| format!("{s:e}")).collect();
        out.push_str(&format!("{id}\t{}\n", scores.join(" ")));
    }
    out
}

/// Atomic write: temp file in the same directory, then rename.
pub fn write_labels(set: &LabelSet, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(labels_to_string(set).as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<LabelSet> {
    let text = std::fs::read_to_string(path)?;
    let bad = |m: &str| Error::Corpus(format!("{}: {m}", path.display()));
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(bad("not a label file"));
    }
    let hash = lines
        .next()
        .and_then(|l| l.strip_prefix("corpus "))
        .ok_or_else(|| bad("missing corpus hash"))?
        .to_string();
    let mut labels = Vec::new();
    for line in lines {
        let (id, scores) = line.split_once('\t').ok_or_else(|| bad("malformed row"))?;
        let scores = scores
            .split(' ')
            .map(|s| s.parse::<f64>().map_err(|_| bad("malformed score")))
            .collect::<Result<Vec<_>>>()?;
        labels.push((id.to_string(), SaliencyLabels { scores }));
    }
    Ok(LabelSet {
        corpus_hash: hash,
        labels,
        skipped: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
}

fn cache_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("labels-{hash}.tsv"))
}

/// Labels for `examples`, read from `cache_dir` when a file for the same
/// corpus hash exists, otherwise computed and cached.
pub fn cached_labels(examples: &[Example], cache_dir: &Path) -> Result<(LabelSet, CacheStatus)> {
    let hash = corpus_hash(examples);
    let path = cache_path(cache_dir, &hash);
    if path.exists() {
        if let Ok(set) = read_labels(&path) {
            if set.corpus_hash == hash {
                return Ok((set, CacheStatus::Hit));
            }
        }
        log::warn!("ignoring unreadable label cache {}", path.display());
    }
    let set = label_corpus(examples);
    std::fs::create_dir_all(cache_dir)?;
    write_labels(&set, &path)?;
    Ok((set, CacheStatus::Miss))
}
