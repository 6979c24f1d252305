//! File layout under the data directory.
//!
//! ```text
//! apps.jsonl notes.jsonl reviews.jsonl      ingest
//! note_sentences.jsonl review_sentences.jsonl
//!                                           preprocess, filter-apply
//! models/emnb.json                          filter-train
//! models/skipgram.vecw (+ .meta.json)       embed-train
//! vectors/external.vec1                     embed-import
//! pairs.jsonl match_summary.json            match
//! labels.jsonl                              serve
//! reports/                                  report temporal
//! ```

use std::path::{Path, PathBuf};

use revnote::jsonl;
use revnote::matcher::PairRecord;
use revnote::preprocess::{ReleaseNoteSentence, ReviewSentence};

use crate::user_error;

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn note_sentences(&self) -> PathBuf {
        self.root.join("note_sentences.jsonl")
    }

    pub fn review_sentences(&self) -> PathBuf {
        self.root.join("review_sentences.jsonl")
    }

    pub fn filter_model(&self) -> PathBuf {
        self.root.join("models").join("emnb.json")
    }

    pub fn skipgram_model(&self) -> PathBuf {
        self.root.join("models").join("skipgram.vecw")
    }

    pub fn external_vectors(&self) -> PathBuf {
        self.root.join("vectors").join("external.vec1")
    }

    pub fn pairs(&self) -> PathBuf {
        self.root.join("pairs.jsonl")
    }

    pub fn match_summary(&self) -> PathBuf {
        self.root.join("match_summary.json")
    }

    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.jsonl")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn load_note_sentences(&self) -> anyhow::Result<Vec<ReleaseNoteSentence>> {
        read_required(&self.note_sentences(), "note sentences", "preprocess")
    }

    pub fn load_review_sentences(&self) -> anyhow::Result<Vec<ReviewSentence>> {
        read_required(&self.review_sentences(), "review sentences", "preprocess")
    }

    pub fn load_pairs(&self) -> anyhow::Result<Vec<PairRecord>> {
        read_required(&self.pairs(), "pairs", "match")
    }
}

fn read_required<T: serde::de::DeserializeOwned>(path: &Path, what: &str, producer: &str) -> anyhow::Result<Vec<T>> {
    if !path.exists() {
        return Err(user_error(format!(
            "{what} missing: {} not found (run `revnote {producer}` first)",
            path.display()
        )));
    }
    Ok(jsonl::read_all(path)?)
}
