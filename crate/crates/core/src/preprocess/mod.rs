//! Sentence splitting, token normalization and release-note de-duplication.

mod lemma;
mod normalize;
mod split;

use std::collections::HashSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{ReleaseNote, UserReview};
use crate::error::{Error, Result};
use crate::postag::{self, PosLexicon, PosTag};

pub use lemma::Lemmatizer;
pub use normalize::{normalize_tokens, Normalizer, NormalizerConfig, BUNDLED_STOPWORDS};
pub use split::{split_note_lines, split_review_text};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    #[serde(default)]
    pub pos: PosTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewSentence {
    pub sentence_id: String,
    pub review_id: String,
    pub app_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub posted_at: NaiveDate,
    #[serde(default)]
    pub informative: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseNoteSentence {
    pub sentence_id: String,
    pub note_id: String,
    pub app_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub released_at: NaiveDate,
    pub kept: bool,
}

impl ReviewSentence {
    pub fn lemmas(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.lemma.clone()).collect()
    }
}

impl ReleaseNoteSentence {
    pub fn lemmas(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.lemma.clone()).collect()
    }

    /// De-duplication key: the normalized lemma sequence.
    pub fn key(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.lemma.as_str()).collect()
    }
}

pub fn sentence_id(parent: &str, index: usize) -> String {
    format!("{parent}#{index}")
}

/// Split a review into sentences. A title, when present, is sentence 0.
/// Tokens are left untagged.
pub fn split_review_sentences(review: &UserReview, normalizer: &Normalizer) -> Vec<ReviewSentence> {
    let title = review
        .title
        .as_deref()
        .map(str::trim)
        .filter(|t| !t.is_empty());
    title
        .into_iter()
        .chain(split_review_text(&review.body))
        .enumerate()
        .map(|(i, text)| ReviewSentence {
            sentence_id: sentence_id(&review.review_id, i),
            review_id: review.review_id.clone(),
            app_id: review.app_id.clone(),
            text: text.to_string(),
            tokens: normalizer.normalize(text),
            posted_at: review.posted_at,
            informative: None,
        })
        .collect()
}

/// Split a release note into one sentence per non-empty line. Every
/// sentence starts out kept.
pub fn split_note_sentences(note: &ReleaseNote, normalizer: &Normalizer) -> Vec<ReleaseNoteSentence> {
    split_note_lines(&note.raw_text)
        .into_iter()
        .enumerate()
        .map(|(i, text)| ReleaseNoteSentence {
            sentence_id: sentence_id(&note.note_id, i),
            note_id: note.note_id.clone(),
            app_id: note.app_id.clone(),
            text: text.to_string(),
            tokens: normalizer.normalize(text),
            released_at: note.released_at,
            kept: true,
        })
        .collect()
}

/// Split, normalize and tag one review.
pub fn preprocess_review(
    review: &UserReview,
    normalizer: &Normalizer,
    lexicon: &PosLexicon,
) -> Vec<ReviewSentence> {
    let mut out = split_review_sentences(review, normalizer);
    for s in &mut out {
        s.tokens = postag::tag(&s.tokens, lexicon);
    }
    out
}

/// Split, normalize and tag one release note.
pub fn preprocess_note(
    note: &ReleaseNote,
    normalizer: &Normalizer,
    lexicon: &PosLexicon,
) -> Vec<ReleaseNoteSentence> {
    let mut out = split_note_sentences(note, normalizer);
    for s in &mut out {
        s.tokens = postag::tag(&s.tokens, lexicon);
    }
    out
}

/// Sort note sentences by (release date, note id, position), the order
/// [`dedup_note_sentences`] expects.
pub fn sort_note_sentences(sentences: &mut [ReleaseNoteSentence]) {
    sentences.sort_by(|a, b| {
        (a.released_at, &a.note_id, position(&a.sentence_id)).cmp(&(
            b.released_at,
            &b.note_id,
            position(&b.sentence_id),
        ))
    });
}

fn position(sentence_id: &str) -> usize {
    sentence_id
        .rsplit_once('#')
        .and_then(|(_, p)| p.parse().ok())
        .unwrap_or(0)
}

/// Mark the first occurrence of every normalized key as kept and every later
/// occurrence as dropped. Input must be chronological.
pub fn dedup_note_sentences(mut sentences: Vec<ReleaseNoteSentence>) -> Vec<ReleaseNoteSentence> {
    let mut seen: HashSet<Vec<String>> = HashSet::with_capacity(sentences.len());
    for s in &mut sentences {
        let key: Vec<String> = s.key().into_iter().map(str::to_string).collect();
        s.kept = seen.insert(key);
    }
    sentences
}

/// `1 - unique keys / total sentences`.
pub fn repetition_rate(sentences: &[ReleaseNoteSentence]) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::UndefinedMetric("repetition rate"));
    }
    let unique: HashSet<Vec<&str>> = sentences.iter().map(|s| s.key()).collect();
    Ok(1.0 - unique.len() as f64 / sentences.len() as f64)
}
