//! Context-free part-of-speech tagging over lemmas.
//!
//! Only the three content-word classes matter downstream, so every lemma is
//! mapped to NOUN, VERB, ADJ or OTHER. The bundled lexicon is generated from
//! WordNet 3.0 by `scripts/gen_pos_lexicon.py`; candidate tags are ordered
//! by tagged-sense frequency, most frequent first.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::Token;

pub const BUNDLED_LEXICON: &str = include_str!("../data/pos_lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    #[default]
    Other,
}

impl PosTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Other => "OTHER",
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "NOUN" => Ok(PosTag::Noun),
            "VERB" => Ok(PosTag::Verb),
            "ADJ" => Ok(PosTag::Adj),
            "OTHER" => Ok(PosTag::Other),
            other => Err(format!("unknown tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PosLexicon {
    entries: HashMap<String, Vec<PosTag>>,
}

impl PosLexicon {
    /// Parse `lemma<TAB>TAG[,TAG...]` lines. Blank lines and `#` comments
    /// are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lemma, tags) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(idx + 1, "expected lemma<TAB>tags"))?;
            let tags = tags
                .split(',')
                .map(|t| t.parse::<PosTag>().map_err(|m| Error::parse(idx + 1, m)))
                .collect::<Result<Vec<_>>>()?;
            if lemma.is_empty() || tags.is_empty() {
                return Err(Error::parse(idx + 1, "empty lemma or tag list"));
            }
            entries.insert(lemma.to_string(), tags);
        }
        if entries.is_empty() {
            return Err(Error::InvalidInput("lexicon is empty".into()));
        }
        Ok(PosLexicon { entries })
    }

    /// The frozen lexicon shipped with the crate.
    pub fn bundled() -> &'static PosLexicon {
        static LEXICON: OnceLock<PosLexicon> = OnceLock::new();
        LEXICON.get_or_init(|| PosLexicon::parse(BUNDLED_LEXICON).expect("bundled lexicon parses"))
    }

    pub fn candidates(&self, lemma: &str) -> Option<&[PosTag]> {
        self.entries.get(lemma).map(Vec::as_slice)
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.entries.contains_key(lemma)
    }

    pub fn has_tag(&self, lemma: &str, tag: PosTag) -> bool {
        self.candidates(lemma).is_some_and(|t| t.contains(&tag))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tag for a single lemma: lexicon first, then suffix heuristics.
    pub fn tag_lemma(&self, lemma: &str) -> PosTag {
        if let Some(tags) = self.candidates(lemma) {
            return tags[0];
        }
        suffix_tag(lemma)
    }
}

const SUFFIXES: &[(&str, PosTag)] = &[
    ("ness", PosTag::Noun),
    ("tion", PosTag::Noun),
    ("ment", PosTag::Noun),
    ("ity", PosTag::Noun),
    ("ize", PosTag::Verb),
    ("ify", PosTag::Verb),
    ("ous", PosTag::Adj),
    ("ful", PosTag::Adj),
    ("able", PosTag::Adj),
    ("ive", PosTag::Adj),
];

fn suffix_tag(lemma: &str) -> PosTag {
    SUFFIXES
        .iter()
        .find(|(s, _)| lemma.len() > s.len() && lemma.ends_with(s))
        .map_or(PosTag::Other, |&(_, t)| t)
}

/// Set `pos` on every token from its lemma.
pub fn tag(tokens: &[Token], lexicon: &PosLexicon) -> Vec<Token> {
    tokens
        .iter()
        .map(|t| Token {
            pos: lexicon.tag_lemma(&t.lemma),
            ..t.clone()
        })
        .collect()
}
