use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::lemma::Lemmatizer;
use super::Token;
use crate::postag::{PosLexicon, PosTag};

pub const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizerConfig {
    /// Keep digit-only tokens such as version numbers.
    pub keep_digits: bool,
}

fn bundled_stopwords() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| parse_stopwords(BUNDLED_STOPWORDS))
}

pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Text to lemma stream: lowercase, strip punctuation, digits, non-ASCII
/// symbols and stopwords, then lemmatize.
#[derive(Debug, Clone)]
pub struct Normalizer<'a> {
    stopwords: &'a HashSet<String>,
    lemmatizer: Lemmatizer<'a>,
    config: NormalizerConfig,
}

impl Normalizer<'static> {
    pub fn bundled() -> Self {
        Normalizer::new(PosLexicon::bundled(), NormalizerConfig::default())
    }
}

impl<'a> Normalizer<'a> {
    pub fn new(lexicon: &'a PosLexicon, config: NormalizerConfig) -> Self {
        Normalizer {
            stopwords: bundled_stopwords(),
            lemmatizer: Lemmatizer::new(lexicon),
            config,
        }
    }

    pub fn normalize(&self, text: &str) -> Vec<Token> {
        words(text)
            .into_iter()
            .filter(|w| self.config.keep_digits || !w.bytes().all(|b| b.is_ascii_digit()))
            .filter(|w| !self.stopwords.contains(w))
            .map(|w| {
                let lemma = self.lemmatizer.lemmatize(&w);
                Token {
                    surface: w,
                    lemma,
                    pos: PosTag::Other,
                }
            })
            .collect()
    }
}

/// Normalize with the bundled stopword list, lexicon and default config.
pub fn normalize_tokens(text: &str) -> Vec<Token> {
    Normalizer::bundled().normalize(text)
}

/// Split lowercased text into ASCII alphanumeric words. Apostrophes inside
/// a word are dropped ("don't" -> "dont"). A `#` directly before a word
/// yields the extra word "hashtag". Everything else separates words.
fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = text.chars().peekable();
    let mut prev_alnum = false;
    while let Some(c) = chars.next() {
        let c = match c {
            '\u{2019}' | '\u{2018}' => '\'',
            other => other,
        };
        if c.is_ascii_alphanumeric() {
            cur.push(c.to_ascii_lowercase());
            prev_alnum = true;
            continue;
        }
        let next_alnum = chars.peek().is_some_and(|n| n.is_ascii_alphanumeric());
        if c == '\'' && prev_alnum && next_alnum {
            continue;
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        if c == '#' && next_alnum {
            out.push("hashtag".to_string());
        }
        prev_alnum = false;
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn lemmas(text: &str) -> Vec<String> {
        normalize_tokens(text).into_iter().map(|t| t.lemma).collect()
    }

    #[test]
    fn golden_release_note() {
        let toks = normalize_tokens("Fixed stability issues");
        let l: Vec<&str> = toks.iter().map(|t| t.lemma.as_str()).collect();
        assert_eq!(l, vec!["fix", "stability", "issue"]);
        let s: Vec<&str> = toks.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(s, vec!["fixed", "stability", "issues"]);
        assert!(toks.iter().all(|t| t.pos == PosTag::Other));
    }

    #[test]
    fn all_stopwords() {
        assert!(lemmas("the a of").is_empty());
    }

    #[test]
    fn punctuation_and_digits() {
        assert!(lemmas("!!! 123").is_empty());
        assert_eq!(lemmas("iOS 12 support"), vec!["ios", "support"]);
    }

    #[test]
    fn digits_kept_when_configured() {
        let n = Normalizer::new(PosLexicon::bundled(), NormalizerConfig { keep_digits: true });
        let l: Vec<String> = n.normalize("iOS 12 support").into_iter().map(|t| t.lemma).collect();
        assert_eq!(l, vec!["ios", "12", "support"]);
    }

    #[test]
    fn hashtag_expansion() {
        assert_eq!(lemmas("follow #photography"), vec!["follow", "hashtag", "photography"]);
        assert_eq!(lemmas("# alone"), vec!["alone"]);
    }

    #[test]
    fn emoji_and_contractions() {
        assert_eq!(lemmas("I don\u{2019}t love it \u{1f60d}\u{1f60d} dark-mode"), vec!["love", "dark", "mode"]);
    }

    proptest! {
        #[test]
        fn deterministic_and_lowercase(text in "\\PC{0,60}") {
            let a = normalize_tokens(&text);
            let b = normalize_tokens(&text);
            prop_assert_eq!(&a, &b);
            for t in &a {
                prop_assert!(!t.lemma.is_empty());
                prop_assert_eq!(t.lemma.to_lowercase(), t.lemma.clone());
                prop_assert!(t.lemma.is_ascii());
            }
        }
    }
}
