use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postag::PosTag;
use crate::preprocess::Token;

use super::{VectorStore, WordEmbeddingModel, SKIPGRAM_BACKEND};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Per-POS weights of the sentence average. Defaults to a third each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosWeights {
    pub verb: f64,
    pub noun: f64,
    pub adj: f64,
}

impl Default for PosWeights {
    fn default() -> Self {
        PosWeights {
            verb: 1.0 / 3.0,
            noun: 1.0 / 3.0,
            adj: 1.0 / 3.0,
        }
    }
}

impl PosWeights {
    pub fn new(verb: f64, noun: f64, adj: f64) -> Result<Self> {
        let w = PosWeights { verb, noun, adj };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.verb, self.noun, self.adj];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("POS weights must be non-negative".into()));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidConfig(format!("POS weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn weight(&self, tag: PosTag) -> Option<f64> {
        match tag {
            PosTag::Verb => Some(self.verb),
            PosTag::Noun => Some(self.noun),
            PosTag::Adj => Some(self.adj),
            PosTag::Other => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    Vector(Vec<f64>),
    Unencodable,
}

impl Encoded {
    pub fn into_vector(self) -> Option<Vec<f64>> {
        match self {
            Encoded::Vector(v) => Some(v),
            Encoded::Unencodable => None,
        }
    }
}

const BUCKETS: [PosTag; 3] = [PosTag::Verb, PosTag::Noun, PosTag::Adj];

/// Weighted mean of per-POS mean word vectors. Buckets with no in-vocabulary
/// token are dropped and the remaining weights rescaled to sum to one.
pub fn encode_sentence(model: &WordEmbeddingModel, tokens: &[Token], weights: &PosWeights) -> Encoded {
    let dim = model.dim();
    let mut sums = [vec![0.0f64; dim], vec![0.0f64; dim], vec![0.0f64; dim]];
    let mut counts = [0usize; 3];
    for t in tokens {
        let Some(b) = BUCKETS.iter().position(|&p| p == t.pos) else {
            continue;
        };
        let Some(v) = model.vector(&t.lemma) else {
            continue;
        };
        for (s, &x) in sums[b].iter_mut().zip(v) {
            *s += x as f64;
        }
        counts[b] += 1;
    }
    let total_weight: f64 = (0..3)
        .filter(|&b| counts[b] > 0)
        .map(|b| weights.weight(BUCKETS[b]).unwrap_or(0.0))
        .sum();
    if total_weight <= 0.0 {
        return Encoded::Unencodable;
    }
    let mut out = vec![0.0f64; dim];
    for b in 0..3 {
        if counts[b] == 0 {
            continue;
        }
        let w = weights.weight(BUCKETS[b]).unwrap_or(0.0) / total_weight;
        let n = counts[b] as f64;
        for (o, s) in out.iter_mut().zip(&sums[b]) {
            *o += w * (s / n);
        }
    }
    if out.iter().all(|&x| x == 0.0) {
        return Encoded::Unencodable;
    }
    Encoded::Vector(out)
}

/// Encode many sentences into a `skipgram` store. Unencodable sentences are
/// recorded as excluded rather than stored.
pub fn encode_sentences<'a, I>(model: &WordEmbeddingModel, sentences: I, weights: &PosWeights) -> Result<VectorStore>
where
    I: IntoIterator<Item = (&'a str, &'a [Token])>,
{
    weights.validate()?;
    let items: Vec<(&str, &[Token])> = sentences.into_iter().collect();
    let encoded: Vec<Encoded> = items
        .par_iter()
        .map(|(_, toks)| encode_sentence(model, toks, weights))
        .collect();
    let mut store = VectorStore::new(SKIPGRAM_BACKEND, model.dim());
    for ((id, _), e) in items.into_iter().zip(encoded) {
        match e {
            Encoded::Vector(v) => store.insert(id, &v)?,
            Encoded::Unencodable => store.exclude(id, "unencodable"),
        }
    }
    Ok(store)
}
