//! Skip-gram with negative sampling.
//!
//! With `workers == 1` training is bit-reproducible for a given seed. With
//! more workers the threads update shared weights without locking, so runs
//! differ in the low bits.

use std::cell::Cell;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::jsonl;

use super::vecfile::{read_rows, write_row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub min_count: u64,
    pub learning_rate: f32,
    /// Frequent-word downsampling threshold; 0 keeps every occurrence.
    pub subsample: f64,
    pub seed: u64,
    /// 1 is deterministic; more runs lock-free parallel updates.
    pub workers: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 300,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            min_count: 5,
            learning_rate: 0.025,
            subsample: 1e-3,
            seed: 42,
            workers: 1,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.dim < 2 {
            return bad("dim must be at least 2");
        }
        if self.window == 0 || self.epochs == 0 || self.negative_samples == 0 {
            return bad("window, epochs and negative_samples must be positive");
        }
        if self.min_count == 0 {
            return bad("min_count must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.subsample.is_finite() && self.subsample >= 0.0) {
            return bad("subsample must be non-negative");
        }
        if self.workers == 0 {
            return bad("workers must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingModel {
    pub model_id: String,
    dim: usize,
    vocab: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
    pub train_config: Option<SkipGramConfig>,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    model_id: String,
    dim: usize,
    vocab_size: usize,
    counts: Vec<u64>,
    train_config: Option<SkipGramConfig>,
}

impl WordEmbeddingModel {
    /// Build a model from explicit word vectors, mainly for tests and
    /// externally trained word embeddings.
    pub fn from_vectors(dim: usize, words: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let n = words.len();
        let mut vocab = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * dim);
        for (w, v) in words {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            vocab.push(w);
            vectors.extend(v);
        }
        Self::assemble(dim, vocab, vec![0; n], vectors, None)
    }

    fn assemble(
        dim: usize,
        vocab: Vec<String>,
        counts: Vec<u64>,
        vectors: Vec<f32>,
        train_config: Option<SkipGramConfig>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite word vector".into()));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, w) in vocab.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateId(w.clone()));
            }
        }
        let mut m = WordEmbeddingModel {
            model_id: String::new(),
            dim,
            vocab,
            counts,
            index,
            vectors,
            train_config,
        };
        let mut buf = Vec::new();
        m.write_vectors(&mut buf).expect("write to memory");
        let digest = Sha256::digest(&buf);
        m.model_id = format!("sg-{}", &hex(&digest)[..16]);
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.index.contains_key(lemma)
    }

    pub fn count(&self, lemma: &str) -> Option<u64> {
        self.index.get(lemma).map(|&i| self.counts[i])
    }

    pub fn vector(&self, lemma: &str) -> Option<&[f32]> {
        self.index
            .get(lemma)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Cosine between two in-vocabulary words.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        let a: Vec<f64> = self.vector(a)?.iter().map(|&x| x as f64).collect();
        let b: Vec<f64> = self.vector(b)?.iter().map(|&x| x as f64).collect();
        crate::matcher::cosine(&a, &b).ok()
    }

    fn write_vectors(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "VECW1 {} {}", self.dim, self.vocab.len())?;
        for (i, word) in self.vocab.iter().enumerate() {
            write_row(w, word, self.vectors[i * self.dim..(i + 1) * self.dim].iter())?;
        }
        Ok(())
    }

    fn meta_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    /// Write the `VECW1` vectors to `path` and metadata next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_vectors(&mut buf).map_err(|e| Error::io(path, e))?;
        jsonl::write_bytes_atomic(path, &buf)?;
        let meta = ModelMeta {
            model_id: self.model_id.clone(),
            dim: self.dim,
            vocab_size: self.vocab.len(),
            counts: self.counts.clone(),
            train_config: self.train_config.clone(),
        };
        let mut json = serde_json::to_vec_pretty(&meta).expect("serializable");
        json.push(b'\n');
        jsonl::write_bytes_atomic(&Self::meta_path(path), &json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (dim, rows) = read_rows(BufReader::new(file), "VECW1")?;
        let meta_path = Self::meta_path(path);
        let meta: Option<ModelMeta> = match std::fs::read(&meta_path) {
            Ok(bytes) => Some(serde_json::from_slice(&bytes).map_err(|e| Error::parse(e.line(), e))?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(&meta_path, e)),
        };
        let n = rows.len();
        let mut vocab = Vec::with_capacity(n);
        let mut vectors = Vec::with_capacity(n * dim);
        for (w, v) in rows {
            vocab.push(w);
            vectors.extend(v.into_iter().map(|x| x as f32));
        }
        let (counts, cfg) = match meta {
            Some(m) if m.counts.len() == n && m.dim == dim => (m.counts, m.train_config),
            Some(_) => return Err(Error::InvalidInput("model metadata does not match vectors".into())),
            None => (vec![0; n], None),
        };
        Self::assemble(dim, vocab, counts, vectors, cfg)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Shared weight access, so one training loop serves the single-threaded
/// (`Cell`) and lock-free parallel (`AtomicU32` bit patterns) cases.
trait Weights {
    fn get(&self, i: usize) -> f32;
    fn add(&self, i: usize, delta: f32);
}

impl Weights for [Cell<f32>] {
    #[inline]
    fn get(&self, i: usize) -> f32 {
        self[i].get()
    }
    #[inline]
    fn add(&self, i: usize, delta: f32) {
        self[i].set(self[i].get() + delta);
    }
}

impl Weights for [AtomicU32] {
    #[inline]
    fn get(&self, i: usize) -> f32 {
        f32::from_bits(self[i].load(Ordering::Relaxed))
    }
    #[inline]
    fn add(&self, i: usize, delta: f32) {
        let v = f32::from_bits(self[i].load(Ordering::Relaxed)) + delta;
        self[i].store(v.to_bits(), Ordering::Relaxed);
    }
}

struct Trainer<'a> {
    cfg: &'a SkipGramConfig,
    noise: &'a WeightedIndex<f64>,
    /// Probability of keeping each occurrence of a word.
    keep: &'a [f64],
    total_words: u64,
    processed: &'a AtomicU64,
}

impl Trainer<'_> {
    fn learning_rate(&self) -> f32 {
        let done = self.processed.load(Ordering::Relaxed) as f64 / (self.total_words as f64 + 1.0);
        let lr0 = self.cfg.learning_rate as f64;
        (lr0 * (1.0 - done)).max(lr0 * 1e-4) as f32
    }

    fn run<W: Weights + ?Sized>(&self, input: &W, output: &W, sentences: &[Vec<u32>], rng: &mut ChaCha8Rng) {
        let dim = self.cfg.dim;
        let mut grad = vec![0f32; dim];
        let mut sent = Vec::new();
        for _ in 0..self.cfg.epochs {
            for full in sentences {
                let lr = self.learning_rate();
                sent.clear();
                sent.extend(full.iter().copied().filter(|&w| {
                    let p = self.keep[w as usize];
                    p >= 1.0 || rng.random::<f64>() < p
                }));
                if sent.len() < 2 {
                    self.processed.fetch_add(full.len() as u64, Ordering::Relaxed);
                    continue;
                }
                for (pos, &center) in sent.iter().enumerate() {
                    let reduced = rng.random_range(0..self.cfg.window);
                    let span = self.cfg.window - reduced;
                    let lo = pos.saturating_sub(span);
                    let hi = (pos + span).min(sent.len() - 1);
                    for (cpos, &ctx) in sent.iter().enumerate().take(hi + 1).skip(lo) {
                        if cpos == pos {
                            continue;
                        }
                        let l1 = ctx as usize * dim;
                        grad.iter_mut().for_each(|g| *g = 0.0);
                        for d in 0..=self.cfg.negative_samples {
                            let (target, label) = if d == 0 {
                                (center, 1.0f32)
                            } else {
                                let t = self.noise.sample(rng) as u32;
                                if t == center {
                                    continue;
                                }
                                (t, 0.0)
                            };
                            let l2 = target as usize * dim;
                            let mut f = 0f32;
                            for k in 0..dim {
                                f += input.get(l1 + k) * output.get(l2 + k);
                            }
                            let g = (label - sigmoid(f)) * lr;
                            for (k, gk) in grad.iter_mut().enumerate() {
                                *gk += g * output.get(l2 + k);
                                output.add(l2 + k, g * input.get(l1 + k));
                            }
                        }
                        for (k, gk) in grad.iter().enumerate() {
                            input.add(l1 + k, *gk);
                        }
                    }
                }
                self.processed.fetch_add(full.len() as u64, Ordering::Relaxed);
            }
        }
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    let x = x.clamp(-6.0, 6.0);
    1.0 / (1.0 + (-x).exp())
}

/// Train word vectors on lemma sequences.
///
/// The vocabulary keeps lemmas seen at least `min_count` times, ordered by
/// frequency then lemma. Negatives are drawn from the unigram distribution
/// raised to 0.75.
pub fn train_skipgram<S, T>(sentences: &[S], config: &SkipGramConfig) -> Result<WordEmbeddingModel>
where
    S: AsRef<[T]>,
    T: AsRef<str>,
{
    config.validate()?;
    if sentences.is_empty() {
        return Err(Error::InvalidInput("training corpus is empty".into()));
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for w in s.as_ref() {
            *freq.entry(w.as_ref()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|&(_, c)| c >= config.min_count).collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let index: HashMap<&str, u32> = kept.iter().enumerate().map(|(i, (w, _))| (*w, i as u32)).collect();
    let encoded: Vec<Vec<u32>> = sentences
        .iter()
        .map(|s| s.as_ref().iter().filter_map(|w| index.get(w.as_ref()).copied()).collect::<Vec<u32>>())
        .filter(|s| s.len() > 1)
        .collect();

    let dim = config.dim;
    let vocab_size = kept.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / dim as f32;
    let input_init: Vec<f32> = (0..vocab_size * dim).map(|_| rng.random_range(-bound..bound)).collect();
    let noise = WeightedIndex::new(kept.iter().map(|&(_, c)| (c as f64).powf(0.75)))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let corpus_words: u64 = encoded.iter().map(|s| s.len() as u64).sum();
    // Keep probability as in the reference word2vec tool:
    // (sqrt(f / t) + 1) * t / f, where f is the word's share of the corpus.
    let keep: Vec<f64> = kept
        .iter()
        .map(|&(_, c)| {
            if config.subsample == 0.0 {
                return 1.0;
            }
            let threshold = config.subsample * corpus_words as f64;
            ((c as f64 / threshold).sqrt() + 1.0) * threshold / c as f64
        })
        .collect();
    let processed = AtomicU64::new(0);
    let trainer = Trainer {
        cfg: config,
        noise: &noise,
        keep: &keep,
        total_words: config.epochs as u64 * corpus_words,
        processed: &processed,
    };

    let vectors = if config.workers == 1 {
        let mut input = input_init;
        let mut output = vec![0f32; vocab_size * dim];
        {
            let inp = Cell::from_mut(input.as_mut_slice()).as_slice_of_cells();
            let out = Cell::from_mut(output.as_mut_slice()).as_slice_of_cells();
            trainer.run(inp, out, &encoded, &mut rng);
        }
        input
    } else {
        let input: Vec<AtomicU32> = input_init.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect();
        let output: Vec<AtomicU32> = (0..vocab_size * dim).map(|_| AtomicU32::new(0)).collect();
        let chunk = encoded.len().div_ceil(config.workers).max(1);
        std::thread::scope(|scope| {
            for (w, part) in encoded.chunks(chunk).enumerate() {
                let (trainer, input, output) = (&trainer, &input[..], &output[..]);
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(w as u64 + 1));
                scope.spawn(move || trainer.run(input, output, part, &mut rng));
            }
        });
        input.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    };

    WordEmbeddingModel::assemble(
        dim,
        kept.iter().map(|(w, _)| w.to_string()).collect(),
        kept.iter().map(|&(_, c)| c).collect(),
        vectors,
        Some(config.clone()),
    )
}
