//! Sentence vectors from two backends: a skip-gram word model trained here,
//! combined per sentence with POS-weighted averaging, and externally
//! produced vectors imported from a `VEC1` file.

mod encode;
mod skipgram;
mod store;
mod vecfile;

pub use encode::{encode_sentence, encode_sentences, Encoded, PosWeights};
pub use skipgram::{train_skipgram, SkipGramConfig, WordEmbeddingModel};
pub use store::{SentenceVector, VectorStore};
pub use vecfile::{import_external_vectors, read_vec1, write_vec1, EXTERNAL_BACKEND};

pub const SKIPGRAM_BACKEND: &str = "skipgram";
