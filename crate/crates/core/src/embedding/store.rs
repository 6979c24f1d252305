use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceVector {
    pub sentence_id: String,
    pub backend_id: String,
    pub values: Vec<f64>,
}

/// Dense row-major vectors of one backend, keyed by sentence id.
///
/// Rows are finite and nonzero. Norms are cached for the similarity scan.
#[derive(Debug, Clone)]
pub struct VectorStore {
    backend_id: String,
    dim: usize,
    ids: Vec<String>,
    data: Vec<f64>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
    /// Sentences that could not be encoded, with the reason.
    excluded: BTreeMap<String, String>,
}

impl VectorStore {
    pub fn new(backend_id: impl Into<String>, dim: usize) -> Self {
        VectorStore {
            backend_id: backend_id.into(),
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            norms: Vec::new(),
            index: HashMap::new(),
            excluded: BTreeMap::new(),
        }
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, values: &[f64]) -> Result<()> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value in vector `{id}`")));
        }
        let norm = crate::matcher::norm(values);
        if norm == 0.0 {
            return Err(Error::ZeroVector(id));
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(values);
        self.norms.push(norm);
        Ok(())
    }

    pub fn insert_vector(&mut self, v: &SentenceVector) -> Result<()> {
        if v.backend_id != self.backend_id {
            return Err(Error::BackendMismatch {
                expected: self.backend_id.clone(),
                found: v.backend_id.clone(),
            });
        }
        self.insert(v.sentence_id.clone(), &v.values)
    }

    pub fn exclude(&mut self, id: impl Into<String>, reason: impl Into<String>) {
        self.excluded.insert(id.into(), reason.into());
    }

    pub fn excluded(&self) -> &BTreeMap<String, String> {
        &self.excluded
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn vector(&self, id: &str) -> Option<SentenceVector> {
        self.get(id).map(|v| SentenceVector {
            sentence_id: id.to_string(),
            backend_id: self.backend_id.clone(),
            values: v.to_vec(),
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn norm_at(&self, i: usize) -> f64 {
        self.norms[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), self.row(i)))
    }

    /// Copy of the rows whose ids are in `keep`, preserving store order.
    pub fn subset(&self, keep: &HashSet<&str>) -> VectorStore {
        let mut out = VectorStore::new(self.backend_id.clone(), self.dim);
        for (i, id) in self.ids.iter().enumerate() {
            if keep.contains(id.as_str()) {
                out.index.insert(id.clone(), out.ids.len());
                out.ids.push(id.clone());
                out.data.extend_from_slice(self.row(i));
                out.norms.push(self.norms[i]);
            }
        }
        out.excluded = self
            .excluded
            .iter()
            .filter(|(id, _)| keep.contains(id.as_str()))
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect();
        out
    }
}
