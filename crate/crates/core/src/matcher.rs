//! Cosine ranking of review sentences against release-note sentences, and
//! the intersection of the per-backend top-N lists.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{SentenceVector, VectorStore};
use crate::error::{Error, Result};
use crate::preprocess::{ReleaseNoteSentence, ReviewSentence};

pub const DEFAULT_TOP_N: usize = 80;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn clamped(dot: f64, na: f64, nb: f64) -> f64 {
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector("cosine operand".into()));
    }
    Ok(clamped(dot(a, b), na, nb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub rn_sentence_id: String,
    pub ur_sentence_id: String,
    pub sims: BTreeMap<String, f64>,
    /// 1 is the most similar.
    pub ranks: BTreeMap<String, usize>,
}

struct Candidate<'a> {
    sim: f64,
    id: &'a str,
    row: usize,
}

// Orders worse candidates first so a max-heap keeps the current worst on top.
impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.sim.total_cmp(&self.sim).then_with(|| self.id.cmp(other.id))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

/// The `n` most similar store entries, best first. Equal similarities are
/// ordered by ascending review sentence id.
pub fn top_n(rn: &SentenceVector, store: &VectorStore, n: usize) -> Result<Vec<MatchedPair>> {
    if store.is_empty() {
        return Err(Error::EmptyStore);
    }
    if rn.backend_id != store.backend_id() {
        return Err(Error::BackendMismatch {
            expected: store.backend_id().to_string(),
            found: rn.backend_id.clone(),
        });
    }
    if rn.values.len() != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            found: rn.values.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let rn_norm = norm(&rn.values);
    if rn_norm == 0.0 {
        return Err(Error::ZeroVector(rn.sentence_id.clone()));
    }
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(n + 1);
    for (row, id) in store.ids().iter().enumerate() {
        let sim = clamped(dot(&rn.values, store.row(row)), rn_norm, store.norm_at(row));
        let cand = Candidate { sim, id, row };
        if heap.len() < n {
            heap.push(cand);
        } else if heap.peek().is_some_and(|worst| cand < *worst) {
            heap.pop();
            heap.push(cand);
        }
    }
    let backend = store.backend_id().to_string();
    Ok(heap
        .into_sorted_vec()
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            debug_assert_eq!(store.ids()[c.row], c.id);
            MatchedPair {
                rn_sentence_id: rn.sentence_id.clone(),
                ur_sentence_id: c.id.to_string(),
                sims: BTreeMap::from([(backend.clone(), c.sim)]),
                ranks: BTreeMap::from([(backend.clone(), i + 1)]),
            }
        })
        .collect())
}

/// Pairs present in both lists, carrying both backends' scores, in the
/// order of `a`.
pub fn intersect(a: &[MatchedPair], b: &[MatchedPair]) -> Result<Vec<MatchedPair>> {
    let rn_ids: BTreeSet<&str> = a.iter().chain(b).map(|p| p.rn_sentence_id.as_str()).collect();
    if rn_ids.len() > 1 {
        let mut it = rn_ids.into_iter();
        return Err(Error::MismatchedNote(
            it.next().unwrap_or_default().to_string(),
            it.next().unwrap_or_default().to_string(),
        ));
    }
    let in_b: HashMap<&str, &MatchedPair> = b.iter().map(|p| (p.ur_sentence_id.as_str(), p)).collect();
    Ok(a.iter()
        .filter_map(|p| {
            let q = in_b.get(p.ur_sentence_id.as_str())?;
            let mut merged = p.clone();
            merged.sims.extend(q.sims.iter().map(|(k, v)| (k.clone(), *v)));
            merged.ranks.extend(q.ranks.iter().map(|(k, v)| (k.clone(), *v)));
            Some(merged)
        })
        .collect())
}

/// Note-side and review-side vectors of one backend.
#[derive(Debug, Clone)]
pub struct Backend {
    pub notes: VectorStore,
    pub reviews: VectorStore,
}

impl Backend {
    pub fn id(&self) -> &str {
        self.reviews.backend_id()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub rn_sentence_id: String,
    pub n: usize,
    pub backends: Vec<String>,
    pub top: BTreeMap<String, Vec<MatchedPair>>,
    /// Empty unless every backend produced a list.
    pub intersection: Vec<MatchedPair>,
    /// Backends that could not rank this note, with the reason.
    pub skipped: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_id: String,
    pub rn_sentence_id: String,
    pub ur_sentence_id: String,
    pub sims: BTreeMap<String, f64>,
    pub ranks: BTreeMap<String, usize>,
    pub in_intersection: bool,
}

pub fn pair_id(rn: &str, ur: &str) -> String {
    let mut h = Sha256::new();
    h.update(rn.as_bytes());
    h.update([0u8]);
    h.update(ur.as_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Rank the informative review sentences of `app_id` against each note
/// sentence under every backend.
pub fn run_match(
    app_id: &str,
    notes: &[&ReleaseNoteSentence],
    reviews: &[ReviewSentence],
    backends: &[Backend],
    n: usize,
) -> Result<Vec<MatchReport>> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    if backends.is_empty() {
        return Err(Error::InvalidConfig("at least one backend is required".into()));
    }
    for note in notes {
        if note.app_id != app_id {
            return Err(Error::InvalidInput(format!(
                "note sentence `{}` belongs to app `{}`",
                note.sentence_id, note.app_id
            )));
        }
        if !note.kept {
            return Err(Error::InvalidInput(format!(
                "note sentence `{}` was removed as a duplicate",
                note.sentence_id
            )));
        }
    }
    let candidates: HashSet<&str> = reviews
        .iter()
        .filter(|r| r.app_id == app_id && r.informative == Some(true))
        .map(|r| r.sentence_id.as_str())
        .collect();
    let pools: Vec<Cow<VectorStore>> = backends
        .iter()
        .map(|b| {
            if b.reviews.len() == candidates.len() && b.reviews.ids().iter().all(|id| candidates.contains(id.as_str())) {
                Cow::Borrowed(&b.reviews)
            } else {
                Cow::Owned(b.reviews.subset(&candidates))
            }
        })
        .collect();
    for (b, pool) in backends.iter().zip(&pools) {
        if pool.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no informative review vectors for app `{app_id}` under backend `{}`",
                b.id()
            )));
        }
    }
    let names: Vec<String> = backends.iter().map(|b| b.id().to_string()).collect();

    notes
        .par_iter()
        .map(|note| {
            let mut report = MatchReport {
                rn_sentence_id: note.sentence_id.clone(),
                n,
                backends: names.clone(),
                top: BTreeMap::new(),
                intersection: Vec::new(),
                skipped: BTreeMap::new(),
            };
            let mut lists = Vec::new();
            for (b, pool) in backends.iter().zip(&pools) {
                match b.notes.vector(&note.sentence_id) {
                    Some(v) => {
                        let list = top_n(&v, pool, n)?;
                        report.top.insert(b.id().to_string(), list.clone());
                        lists.push(list);
                    }
                    None => {
                        let reason = b
                            .notes
                            .excluded()
                            .get(&note.sentence_id)
                            .cloned()
                            .unwrap_or_else(|| "missing vector".to_string());
                        report.skipped.insert(b.id().to_string(), reason);
                    }
                }
            }
            if backends.len() > 1 && report.skipped.is_empty() {
                let mut acc = lists[0].clone();
                for l in &lists[1..] {
                    acc = intersect(&acc, l)?;
                }
                report.intersection = acc;
            }
            Ok(report)
        })
        .collect()
}

/// Flatten reports into one record per distinct (note, review) pair.
pub fn pair_records(reports: &[MatchReport]) -> Vec<PairRecord> {
    let mut out = Vec::new();
    for r in reports {
        let inter: HashSet<&str> = r.intersection.iter().map(|p| p.ur_sentence_id.as_str()).collect();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let mut rows: Vec<PairRecord> = Vec::new();
        for backend in &r.backends {
            for p in r.top.get(backend).into_iter().flatten() {
                match seen.get(p.ur_sentence_id.as_str()) {
                    Some(&i) => {
                        rows[i].sims.extend(p.sims.clone());
                        rows[i].ranks.extend(p.ranks.clone());
                    }
                    None => {
                        seen.insert(&p.ur_sentence_id, rows.len());
                        rows.push(PairRecord {
                            pair_id: pair_id(&p.rn_sentence_id, &p.ur_sentence_id),
                            rn_sentence_id: p.rn_sentence_id.clone(),
                            ur_sentence_id: p.ur_sentence_id.clone(),
                            sims: p.sims.clone(),
                            ranks: p.ranks.clone(),
                            in_intersection: inter.contains(p.ur_sentence_id.as_str()),
                        });
                    }
                }
            }
        }
        out.extend(rows);
    }
    out
}

pub fn write_pairs(records: &[PairRecord], w: &mut impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub note_sentences: usize,
    pub top_n_total: BTreeMap<String, usize>,
    pub skipped: BTreeMap<String, usize>,
    /// Sum of the per-note intersection sizes.
    pub intersection_per_note_total: usize,
    /// Review sentences that appear in every backend's lists after pooling
    /// the lists of all notes.
    pub intersection_pooled: usize,
}

pub fn summarize(reports: &[MatchReport]) -> MatchSummary {
    let mut top_n_total: BTreeMap<String, usize> = BTreeMap::new();
    let mut skipped: BTreeMap<String, usize> = BTreeMap::new();
    let mut pooled: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut backends: BTreeSet<&str> = BTreeSet::new();
    for r in reports {
        backends.extend(r.backends.iter().map(String::as_str));
        for (b, list) in &r.top {
            *top_n_total.entry(b.clone()).or_default() += list.len();
            pooled
                .entry(b.as_str())
                .or_default()
                .extend(list.iter().map(|p| p.ur_sentence_id.as_str()));
        }
        for b in r.skipped.keys() {
            *skipped.entry(b.clone()).or_default() += 1;
        }
    }
    let intersection_pooled = if backends.len() > 1 {
        let mut sets = backends.iter().map(|b| pooled.get(b).cloned().unwrap_or_default());
        let first = sets.next().unwrap_or_default();
        sets.fold(first, |acc, s| acc.intersection(&s).copied().collect()).len()
    } else {
        0
    };
    MatchSummary {
        note_sentences: reports.len(),
        top_n_total,
        skipped,
        intersection_per_note_total: reports.iter().map(|r| r.intersection.len()).sum(),
        intersection_pooled,
    }
}
