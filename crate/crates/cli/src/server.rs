//! JSON API for labeling matched pairs.
//!
//! The server reads the corpus, sentences and pairs once at startup and never
//! writes them. Labels go to an append-only JSONL file; each accepted label is
//! flushed to disk before the response is sent.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{NaiveDate, Utc};
use revnote::analysis::{agreement, consensus, PairLabel, Relevance, Role, ADJUDICATOR};
use revnote::corpus::Corpus;
use revnote::jsonl;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::layout::DataDir;
use crate::user_error;

pub const TOKEN_HEADER: &str = "x-api-token";

#[derive(Debug, Clone, Serialize)]
pub struct AppContext {
    pub app_id: String,
    pub name: Option<String>,
    pub category: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoteContext {
    pub sentence_id: String,
    pub note_id: String,
    pub text: String,
    pub released_at: NaiveDate,
    pub version: Option<String>,
    pub full_text: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReviewContext {
    pub sentence_id: String,
    pub review_id: String,
    pub text: String,
    pub posted_at: NaiveDate,
    pub rating: Option<u8>,
    pub title: Option<String>,
    pub full_text: Option<String>,
}

/// A matched pair with the original text on both sides.
#[derive(Debug, Clone, Serialize)]
pub struct PairView {
    pub pair_id: String,
    pub app: AppContext,
    pub note: NoteContext,
    pub review: ReviewContext,
    pub sims: BTreeMap<String, f64>,
    pub ranks: BTreeMap<String, usize>,
    pub in_intersection: bool,
    pub delta_t_days: i64,
}

/// Join the pairs file with sentences and source documents.
pub fn load_pair_views(data: &DataDir) -> anyhow::Result<Vec<PairView>> {
    let records = data.load_pairs().context("loading pairs")?;
    let notes: HashMap<String, _> = data
        .load_note_sentences()?
        .into_iter()
        .map(|s| (s.sentence_id.clone(), s))
        .collect();
    let reviews: HashMap<String, _> = data
        .load_review_sentences()?
        .into_iter()
        .map(|s| (s.sentence_id.clone(), s))
        .collect();
    let corpus = Corpus::open(data.root())?;
    let mut seen = HashSet::new();
    let mut views = Vec::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.pair_id.clone()) {
            return Err(user_error(format!("corrupt pairs file: pair `{}` appears twice", r.pair_id)));
        }
        let note = notes.get(&r.rn_sentence_id).ok_or_else(|| {
            user_error(format!("corrupt pairs file: unknown note sentence `{}`", r.rn_sentence_id))
        })?;
        let review = reviews.get(&r.ur_sentence_id).ok_or_else(|| {
            user_error(format!("corrupt pairs file: unknown review sentence `{}`", r.ur_sentence_id))
        })?;
        let app = corpus.app(&note.app_id);
        let note_doc = corpus.note(&note.note_id);
        let review_doc = corpus.review(&review.review_id);
        views.push(PairView {
            pair_id: r.pair_id,
            app: AppContext {
                app_id: note.app_id.clone(),
                name: app.map(|a| a.name.clone()),
                category: app.map(|a| a.category.clone()),
            },
            note: NoteContext {
                sentence_id: note.sentence_id.clone(),
                note_id: note.note_id.clone(),
                text: note.text.clone(),
                released_at: note.released_at,
                version: note_doc.and_then(|n| n.version.clone()),
                full_text: note_doc.map(|n| n.raw_text.clone()),
            },
            review: ReviewContext {
                sentence_id: review.sentence_id.clone(),
                review_id: review.review_id.clone(),
                text: review.text.clone(),
                posted_at: review.posted_at,
                rating: review_doc.and_then(|r| r.rating),
                title: review_doc.and_then(|r| r.title.clone()),
                full_text: review_doc.map(|r| r.body.clone()),
            },
            sims: r.sims,
            ranks: r.ranks,
            in_intersection: r.in_intersection,
            delta_t_days: revnote::analysis::time_interval(note.released_at, review.posted_at),
        });
    }
    Ok(views)
}

struct ParsedLog {
    labels: Vec<PairLabel>,
    /// Length of the valid prefix when the file ends in a torn write.
    truncate_to: Option<u64>,
    missing_newline: bool,
}

fn parse_log(path: &Path, bytes: &[u8]) -> anyhow::Result<ParsedLog> {
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut keys = HashSet::new();
    let mut labels = Vec::new();
    let mut push = |line_no: usize, label: PairLabel| -> anyhow::Result<()> {
        label
            .validate()
            .map_err(|e| user_error(format!("{} line {line_no}: {e}", path.display())))?;
        if !keys.insert((label.pair_id.clone(), label.annotator.clone())) {
            return Err(user_error(format!(
                "{} line {line_no}: second label by `{}` for pair `{}`",
                path.display(),
                label.annotator,
                label.pair_id
            )));
        }
        labels.push(label);
        Ok(())
    };
    let text = std::str::from_utf8(&bytes[..complete])
        .map_err(|e| user_error(format!("{}: {e}", path.display())))?;
    let mut line_count = 0;
    for (i, line) in text.lines().enumerate() {
        line_count = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let label: PairLabel = serde_json::from_str(line)
            .map_err(|e| user_error(format!("corrupt labels file {} line {}: {e}", path.display(), i + 1)))?;
        push(i + 1, label)?;
    }
    let tail = &bytes[complete..];
    let mut parsed = ParsedLog {
        labels: Vec::new(),
        truncate_to: None,
        missing_newline: false,
    };
    if !tail.iter().all(u8::is_ascii_whitespace) {
        // A final line without its newline is either a torn append or a
        // hand-written file; only the latter parses.
        match serde_json::from_slice::<PairLabel>(tail) {
            Ok(label) => {
                push(line_count + 1, label)?;
                parsed.missing_newline = true;
            }
            Err(_) => parsed.truncate_to = Some(complete as u64),
        }
    }
    parsed.labels = labels;
    Ok(parsed)
}

/// Labels from a labels file, ignoring a torn final line.
pub fn read_labels(path: &Path) -> anyhow::Result<Vec<PairLabel>> {
    if !path.exists() {
        return Err(user_error(format!("labels missing: {} not found", path.display())));
    }
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_log(path, &bytes)?.labels)
}

/// Append-only label store with (pair, annotator) uniqueness.
pub struct LabelLog {
    path: PathBuf,
    labels: Vec<PairLabel>,
    keys: HashSet<(String, String)>,
}

impl LabelLog {
    /// Load the log, cutting off a torn final line so later appends start
    /// on a fresh line.
    pub fn open(path: PathBuf) -> anyhow::Result<Self> {
        let labels = if path.exists() {
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let parsed = parse_log(&path, &bytes)?;
            if let Some(len) = parsed.truncate_to {
                let f = OpenOptions::new().write(true).open(&path)?;
                f.set_len(len)?;
                f.sync_all()?;
            } else if parsed.missing_newline {
                let mut f = OpenOptions::new().append(true).open(&path)?;
                f.write_all(b"\n")?;
                f.sync_all()?;
            }
            parsed.labels
        } else {
            Vec::new()
        };
        let keys = labels.iter().map(|l| (l.pair_id.clone(), l.annotator.clone())).collect();
        Ok(LabelLog { path, labels, keys })
    }

    pub fn labels(&self) -> &[PairLabel] {
        &self.labels
    }

    pub fn contains(&self, pair_id: &str, annotator: &str) -> bool {
        self.keys.contains(&(pair_id.to_string(), annotator.to_string()))
    }

    /// Write and fsync one label, then record it in memory.
    pub fn append(&mut self, label: PairLabel) -> std::io::Result<()> {
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut f: File = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(jsonl::to_line(&label).as_bytes())?;
        f.sync_data()?;
        self.keys.insert((label.pair_id.clone(), label.annotator.clone()));
        self.labels.push(label);
        Ok(())
    }
}

pub struct AppState {
    pairs: Vec<PairView>,
    index: HashMap<String, usize>,
    log: Mutex<LabelLog>,
    token: Option<String>,
}

impl AppState {
    pub fn new(pairs: Vec<PairView>, log: LabelLog, token: Option<String>) -> Self {
        let index = pairs.iter().enumerate().map(|(i, p)| (p.pair_id.clone(), i)).collect();
        AppState {
            pairs,
            index,
            log: Mutex::new(log),
            token,
        }
    }

    pub fn load(data: &DataDir, token: Option<String>) -> anyhow::Result<Self> {
        let pairs = load_pair_views(data)?;
        let log = LabelLog::open(data.labels())?;
        Ok(AppState::new(pairs, log, token))
    }

    fn labels_snapshot(&self) -> Vec<PairLabel> {
        self.log.lock().expect("label log lock").labels().to_vec()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/pairs", get(list_pairs))
        .route("/api/pairs/{id}", get(get_pair))
        .route("/api/labels", post(post_label))
        .route("/api/progress", get(progress))
        .route("/api/agreement", get(agreement_view))
        .route("/api/export", get(export_labels))
        .fallback(|| async { error(StatusCode::NOT_FOUND, "no such endpoint") })
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Serve until interrupted.
pub async fn serve(state: AppState, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(expected) = &state.token {
        let given = req.headers().get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return error(StatusCode::UNAUTHORIZED, "missing or invalid X-Api-Token");
        }
    }
    next.run(req).await
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelState {
    #[default]
    All,
    Labeled,
    Unlabeled,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsQuery {
    pub annotator: Option<String>,
    #[serde(default)]
    pub state: LabelState,
    pub app: Option<String>,
    pub intersection: Option<bool>,
    pub limit: Option<usize>,
}

async fn list_pairs(State(state): State<Arc<AppState>>, query: Result<Query<PairsQuery>, QueryRejection>) -> Response {
    let Query(q) = match query {
        Ok(q) => q,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    if q.state != LabelState::All && q.annotator.is_none() {
        return error(StatusCode::BAD_REQUEST, "state filter requires annotator");
    }
    let log = state.log.lock().expect("label log lock");
    let matching: Vec<&PairView> = state
        .pairs
        .iter()
        .filter(|p| q.app.as_ref().is_none_or(|a| &p.app.app_id == a))
        .filter(|p| q.intersection.is_none_or(|i| p.in_intersection == i))
        .filter(|p| match (&q.annotator, q.state) {
            (Some(a), LabelState::Labeled) => log.contains(&p.pair_id, a),
            (Some(a), LabelState::Unlabeled) => !log.contains(&p.pair_id, a),
            _ => true,
        })
        .collect();
    let total = matching.len();
    let pairs: Vec<&PairView> = matching.into_iter().take(q.limit.unwrap_or(usize::MAX)).collect();
    Json(json!({ "total": total, "pairs": pairs })).into_response()
}

async fn get_pair(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(&i) = state.index.get(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown pair `{id}`"));
    };
    let labels: Vec<PairLabel> = state.labels_snapshot().into_iter().filter(|l| l.pair_id == id).collect();
    Json(json!({ "pair": state.pairs[i], "labels": labels })).into_response()
}

/// A label as submitted; the server stamps `labeled_at`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRequest {
    pub pair_id: String,
    pub annotator: String,
    pub relevance: Relevance,
    #[serde(default)]
    pub role: Option<Role>,
}

async fn post_label(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let req: LabelRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid label: {e}")),
    };
    let label = PairLabel {
        pair_id: req.pair_id,
        annotator: req.annotator.trim().to_string(),
        relevance: req.relevance,
        role: req.role,
        labeled_at: Utc::now(),
    };
    if let Err(e) = label.validate() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string());
    }
    if !state.index.contains_key(&label.pair_id) {
        return error(StatusCode::NOT_FOUND, format!("unknown pair `{}`", label.pair_id));
    }
    let mut log = state.log.lock().expect("label log lock");
    if log.contains(&label.pair_id, &label.annotator) {
        return error(
            StatusCode::CONFLICT,
            format!("`{}` already labeled pair `{}`", label.annotator, label.pair_id),
        );
    }
    if let Err(e) = log.append(label.clone()) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, format!("label not stored: {e}"));
    }
    (StatusCode::CREATED, Json(label)).into_response()
}

async fn progress(State(state): State<Arc<AppState>>) -> Response {
    let labels = state.labels_snapshot();
    let known: Vec<&PairLabel> = labels.iter().filter(|l| state.index.contains_key(&l.pair_id)).collect();
    let mut per_annotator: BTreeMap<&str, usize> = BTreeMap::new();
    let mut labeled: HashSet<&str> = HashSet::new();
    for l in &known {
        *per_annotator.entry(l.annotator.as_str()).or_default() += 1;
        labeled.insert(l.pair_id.as_str());
    }
    let owned: Vec<PairLabel> = known.into_iter().cloned().collect();
    let c = consensus(&owned);
    Json(json!({
        "total": state.pairs.len(),
        "labeled": labeled.len(),
        "consensus": c.labels.len(),
        "per_annotator": per_annotator,
    }))
    .into_response()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgreementQuery {
    pub a: Option<String>,
    pub b: Option<String>,
}

async fn agreement_view(
    State(state): State<Arc<AppState>>,
    query: Result<Query<AgreementQuery>, QueryRejection>,
) -> Response {
    let Query(q) = match query {
        Ok(q) => q,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let labels = state.labels_snapshot();
    let coders: BTreeSet<&str> = labels
        .iter()
        .map(|l| l.annotator.as_str())
        .filter(|a| *a != ADJUDICATOR)
        .collect();
    let pick = match (q.a.as_deref(), q.b.as_deref()) {
        (Some(a), Some(b)) if a != b => Some((a.to_string(), b.to_string())),
        (Some(_), Some(_)) => return error(StatusCode::BAD_REQUEST, "a and b must differ"),
        (None, None) if coders.len() == 2 => {
            let mut it = coders.iter();
            Some((it.next().unwrap().to_string(), it.next().unwrap().to_string()))
        }
        (None, None) if coders.len() < 2 => None,
        (None, None) => return error(StatusCode::BAD_REQUEST, "more than two annotators; pass a and b"),
        _ => return error(StatusCode::BAD_REQUEST, "pass both a and b"),
    };

    let mut by_pair: BTreeMap<&str, Vec<&PairLabel>> = BTreeMap::new();
    for l in &labels {
        by_pair.entry(l.pair_id.as_str()).or_default().push(l);
    }
    let unresolved: HashSet<String> = consensus(&labels).unresolved.into_iter().collect();
    let pending: Vec<serde_json::Value> = by_pair
        .iter()
        .filter(|(id, ls)| unresolved.contains(**id) && ls.len() >= 2)
        .map(|(id, ls)| json!({ "pair_id": id, "labels": ls }))
        .collect();

    let mut body = json!({
        "annotators": null,
        "common_pairs": 0,
        "percent_agreement": null,
        "cohen_kappa": null,
        "relevance_disagreements": [],
        "pending_adjudication": pending,
    });
    if let Some((a, b)) = pick {
        let of = |who: &str| -> BTreeMap<&str, PairLabel> {
            labels
                .iter()
                .filter(|l| l.annotator == who)
                .map(|l| (l.pair_id.as_str(), l.clone()))
                .collect()
        };
        let (la, lb) = (of(&a), of(&b));
        let common: Vec<&str> = la.keys().filter(|k| lb.contains_key(*k)).copied().collect();
        let xs: Vec<PairLabel> = common.iter().map(|k| la[k].clone()).collect();
        let ys: Vec<PairLabel> = common.iter().map(|k| lb[k].clone()).collect();
        body["annotators"] = json!([a, b]);
        body["common_pairs"] = json!(common.len());
        if let Ok(r) = agreement(&xs, &ys) {
            body["percent_agreement"] = json!(r.percent_agreement);
            body["cohen_kappa"] = json!(r.cohen_kappa);
            body["relevance_disagreements"] = json!(r.disagreements);
        }
    }
    Json(body).into_response()
}

async fn export_labels(State(state): State<Arc<AppState>>) -> Response {
    let body: String = state.labels_snapshot().iter().map(jsonl::to_line).collect();
    (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/x-ndjson"))],
        body,
    )
        .into_response()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(pair: &str, who: &str) -> String {
        format!(
            r#"{{"pair_id":"{pair}","annotator":"{who}","relevance":"irrelevant","role":null,"labeled_at":"2024-01-01T00:00:00Z"}}"#
        )
    }

    #[test]
    fn torn_tail_is_dropped() {
        let text = format!("{}\n{}", label("p1", "a"), &label("p2", "a")[..20]);
        let parsed = parse_log(Path::new("l"), text.as_bytes()).unwrap();
        assert_eq!(parsed.labels.len(), 1);
        assert_eq!(parsed.truncate_to, Some(label("p1", "a").len() as u64 + 1));
    }

    #[test]
    fn complete_tail_without_newline_is_kept() {
        let text = format!("{}\n{}", label("p1", "a"), label("p2", "a"));
        let parsed = parse_log(Path::new("l"), text.as_bytes()).unwrap();
        assert_eq!(parsed.labels.len(), 2);
        assert!(parsed.missing_newline && parsed.truncate_to.is_none());
    }

    #[test]
    fn corrupt_middle_line_and_duplicates_fail() {
        let text = format!("{}\nnot json\n{}\n", label("p1", "a"), label("p2", "a"));
        assert!(parse_log(Path::new("l"), text.as_bytes()).is_err());
        let text = format!("{}\n{}\n", label("p1", "a"), label("p1", "a"));
        assert!(parse_log(Path::new("l"), text.as_bytes()).is_err());
    }
}
