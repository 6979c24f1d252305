//! Apps, release notes and user reviews, persisted as append-only JSONL
//! tables under a data directory.
//!
//! Every accepted record is appended to its table once. The in-memory index
//! is rebuilt from the tables on [`Corpus::open`]. Re-ingesting a record that
//! is already stored byte-for-byte is a no-op, so ingestion is idempotent.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::preprocess::{repetition_rate, ReleaseNoteSentence};

pub const APPS_FILE: &str = "apps.jsonl";
pub const NOTES_FILE: &str = "notes.jsonl";
pub const REVIEWS_FILE: &str = "reviews.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRecord {
    pub app_id: String,
    pub name: String,
    pub category: String,
    #[serde(default)]
    pub first_release_date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseNote {
    pub note_id: String,
    #[serde(default)]
    pub app_id: String,
    #[serde(default)]
    pub version: Option<String>,
    pub released_at: NaiveDate,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserReview {
    pub review_id: String,
    #[serde(default)]
    pub app_id: String,
    pub posted_at: NaiveDate,
    #[serde(default)]
    pub rating: Option<u8>,
    #[serde(default)]
    pub title: Option<String>,
    pub body: String,
}

/// Common surface over the three record kinds so ingestion is written once.
trait Record: Serialize + DeserializeOwned + Clone + PartialEq {
    const KIND: &'static str;
    fn id(&self) -> &str;
    fn app_id_mut(&mut self) -> &mut String;
    fn date(&self) -> Option<NaiveDate>;
    fn validate(&self) -> std::result::Result<(), String>;
}

impl Record for AppRecord {
    const KIND: &'static str = "app";
    fn id(&self) -> &str {
        &self.app_id
    }
    fn app_id_mut(&mut self) -> &mut String {
        &mut self.app_id
    }
    fn date(&self) -> Option<NaiveDate> {
        None
    }
    fn validate(&self) -> std::result::Result<(), String> {
        if self.app_id.trim().is_empty() {
            return Err("empty app_id".into());
        }
        Ok(())
    }
}

impl Record for ReleaseNote {
    const KIND: &'static str = "note";
    fn id(&self) -> &str {
        &self.note_id
    }
    fn app_id_mut(&mut self) -> &mut String {
        &mut self.app_id
    }
    fn date(&self) -> Option<NaiveDate> {
        Some(self.released_at)
    }
    fn validate(&self) -> std::result::Result<(), String> {
        if self.note_id.trim().is_empty() {
            return Err("empty note_id".into());
        }
        if self.raw_text.trim().is_empty() {
            return Err("empty raw_text".into());
        }
        Ok(())
    }
}

impl Record for UserReview {
    const KIND: &'static str = "review";
    fn id(&self) -> &str {
        &self.review_id
    }
    fn app_id_mut(&mut self) -> &mut String {
        &mut self.app_id
    }
    fn date(&self) -> Option<NaiveDate> {
        Some(self.posted_at)
    }
    fn validate(&self) -> std::result::Result<(), String> {
        if self.review_id.trim().is_empty() {
            return Err("empty review_id".into());
        }
        if self.body.trim().is_empty() {
            return Err("empty body".into());
        }
        if let Some(r) = self.rating {
            if !(1..=5).contains(&r) {
                return Err(format!("rating {r} outside 1..=5"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    /// Newly persisted records.
    pub accepted: usize,
    /// Records already stored with identical content.
    pub unchanged: usize,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug)]
struct Table<T> {
    rows: Vec<T>,
    index: HashMap<String, usize>,
}

impl<T> Default for Table<T> {
    fn default() -> Self {
        Table {
            rows: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Record> Table<T> {
    fn from_rows(rows: Vec<T>) -> Result<Self> {
        let mut t = Table {
            rows: Vec::with_capacity(rows.len()),
            index: HashMap::with_capacity(rows.len()),
        };
        for r in rows {
            if t.index.contains_key(r.id()) {
                return Err(Error::DuplicateId(r.id().to_string()));
            }
            t.push(r);
        }
        Ok(t)
    }

    fn push(&mut self, r: T) {
        self.index.insert(r.id().to_string(), self.rows.len());
        self.rows.push(r);
    }

    fn get(&self, id: &str) -> Option<&T> {
        self.index.get(id).map(|&i| &self.rows[i])
    }
}

/// Loaded corpus. Immutable once loaded except through the ingest methods.
#[derive(Debug, Default)]
pub struct Corpus {
    dir: Option<PathBuf>,
    apps: Table<AppRecord>,
    notes: Table<ReleaseNote>,
    reviews: Table<UserReview>,
}

impl Corpus {
    /// A corpus that never touches the filesystem.
    pub fn in_memory() -> Self {
        Corpus::default()
    }

    /// Load (or start) the corpus stored under `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        Ok(Corpus {
            apps: Table::from_rows(jsonl::read_all_or_empty(&dir.join(APPS_FILE))?)?,
            notes: Table::from_rows(jsonl::read_all_or_empty(&dir.join(NOTES_FILE))?)?,
            reviews: Table::from_rows(jsonl::read_all_or_empty(&dir.join(REVIEWS_FILE))?)?,
            dir: Some(dir),
        })
    }

    pub fn apps(&self) -> &[AppRecord] {
        &self.apps.rows
    }

    pub fn notes(&self) -> &[ReleaseNote] {
        &self.notes.rows
    }

    pub fn reviews(&self) -> &[UserReview] {
        &self.reviews.rows
    }

    pub fn app(&self, app_id: &str) -> Option<&AppRecord> {
        self.apps.get(app_id)
    }

    pub fn note(&self, note_id: &str) -> Option<&ReleaseNote> {
        self.notes.get(note_id)
    }

    pub fn review(&self, review_id: &str) -> Option<&UserReview> {
        self.reviews.get(review_id)
    }

    pub fn notes_of<'a>(&'a self, app_id: &'a str) -> impl Iterator<Item = &'a ReleaseNote> + 'a {
        self.notes.rows.iter().filter(move |n| n.app_id == app_id)
    }

    pub fn reviews_of<'a>(&'a self, app_id: &'a str) -> impl Iterator<Item = &'a UserReview> + 'a {
        self.reviews.rows.iter().filter(move |r| r.app_id == app_id)
    }

    /// Every app id that has an app record or owns at least one document.
    pub fn app_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .apps
            .rows
            .iter()
            .map(|a| a.app_id.clone())
            .chain(self.notes.rows.iter().map(|n| n.app_id.clone()))
            .chain(self.reviews.rows.iter().map(|r| r.app_id.clone()))
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn ingest_apps(&mut self, path: &Path) -> Result<IngestReport> {
        let lines = read_input(path)?;
        self.ingest_apps_from(lines, path)
    }

    pub fn ingest_apps_from(&mut self, reader: impl BufRead, path: &Path) -> Result<IngestReport> {
        let parsed = jsonl::parse_lines::<AppRecord, _>(reader, path)?;
        let mut report = IngestReport::default();
        let mut fresh = Vec::new();
        for (line, rec) in parsed {
            let rec = match rec.and_then(|r| r.validate().map(|_| r)) {
                Ok(r) => r,
                Err(reason) => {
                    report.rejected.push(Rejection { line, reason });
                    continue;
                }
            };
            if let Some(first) = rec.first_release_date {
                let earliest = self
                    .notes_of(&rec.app_id)
                    .map(|n| n.released_at)
                    .chain(self.reviews_of(&rec.app_id).map(|r| r.posted_at))
                    .min();
                if let Some(e) = earliest.filter(|e| *e < first) {
                    report.rejected.push(Rejection {
                        line,
                        reason: format!("first_release_date {first} is after stored document dated {e}"),
                    });
                    continue;
                }
            }
            admit(&self.apps, &mut fresh, &mut report, line, rec);
        }
        self.persist(APPS_FILE, &fresh)?;
        for r in fresh {
            self.apps.push(r);
        }
        Ok(report)
    }

    pub fn ingest_release_notes(&mut self, path: &Path, app_id: &str) -> Result<IngestReport> {
        let lines = read_input(path)?;
        self.ingest_release_notes_from(lines, path, app_id)
    }

    pub fn ingest_release_notes_from(
        &mut self,
        reader: impl BufRead,
        path: &Path,
        app_id: &str,
    ) -> Result<IngestReport> {
        let (fresh, report) = self.stage_documents::<ReleaseNote>(reader, path, app_id, |c| &c.notes)?;
        self.persist(NOTES_FILE, &fresh)?;
        for r in fresh {
            self.notes.push(r);
        }
        Ok(report)
    }

    pub fn ingest_reviews(&mut self, path: &Path, app_id: &str) -> Result<IngestReport> {
        let lines = read_input(path)?;
        self.ingest_reviews_from(lines, path, app_id)
    }

    pub fn ingest_reviews_from(
        &mut self,
        reader: impl BufRead,
        path: &Path,
        app_id: &str,
    ) -> Result<IngestReport> {
        let (fresh, report) = self.stage_documents::<UserReview>(reader, path, app_id, |c| &c.reviews)?;
        self.persist(REVIEWS_FILE, &fresh)?;
        for r in fresh {
            self.reviews.push(r);
        }
        Ok(report)
    }

    fn stage_documents<T: Record>(
        &self,
        reader: impl BufRead,
        path: &Path,
        app_id: &str,
        table: impl Fn(&Corpus) -> &Table<T>,
    ) -> Result<(Vec<T>, IngestReport)> {
        let parsed = jsonl::parse_lines::<T, _>(reader, path)?;
        let first_release = self.app(app_id).and_then(|a| a.first_release_date);
        let mut report = IngestReport::default();
        let mut fresh: Vec<T> = Vec::new();
        let mut staged = Table::<T>::default();
        for (line, rec) in parsed {
            let checked = rec.and_then(|mut r| {
                let owner = r.app_id_mut();
                if owner.is_empty() {
                    *owner = app_id.to_string();
                } else if owner != app_id {
                    return Err(format!("app_id `{owner}` does not match `{app_id}`"));
                }
                r.validate()?;
                if let (Some(first), Some(d)) = (first_release, r.date()) {
                    if d < first {
                        return Err(format!("{} dated {d} precedes first release {first}", T::KIND));
                    }
                }
                Ok(r)
            });
            match checked {
                Ok(r) => {
                    if staged.get(r.id()).is_some() {
                        report.rejected.push(Rejection {
                            line,
                            reason: format!("duplicate {} id `{}`", T::KIND, r.id()),
                        });
                        continue;
                    }
                    staged.push(r.clone());
                    admit(table(self), &mut fresh, &mut report, line, r);
                }
                Err(reason) => report.rejected.push(Rejection { line, reason }),
            }
        }
        Ok((fresh, report))
    }

    fn persist<T: Serialize>(&self, file: &str, rows: &[T]) -> Result<()> {
        match &self.dir {
            Some(dir) => jsonl::append(&dir.join(file), rows),
            None => Ok(()),
        }
    }

    pub fn export_apps(&self, w: &mut impl Write) -> std::io::Result<()> {
        export(&self.apps.rows, w)
    }

    pub fn export_notes(&self, w: &mut impl Write) -> std::io::Result<()> {
        export(&self.notes.rows, w)
    }

    pub fn export_reviews(&self, w: &mut impl Write) -> std::io::Result<()> {
        export(&self.reviews.rows, w)
    }
}

/// Decide whether a validated record is new, an identical re-ingest, or an
/// id collision with different content.
fn admit<T: Record>(
    stored: &Table<T>,
    fresh: &mut Vec<T>,
    report: &mut IngestReport,
    line: usize,
    rec: T,
) {
    match stored.get(rec.id()) {
        Some(existing) if *existing == rec => report.unchanged += 1,
        Some(_) => report.rejected.push(Rejection {
            line,
            reason: format!("duplicate {} id `{}`", T::KIND, rec.id()),
        }),
        None => {
            // also dedup within this batch (apps go through here directly)
            if fresh.iter().any(|f| f.id() == rec.id()) {
                report.rejected.push(Rejection {
                    line,
                    reason: format!("duplicate {} id `{}`", T::KIND, rec.id()),
                });
                return;
            }
            report.accepted += 1;
            fresh.push(rec);
        }
    }
}

fn read_input(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn export<T: Serialize>(rows: &[T], w: &mut impl Write) -> std::io::Result<()> {
    for r in rows {
        w.write_all(jsonl::to_line(r).as_bytes())?;
    }
    Ok(())
}

/// Minimum document counts have no canonical values; these defaults are
/// order-of-magnitude choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EligibilityThresholds {
    pub min_age_days: i64,
    pub max_repetition_rate: f64,
    pub min_notes: usize,
    pub min_reviews: usize,
}

impl Default for EligibilityThresholds {
    fn default() -> Self {
        EligibilityThresholds {
            min_age_days: 1095,
            max_repetition_rate: 0.80,
            min_notes: 50,
            min_reviews: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EligibilityReport {
    pub app_id: String,
    pub as_of: Option<NaiveDate>,
    pub age_days: Option<i64>,
    pub note_count: usize,
    pub review_count: usize,
    pub note_sentence_count: usize,
    pub sentence_repetition_rate: Option<f64>,
    #[serde(rename = "passes_IC1_1")]
    pub passes_ic1_1: bool,
    #[serde(rename = "passes_IC1_2")]
    pub passes_ic1_2: bool,
    #[serde(rename = "passes_IC1_3")]
    pub passes_ic1_3: bool,
}

/// Report the app-selection criteria for one app.
///
/// `note_sentences` are the app's split release-note sentences (before or
/// after de-duplication; the kept flag is ignored). Age is measured up to
/// `as_of`, defaulting to the latest document date of the app. When the app
/// record has no first release date the earliest document date stands in.
pub fn app_eligibility_report(
    corpus: &Corpus,
    app_id: &str,
    note_sentences: &[ReleaseNoteSentence],
    thresholds: &EligibilityThresholds,
    as_of: Option<NaiveDate>,
) -> Result<EligibilityReport> {
    let app = corpus.app(app_id);
    let note_dates: Vec<NaiveDate> = corpus.notes_of(app_id).map(|n| n.released_at).collect();
    let review_dates: Vec<NaiveDate> = corpus.reviews_of(app_id).map(|r| r.posted_at).collect();
    if app.is_none() && note_dates.is_empty() && review_dates.is_empty() {
        return Err(Error::UnknownApp(app_id.to_string()));
    }
    let all_dates = || note_dates.iter().chain(review_dates.iter()).copied();
    let as_of = as_of.or_else(|| all_dates().max());
    let first = app
        .and_then(|a| a.first_release_date)
        .or_else(|| all_dates().min());
    let age_days = match (first, as_of) {
        (Some(f), Some(a)) => Some((a - f).num_days()),
        _ => None,
    };
    let own: Vec<ReleaseNoteSentence> = note_sentences
        .iter()
        .filter(|s| s.app_id == app_id)
        .cloned()
        .collect();
    let rate = repetition_rate(&own).ok();
    Ok(EligibilityReport {
        app_id: app_id.to_string(),
        as_of,
        age_days,
        note_count: note_dates.len(),
        review_count: review_dates.len(),
        note_sentence_count: own.len(),
        sentence_repetition_rate: rate,
        passes_ic1_1: age_days.is_some_and(|d| d >= thresholds.min_age_days),
        passes_ic1_2: rate.is_some_and(|r| r < thresholds.max_repetition_rate),
        passes_ic1_3: note_dates.len() >= thresholds.min_notes
            && review_dates.len() >= thresholds.min_reviews,
    })
}
