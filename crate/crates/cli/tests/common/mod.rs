#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub const APP: &str = "demo";

pub fn revnote(data: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revnote"))
        .arg("--data-dir")
        .arg(data)
        .args(args)
        .output()
        .expect("spawn revnote")
}

/// Run and require success; returns stdout parsed as JSON when possible.
pub fn ok(data: &Path, args: &[&str]) -> Value {
    let out = revnote(data, args);
    assert!(
        out.status.success(),
        "revnote {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap_or(Value::Null)
}

pub fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

const TOPICS: [(&str, &str); 4] = [
    ("Dark mode is now available", "please add dark mode for night reading"),
    ("Offline playlists can be downloaded", "i want to download playlists offline"),
    ("Fixed crash when uploading photos", "app crashes every time i upload photos"),
    ("Search now supports lyrics", "let me search songs by lyrics"),
];

/// Source files for one app: 3 notes, 48 reviews over 4 topics plus chatter.
pub fn write_sources(dir: &Path) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    let apps = dir.join("src/apps.jsonl");
    write(
        &apps,
        &format!(r#"{{"app_id":"{APP}","name":"Demo Music","category":"Music","first_release_date":"2015-01-01"}}"#),
    );
    let notes = dir.join("src/notes.jsonl");
    let mut text = String::new();
    for (i, date) in ["2019-03-01", "2019-06-01", "2019-09-01"].iter().enumerate() {
        let lines: Vec<&str> = TOPICS.iter().map(|t| t.0).skip(i).take(2).collect();
        writeln!(
            text,
            "{}",
            serde_json::json!({
                "note_id": format!("n{i}"), "app_id": APP, "version": format!("1.{i}"),
                "released_at": date, "raw_text": format!("{}\nBug fixes and improvements", lines.join("\n")),
            })
        )
        .unwrap();
    }
    write(&notes, &text);
    let reviews = dir.join("src/reviews.jsonl");
    let mut text = String::new();
    for i in 0..48 {
        let body = if i % 3 == 2 {
            "love this app so much. great music".to_string()
        } else {
            format!("{}. {}", TOPICS[i % 4].1, "thanks")
        };
        writeln!(
            text,
            "{}",
            serde_json::json!({
                "review_id": format!("r{i}"), "app_id": APP,
                "posted_at": format!("2019-{:02}-{:02}", 1 + i % 12, 1 + i % 28),
                "rating": 1 + i % 5, "title": null, "body": body,
            })
        )
        .unwrap();
    }
    write(&reviews, &text);
    let seeds = dir.join("src/seeds.jsonl");
    let mut text = String::new();
    for t in TOPICS {
        writeln!(text, "{}", serde_json::json!({"text": t.1, "label": "informative"})).unwrap();
    }
    for t in ["love this app", "great music", "thanks so much", "so good"] {
        writeln!(text, "{}", serde_json::json!({"text": t, "label": "non-informative"})).unwrap();
    }
    write(&seeds, &text);
    (apps, notes, reviews, seeds)
}

pub fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    write(
        &path,
        r#"{"top_n": 5, "skipgram": {"dim": 16, "epochs": 3, "min_count": 1, "seed": 7}}"#,
    );
    path
}

/// Bag-of-words VEC1 rows for every sentence with at least one token.
pub fn bow_vectors(data: &Path) -> String {
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    for file in ["note_sentences.jsonl", "review_sentences.jsonl"] {
        for line in std::fs::read_to_string(data.join(file)).unwrap().lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            let lemmas: Vec<String> = v["tokens"]
                .as_array()
                .unwrap()
                .iter()
                .map(|t| t["lemma"].as_str().unwrap().to_string())
                .collect();
            if !lemmas.is_empty() {
                rows.push((v["sentence_id"].as_str().unwrap().to_string(), lemmas));
            }
        }
    }
    let vocab: BTreeMap<&str, usize> = {
        let mut words: Vec<&str> = rows.iter().flat_map(|(_, l)| l.iter().map(String::as_str)).collect();
        words.sort();
        words.dedup();
        words.into_iter().enumerate().map(|(i, w)| (w, i)).collect()
    };
    let mut out = format!("VEC1 {} {}\n", vocab.len(), rows.len());
    for (id, lemmas) in &rows {
        let mut v = vec![0u32; vocab.len()];
        for l in lemmas {
            v[vocab[l.as_str()]] += 1;
        }
        let vals: Vec<String> = v.iter().map(u32::to_string).collect();
        writeln!(out, "{id}\t{}", vals.join(" ")).unwrap();
    }
    out
}

/// A data directory carried through `match`.
pub struct Fixture {
    pub tmp: tempfile::TempDir,
    pub data: PathBuf,
    pub config: PathBuf,
}

impl Fixture {
    pub fn ingested() -> Fixture {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        let (apps, notes, reviews, _) = write_sources(tmp.path());
        let config = write_config(tmp.path());
        ok(
            &data,
            &[
                "ingest",
                "--app",
                APP,
                "--apps",
                apps.to_str().unwrap(),
                "--notes",
                notes.to_str().unwrap(),
                "--reviews",
                reviews.to_str().unwrap(),
            ],
        );
        Fixture { tmp, data, config }
    }

    pub fn run(&self, args: &[&str]) -> Value {
        let mut full = vec!["--config", self.config.to_str().unwrap()];
        full.extend_from_slice(args);
        ok(&self.data, &full)
    }

    pub fn raw(&self, args: &[&str]) -> Output {
        let mut full = vec!["--config", self.config.to_str().unwrap()];
        full.extend_from_slice(args);
        revnote(&self.data, &full)
    }

    /// Ingest through `embed-import`; stops before `match`.
    pub fn embedded() -> Fixture {
        let f = Fixture::ingested();
        f.run(&["preprocess"]);
        let seeds = f.tmp.path().join("src/seeds.jsonl");
        f.run(&["filter-train", "--seeds", seeds.to_str().unwrap()]);
        f.run(&["filter-apply"]);
        f.run(&["embed-train"]);
        let vec_path = f.tmp.path().join("bow.vec1");
        write(&vec_path, &bow_vectors(&f.data));
        f.run(&["embed-import", "--file", vec_path.to_str().unwrap()]);
        f
    }

    pub fn matched() -> Fixture {
        let f = Fixture::embedded();
        f.run(&["match", "--app", APP]);
        f
    }

    pub fn pair_ids(&self) -> Vec<String> {
        std::fs::read_to_string(self.data.join("pairs.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<Value>(l).unwrap()["pair_id"].as_str().unwrap().to_string())
            .collect()
    }
}
