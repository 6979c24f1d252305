//! The bundled data files are generated (see `scripts/`). Pinning their hashes
//! makes accidental edits show up as a test failure; after an intentional
//! regeneration, update the digest here.

use sha2::{Digest, Sha256};

const PINNED: [(&str, &str); 5] = [
    ("lemma_exceptions.tsv", "9aab7ffba5d0a38e86bdbf73273315455b41d439c7903c679f9213733aa6ab7d"),
    ("pos_lexicon.tsv", "60baac017f94721ea0064529b08093046b15e892f4be421eac085e994dcafa3e"),
    ("pos_supplement.tsv", "e9f3fb934f7636a4aeb1c4abbec7b4ccb898fae21a440f4e0b52775caaf31938"),
    ("seed_labels.jsonl", "88c901b6978bdb20b4f111c489392a8e5b9be490fc6d1e4211718da7ce7ac300"),
    ("stopwords.txt", "9b60afc43e4fb52c4cdfe08a78b647e63263819b147fcf9a1da089fb0fe770e5"),
];

#[test]
fn data_files_match_pinned_digests() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    for (name, expected) in PINNED {
        let bytes = std::fs::read(dir.join(name)).unwrap();
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(digest, expected, "{name} changed");
    }
}

#[test]
fn bundled_resources_parse() {
    let lexicon = revnote::postag::PosLexicon::bundled();
    assert!(lexicon.len() > 70_000);
    assert!(lexicon.contains("playlist"));
    let tokens = revnote::preprocess::normalize_tokens("The playlists were crashing");
    let lemmas: Vec<&str> = tokens.iter().map(|t| t.lemma.as_str()).collect();
    assert_eq!(lemmas, ["playlist", "crash"]);
}
