//! The files under `data/` are generated. Set `DECOMPCHECK_BLESS=1` to
//! rewrite them after changing the generator.

use std::path::PathBuf;

use decompcheck::backends::{Duplicates, PredictionStore};
use decompcheck::ingest::{dataset_to_string, load_dataset, SCHEMA_VERSION};
use decompcheck::synthetic::{generate_corpus, replay_fixture_store, CorpusConfig};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn check(relative: &str, expected: &str) {
    let path = data_dir().join(relative);
    if std::env::var_os("DECOMPCHECK_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, expected).unwrap();
        return;
    }
    let found = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(found == expected, "{relative} is stale; rerun with DECOMPCHECK_BLESS=1");
}

fn store_text(records: Vec<decompcheck::backends::StoreRecord>) -> String {
    let store = PredictionStore::from_records(records, Duplicates::Reject).unwrap();
    let mut buf = Vec::new();
    store.write(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn sample_corpus_matches_generator() {
    let ds = generate_corpus(&CorpusConfig::sample()).unwrap();
    check("sample_corpus.jsonl", &dataset_to_string(&ds));
}

#[test]
fn small_corpus_matches_generator() {
    let ds = generate_corpus(&CorpusConfig::small()).unwrap();
    check("small_corpus.jsonl", &dataset_to_string(&ds));
}

#[test]
fn replay_fixture_matches_generator() {
    let ds = generate_corpus(&CorpusConfig::replay_fixture()).unwrap();
    check("replay_fixture/dataset.jsonl", &dataset_to_string(&ds));
    check("replay_fixture/store.jsonl", &store_text(replay_fixture_store(&ds)));
}

#[test]
fn shipped_files_load() {
    if std::env::var_os("DECOMPCHECK_BLESS").is_some() {
        return;
    }
    let ds = load_dataset(data_dir().join("replay_fixture/dataset.jsonl"), SCHEMA_VERSION).unwrap();
    assert_eq!(ds.claims().len(), 14);
    let store = PredictionStore::load(data_dir().join("replay_fixture/store.jsonl"), Duplicates::Reject).unwrap();
    assert_eq!(store.len(), ds.subclaims().len() + 24);
    let sample = load_dataset(data_dir().join("sample_corpus.jsonl"), SCHEMA_VERSION).unwrap();
    assert_eq!((sample.claims().len(), sample.subclaims().len()), (399, 1169));
}
