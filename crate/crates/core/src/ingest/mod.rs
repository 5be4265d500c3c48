//! Dataset files: loading, writing, and the dataset-level transforms
//! (temporal filtering, complexity filtering, splitting, label distribution).
//!
//! A dataset file is line-delimited JSON. The first non-blank line is a header
//! record carrying the schema version; every following line is one record
//! tagged by its `kind`:
//!
//! ```text
//! {"kind":"header","schema_version":"1.0"}
//! {"kind":"claim","id":"c1","text":"...","event":"ev1","timestamp":1427180400,"gold_label":"T","subclaim_ids":["s1"]}
//! {"kind":"subclaim","id":"s1","claim_id":"c1","text":"...","gold_label":"T","span_ids":["sp1"]}
//! {"kind":"document","id":"d1","claim_id":"c1","text":"...","published_at":1427170000}
//! {"kind":"span","id":"sp1","subclaim_id":"s1","doc_id":"d1","text":"...","char_range":[0,12]}
//! {"kind":"split","id":"s1","split":"test"}
//! ```
//!
//! `docs/dataset-schema.md` is the normative description.

mod complexity;
mod distribution;
mod split;
mod temporal;

pub use complexity::{complexity_filter, ComplexityThresholds, HeuristicVerbCounter, VerbCounter};
pub use distribution::{label_distribution, DistributionRow, DistributionTable, Level, SplitName};
pub use split::{assign_split, split_dataset, SplitLevel, SplitMode};
pub use temporal::{filter_temporal, TemporalMode};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Claim, Dataset, EvidenceDocument, EvidenceSpan, IntegrityError, Split, SubClaim};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing header record with schema_version")]
    MissingHeader { line: usize },
    #[error("schema version mismatch: expected {expected:?}, file declares {found:?}")]
    SchemaVersion { expected: String, found: String },
    #[error("line {line}: duplicate split assignment for {id:?}")]
    DuplicateSplit { line: usize, id: String },
    #[error(transparent)]
    Integrity(#[from] IntegrityError),
    #[error("{kind} {id:?} has no timestamp but temporal filtering was requested")]
    MissingTimestamp { kind: &'static str, id: String },
    #[error("no items in the {level} {split} split")]
    EmptySplit { level: Level, split: SplitName },
    #[error("{kind} {id:?} has no gold label")]
    MissingGold { kind: &'static str, id: String },
    #[error("unknown event {0:?}")]
    UnknownEvent(String),
    #[error("split ratio {0} outside (0, 1)")]
    InvalidRatio(f64),
    #[error("invalid window: start {start} is after end {end}")]
    InvalidWindow { start: i64, end: i64 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Header { schema_version: String },
    Claim(Claim),
    Subclaim(SubClaim),
    Document(EvidenceDocument),
    Span(EvidenceSpan),
    Split { id: String, split: Split },
}

/// Loads and validates a dataset file. All-or-nothing: any parse or
/// integrity failure rejects the whole file.
pub fn load_dataset(path: impl AsRef<Path>, schema_version: &str) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(BufReader::new(file), schema_version).map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn read_dataset(reader: impl BufRead, schema_version: &str) -> Result<Dataset, IngestError> {
    let mut claims = Vec::new();
    let mut subclaims = Vec::new();
    let mut documents = Vec::new();
    let mut spans = Vec::new();
    let mut assignment: BTreeMap<String, Split> = BTreeMap::new();
    let mut seen_header = false;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: String::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| IngestError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        match record {
            Record::Header { schema_version: found } => {
                if seen_header {
                    return Err(IngestError::Parse {
                        line: line_no,
                        message: "second header record".into(),
                    });
                }
                if found != schema_version {
                    return Err(IngestError::SchemaVersion {
                        expected: schema_version.to_string(),
                        found,
                    });
                }
                seen_header = true;
                continue;
            }
            _ if !seen_header => return Err(IngestError::MissingHeader { line: line_no }),
            Record::Claim(c) => claims.push(c),
            Record::Subclaim(s) => subclaims.push(s),
            Record::Document(d) => documents.push(d),
            Record::Span(s) => spans.push(s),
            Record::Split { id, split } => {
                if assignment.insert(id.clone(), split).is_some() {
                    return Err(IngestError::DuplicateSplit { line: line_no, id });
                }
            }
        }
    }
    if !seen_header {
        return Err(IngestError::MissingHeader { line: 1 });
    }
    let assignment = (!assignment.is_empty()).then_some(assignment);
    Ok(Dataset::new(claims, subclaims, documents, spans, assignment)?)
}

/// Writes the dataset in canonical order: header, claims, sub-claims,
/// documents, spans, split assignments.
pub fn write_dataset(dataset: &Dataset, mut out: impl Write) -> std::io::Result<()> {
    fn line<W: Write>(out: &mut W, record: &Record) -> std::io::Result<()> {
        serde_json::to_writer(&mut *out, record)?;
        out.write_all(b"\n")
    }
    line(
        &mut out,
        &Record::Header {
            schema_version: SCHEMA_VERSION.to_string(),
        },
    )?;
    for c in dataset.claims() {
        line(&mut out, &Record::Claim(c.clone()))?;
    }
    for s in dataset.subclaims() {
        line(&mut out, &Record::Subclaim(s.clone()))?;
    }
    for d in dataset.documents() {
        line(&mut out, &Record::Document(d.clone()))?;
    }
    for s in dataset.spans() {
        line(&mut out, &Record::Span(s.clone()))?;
    }
    if let Some(assignment) = dataset.split_assignment() {
        for (id, split) in assignment {
            line(
                &mut out,
                &Record::Split {
                    id: id.clone(),
                    split: *split,
                },
            )?;
        }
    }
    Ok(())
}

pub fn dataset_to_string(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    write_dataset(dataset, &mut file).map_err(io_err)?;
    file.flush().map_err(io_err)
}

/// SHA-256 of the canonical serialization, hex encoded.
pub fn dataset_hash(dataset: &Dataset) -> String {
    sha256_hex(dataset_to_string(dataset).as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VeracityLabel3;

    const SMALL: &str = r#"{"kind":"header","schema_version":"1.0"}
{"kind":"claim","id":"c1","text":"Flight crashed. All died.","event":"ev1","timestamp":100,"gold_label":"T","subclaim_ids":["s1","s2"]}
{"kind":"subclaim","id":"s1","claim_id":"c1","text":"Flight crashed.","gold_label":"T","span_ids":["sp1"]}
{"kind":"subclaim","id":"s2","claim_id":"c1","text":"All died.","gold_label":"U","span_ids":["sp2"]}
{"kind":"document","id":"d1","claim_id":"c1","text":"The flight crashed in the Alps.","published_at":50}
{"kind":"span","id":"sp1","subclaim_id":"s1","doc_id":"d1","text":"The flight crashed","char_range":[0,18]}
{"kind":"span","id":"sp2","subclaim_id":"s2","doc_id":"d1","text":"in the Alps."}
"#;

    #[test]
    fn loads_small_file() {
        let ds = read_dataset(SMALL.as_bytes(), SCHEMA_VERSION).unwrap();
        assert_eq!(ds.claims().len(), 1);
        assert_eq!(ds.subclaims().len(), 2);
        assert_eq!(ds.documents().len(), 1);
        assert_eq!(ds.spans().len(), 2);
        assert_eq!(ds.subclaim("s2").unwrap().gold_label, Some(VeracityLabel3::U));
    }

    #[test]
    fn dangling_doc_names_id() {
        let bad = SMALL.replace(r#""doc_id":"d1","text":"in the"#, r#""doc_id":"d7","text":"in the"#);
        let err = read_dataset(bad.as_bytes(), SCHEMA_VERSION).unwrap_err();
        assert!(err.to_string().contains("\"d7\""), "{err}");
    }

    #[test]
    fn parse_error_carries_line_number() {
        let bad = SMALL.replace(r#""gold_label":"U""#, r#""gold_label":"X""#);
        match read_dataset(bad.as_bytes(), SCHEMA_VERSION).unwrap_err() {
            IngestError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = SMALL.replace(r#""event":"ev1","#, r#""event":"ev1","extra":1,"#);
        assert!(matches!(
            read_dataset(bad.as_bytes(), SCHEMA_VERSION),
            Err(IngestError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn header_required_and_versioned() {
        let no_header: String = SMALL.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            read_dataset(no_header.as_bytes(), SCHEMA_VERSION),
            Err(IngestError::MissingHeader { .. })
        ));
        assert!(matches!(
            read_dataset(SMALL.as_bytes(), "2.0"),
            Err(IngestError::SchemaVersion { .. })
        ));
    }

    #[test]
    fn duplicate_id_rejected() {
        let dup = format!(
            "{SMALL}{}\n",
            r#"{"kind":"document","id":"d1","claim_id":"c1","text":"again"}"#
        );
        let err = read_dataset(dup.as_bytes(), SCHEMA_VERSION).unwrap_err();
        assert!(err.to_string().contains("duplicate document id"), "{err}");
    }

    #[test]
    fn canonical_write_round_trips() {
        let ds = read_dataset(SMALL.as_bytes(), SCHEMA_VERSION).unwrap();
        let text = dataset_to_string(&ds);
        let back = read_dataset(text.as_bytes(), SCHEMA_VERSION).unwrap();
        assert_eq!(ds, back);
        assert_eq!(dataset_hash(&ds), dataset_hash(&back));
    }
}
