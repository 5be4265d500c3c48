//! Line-delimited prediction store, used both as replay input and as the
//! run cache.
//!
//! One JSON object per line. A record is keyed by
//! `(id, configuration, regime, backend_tag, seed)`; sub-claim records leave
//! `configuration` and `regime` out.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClaimLabel2, EvidenceConfiguration, LabelRegime, PredictionRecord, SubClaimPrediction, VeracityLabel3};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StoreKey {
    pub id: String,
    pub configuration: Option<EvidenceConfiguration>,
    pub regime: Option<LabelRegime>,
    pub backend_tag: String,
    pub seed: u64,
}

impl StoreKey {
    pub fn subclaim(id: impl Into<String>, backend_tag: impl Into<String>, seed: u64) -> Self {
        Self {
            id: id.into(),
            configuration: None,
            regime: None,
            backend_tag: backend_tag.into(),
            seed,
        }
    }

    pub fn claim(
        id: impl Into<String>,
        configuration: EvidenceConfiguration,
        regime: LabelRegime,
        backend_tag: impl Into<String>,
        seed: u64,
    ) -> Self {
        Self {
            id: id.into(),
            configuration: Some(configuration),
            regime: Some(regime),
            backend_tag: backend_tag.into(),
            seed,
        }
    }

    pub fn is_claim(&self) -> bool {
        self.configuration.is_some()
    }
}

impl fmt::Display for StoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)?;
        if let (Some(c), Some(r)) = (&self.configuration, &self.regime) {
            write!(f, "/{c}/{r}")?;
        }
        write!(f, "/{}/seed={}", self.backend_tag, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub configuration: Option<EvidenceConfiguration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<LabelRegime>,
    pub backend_tag: String,
    pub seed: u64,
    pub label: VeracityLabel3,
    #[serde(default)]
    pub raw_output: String,
    /// SHA-256 of the rendered prompt that produced this answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
}

impl StoreRecord {
    pub fn key(&self) -> StoreKey {
        StoreKey {
            id: self.id.clone(),
            configuration: self.configuration,
            regime: self.regime.clone(),
            backend_tag: self.backend_tag.clone(),
            seed: self.seed,
        }
    }

    pub fn from_key(key: &StoreKey, label: VeracityLabel3, raw_output: String, prompt_hash: Option<String>) -> Self {
        Self {
            id: key.id.clone(),
            configuration: key.configuration,
            regime: key.regime.clone(),
            backend_tag: key.backend_tag.clone(),
            seed: key.seed,
            label,
            raw_output,
            prompt_hash,
        }
    }

    fn check(&self) -> Result<(), String> {
        match (&self.configuration, &self.regime) {
            (Some(_), Some(_)) if self.label == VeracityLabel3::U => Err("claim record with label U".into()),
            (Some(_), Some(_)) | (None, None) => Ok(()),
            _ => Err("configuration and regime must be given together".into()),
        }
    }

    pub fn to_claim_prediction(&self) -> Option<PredictionRecord> {
        Some(PredictionRecord {
            claim_id: self.id.clone(),
            label: ClaimLabel2::try_from(self.label).ok()?,
            raw_output: self.raw_output.clone(),
            configuration: self.configuration?,
            regime: self.regime.clone()?,
            backend_tag: self.backend_tag.clone(),
            seed: self.seed,
        })
    }

    pub fn to_subclaim_prediction(&self) -> Option<SubClaimPrediction> {
        if self.configuration.is_some() {
            return None;
        }
        Some(SubClaimPrediction {
            subclaim_id: self.id.clone(),
            label: self.label,
            raw_output: self.raw_output.clone(),
            backend_tag: self.backend_tag.clone(),
            seed: self.seed,
        })
    }
}

impl From<&PredictionRecord> for StoreRecord {
    fn from(p: &PredictionRecord) -> Self {
        Self {
            id: p.claim_id.clone(),
            configuration: Some(p.configuration),
            regime: Some(p.regime.clone()),
            backend_tag: p.backend_tag.clone(),
            seed: p.seed,
            label: p.label.into(),
            raw_output: p.raw_output.clone(),
            prompt_hash: None,
        }
    }
}

impl From<&SubClaimPrediction> for StoreRecord {
    fn from(p: &SubClaimPrediction) -> Self {
        Self {
            id: p.subclaim_id.clone(),
            configuration: None,
            regime: None,
            backend_tag: p.backend_tag.clone(),
            seed: p.seed,
            label: p.label,
            raw_output: p.raw_output.clone(),
            prompt_hash: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot access prediction store {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate key {key}")]
    DuplicateKey { line: usize, key: StoreKey },
    #[error("no stored prediction for {0}")]
    MissingKey(StoreKey),
}

/// What to do when a key appears twice while loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duplicates {
    /// Replay inputs must be unambiguous.
    Reject,
    /// Cache files are append-only; the latest answer wins.
    LastWins,
}

/// Read-only after load; safe to share across tasks.
#[derive(Debug, Clone, Default)]
pub struct PredictionStore {
    records: Vec<StoreRecord>,
    index: HashMap<StoreKey, usize>,
}

impl PredictionStore {
    pub fn from_records(records: impl IntoIterator<Item = StoreRecord>, duplicates: Duplicates) -> Result<Self, StoreError> {
        let mut store = Self::default();
        for (i, record) in records.into_iter().enumerate() {
            store.insert(record, i + 1, duplicates)?;
        }
        Ok(store)
    }

    fn insert(&mut self, record: StoreRecord, line: usize, duplicates: Duplicates) -> Result<(), StoreError> {
        record.check().map_err(|message| StoreError::Parse { line, message })?;
        let key = record.key();
        match self.index.get(&key) {
            Some(_) if duplicates == Duplicates::Reject => Err(StoreError::DuplicateKey { line, key }),
            Some(&at) => {
                self.records[at] = record;
                Ok(())
            }
            None => {
                self.index.insert(key, self.records.len());
                self.records.push(record);
                Ok(())
            }
        }
    }

    pub fn read(reader: impl BufRead, duplicates: Duplicates) -> Result<Self, StoreError> {
        let mut store = Self::default();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| StoreError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: StoreRecord = serde_json::from_str(&line).map_err(|e| StoreError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            store.insert(record, line_no, duplicates)?;
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>, duplicates: Duplicates) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read(BufReader::new(file), duplicates)
    }

    /// A missing file loads as an empty store.
    pub fn load_or_empty(path: impl AsRef<Path>, duplicates: Duplicates) -> Result<Self, StoreError> {
        if path.as_ref().exists() {
            Self::load(path, duplicates)
        } else {
            Ok(Self::default())
        }
    }

    pub fn get(&self, key: &StoreKey) -> Option<&StoreRecord> {
        self.index.get(key).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[StoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes every record as one JSON line, in insertion order.
    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for r in &self.records {
            write_record(&mut out, r)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let io = |source| StoreError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        self.write(&mut file).map_err(io)?;
        file.flush().map_err(io)
    }
}

pub fn write_record(mut out: impl Write, record: &StoreRecord) -> std::io::Result<()> {
    let line = serde_json::to_string(record).expect("store records serialize");
    writeln!(out, "{line}")
}

/// Exact-key retrieval; no fuzzy matching.
pub fn replay_lookup<'a>(key: &StoreKey, store: &'a PredictionStore) -> Result<&'a StoreRecord, StoreError> {
    store.get(key).ok_or_else(|| StoreError::MissingKey(key.clone()))
}
