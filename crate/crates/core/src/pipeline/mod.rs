//! Experiment runs.
//!
//! A run expands into items, one per (seed, claim) or (seed, sub-claim).
//! Each item is assembled, rendered, fitted to the context limit, sent to the
//! backend and parsed. Items run concurrently up to the backend's in-flight
//! limit; results are collected by item position, so completion order never
//! shows in the output.
//!
//! With a cache file, every answered item is appended as soon as it arrives
//! and reused on the next run when its key and prompt hash match. At the end
//! the file is rewritten: records from other runs first, then this run's
//! records in item order. An interrupted run resumed later therefore leaves
//! the same file as an uninterrupted one.
//!
//! Item failures (backend errors, unparseable verdicts, prompts that cannot
//! fit the context) are collected in [`RunSummary::failures`]; the run goes
//! on. Broken preconditions, such as a missing gold label under the oracle
//! regime, abort before any backend call.

mod aggregate;
pub mod evaluate;
mod manifest;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{
    assemble_input, assemble_subclaim_input, enforce_context, render_prompt, AlignmentError, ContextLimits,
    PromptKind, PromptTemplate, StructuredPrompt, TemplateSet, TokenEstimator,
};
use crate::backends::store::write_record;
use crate::backends::{
    parse_claim_verdict, parse_subclaim_verdict, Backend, Duplicates, GenerationRequest, PredictionStore,
    StoreError, StoreKey, StoreRecord,
};
use crate::ingest::sha256_hex;
use crate::model::{
    Dataset, EvidenceConfiguration, LabelRegime, PredictionRecord, SubClaimPrediction, VeracityLabel3,
};

pub use aggregate::{rule_aggregate, AggregateError, AggregationRule};
pub use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no seeds given")]
    NoSeeds,
    #[error("claim {0:?} has no evidence documents")]
    NoDocuments(String),
    #[error("unknown claim {0:?}")]
    UnknownClaim(String),
    #[error("prediction source has no labels for seed {0}")]
    MissingSourceSeed(u64),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cache file {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Knobs shared by sub-claim and claim runs.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seeds: Vec<u64>,
    pub templates: TemplateSet,
    pub subclaim_template: PromptTemplate,
    pub limits: ContextLimits,
    pub estimator: TokenEstimator,
    /// Append-only prediction cache; `None` disables caching.
    pub cache_path: Option<PathBuf>,
    /// Map unparseable sub-claim outputs to U instead of failing the item.
    pub lenient_parse: bool,
    /// Stop after this many backend calls; remaining items are skipped.
    pub max_calls: Option<usize>,
    /// Overrides the backend's in-flight limit when lower.
    pub max_in_flight: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            templates: TemplateSet::default(),
            subclaim_template: PromptTemplate::default_subclaim(),
            limits: ContextLimits::default(),
            estimator: TokenEstimator::default(),
            cache_path: None,
            lenient_parse: false,
            max_calls: None,
            max_in_flight: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The prompt could not be fitted to the context limit.
    Context,
    Backend,
    /// The output had no well-formed verdict.
    Parse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub key: StoreKey,
    pub kind: FailureKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<T> {
    /// Successful records in item order (seed-major, dataset order).
    pub records: Vec<T>,
    pub failures: Vec<ItemFailure>,
    /// Items answered from the cache.
    pub cached: usize,
    /// Items answered by the backend in this run.
    pub generated: usize,
    /// Items left out because `max_calls` was reached.
    pub skipped: usize,
    /// Claims left out of scope because their gold label is U.
    pub excluded: Vec<String>,
}

impl<T> RunSummary<T> {
    pub fn items(&self) -> usize {
        self.records.len() + self.failures.len() + self.skipped
    }

    pub fn parse_failures(&self) -> usize {
        self.failures.iter().filter(|f| f.kind == FailureKind::Parse).count()
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.skipped == 0
    }
}

/// Sub-claim labels feeding a predicted regime, per seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSource {
    by_seed: BTreeMap<u64, HashMap<String, VeracityLabel3>>,
}

impl PredictionSource {
    pub fn from_predictions<'a>(predictions: impl IntoIterator<Item = &'a SubClaimPrediction>) -> Self {
        let mut by_seed: BTreeMap<u64, HashMap<String, VeracityLabel3>> = BTreeMap::new();
        for p in predictions {
            by_seed.entry(p.seed).or_default().insert(p.subclaim_id.clone(), p.label);
        }
        Self { by_seed }
    }

    /// One label set used for every seed.
    pub fn single(labels: HashMap<String, VeracityLabel3>) -> Self {
        Self {
            by_seed: BTreeMap::from([(0, labels)]),
        }
    }

    /// Labels for `seed`: the matching seed, or the only seed present.
    pub fn labels_for(&self, seed: u64) -> Option<&HashMap<String, VeracityLabel3>> {
        self.by_seed.get(&seed).or_else(|| match self.by_seed.len() {
            1 => self.by_seed.values().next(),
            _ => None,
        })
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.by_seed.keys().copied().collect()
    }
}

struct Item {
    key: StoreKey,
    structured: StructuredPrompt,
    prompt: Result<String, String>,
}

impl Item {
    fn new(key: StoreKey, structured: StructuredPrompt, template: &PromptTemplate, options: &RunOptions) -> Result<Self, PipelineError> {
        let rendered = render_prompt(&structured, template)?;
        let limit = options.limits.limit_for(structured.kind);
        let prompt = match enforce_context(&rendered, template, limit, &options.estimator) {
            Ok(r) => Ok(r.into_string()),
            Err(e @ AlignmentError::Untruncatable { .. }) => Err(e.to_string()),
            Err(e) => return Err(e.into()),
        };
        Ok(Self { key, structured, prompt })
    }
}

struct Cache {
    path: Option<PathBuf>,
    previous: PredictionStore,
    writer: Option<Mutex<std::io::BufWriter<std::fs::File>>>,
}

impl Cache {
    fn open(path: Option<&Path>) -> Result<Self, PipelineError> {
        let Some(path) = path else {
            return Ok(Self {
                path: None,
                previous: PredictionStore::default(),
                writer: None,
            });
        };
        let previous = PredictionStore::load_or_empty(path, Duplicates::LastWins)?;
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| cache_io(path, source))?;
        Ok(Self {
            path: Some(path.to_path_buf()),
            previous,
            writer: Some(Mutex::new(std::io::BufWriter::new(file))),
        })
    }

    fn lookup(&self, key: &StoreKey, prompt_hash: &str) -> Option<&StoreRecord> {
        self.previous
            .get(key)
            .filter(|r| r.prompt_hash.as_deref() == Some(prompt_hash))
    }

    fn append(&self, record: &StoreRecord) -> Result<(), PipelineError> {
        if let (Some(w), Some(path)) = (&self.writer, &self.path) {
            let mut w = w.lock().expect("cache writer poisoned");
            write_record(&mut *w, record)
                .and_then(|_| w.flush())
                .map_err(|source| cache_io(path, source))?;
        }
        Ok(())
    }

    /// Rewrites the file: foreign records, then this run's records in order.
    fn finish(self, run_keys: &HashSet<StoreKey>, records: &[StoreRecord]) -> Result<(), PipelineError> {
        let Some(path) = self.path else { return Ok(()) };
        drop(self.writer);
        let mut text = Vec::new();
        for r in self.previous.records().iter().filter(|r| !run_keys.contains(&r.key())) {
            write_record(&mut text, r).expect("write to memory");
        }
        for r in records {
            write_record(&mut text, r).expect("write to memory");
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text).map_err(|source| cache_io(&tmp, source))?;
        std::fs::rename(&tmp, &path).map_err(|source| cache_io(&path, source))
    }
}

fn cache_io(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::CacheIo {
        path: path.display().to_string(),
        source,
    }
}

enum Outcome {
    Done(StoreRecord, bool),
    Failed(ItemFailure),
    Skipped,
}

async fn execute(
    items: Vec<Item>,
    backend: &dyn Backend,
    options: &RunOptions,
    parse: impl Fn(&str) -> Result<VeracityLabel3, String> + Sync,
) -> Result<(Vec<StoreRecord>, Vec<ItemFailure>, usize, usize, usize), PipelineError> {
    let cache = Cache::open(options.cache_path.as_deref())?;
    let run_keys: HashSet<StoreKey> = items.iter().map(|i| i.key.clone()).collect();

    // decide up front which items may call the backend, so `max_calls`
    // always stops at the same items regardless of completion order
    let mut budget = options.max_calls.unwrap_or(usize::MAX);
    let plan: Vec<(Item, Option<String>, bool)> = items
        .into_iter()
        .map(|item| {
            let hash = item.prompt.as_ref().ok().map(|p| sha256_hex(p.as_bytes()));
            let cached = hash.as_deref().is_some_and(|h| cache.lookup(&item.key, h).is_some());
            let allowed = cached
                || item.prompt.is_err()
                || (budget > 0 && {
                    budget -= 1;
                    true
                });
            (item, hash, allowed)
        })
        .collect();

    let in_flight = options
        .max_in_flight
        .map_or(backend.max_in_flight(), |m| m.min(backend.max_in_flight()))
        .max(1);
    let cache_ref = &cache;
    let parse = &parse;
    let outcomes: Vec<(usize, Result<Outcome, PipelineError>)> = stream::iter(plan.into_iter().enumerate())
        .map(|(pos, (item, hash, allowed))| async move {
            let outcome = async {
                let prompt = match (&item.prompt, allowed) {
                    (Err(msg), _) => {
                        return Ok(Outcome::Failed(ItemFailure {
                            key: item.key.clone(),
                            kind: FailureKind::Context,
                            message: msg.clone(),
                            raw_output: None,
                        }))
                    }
                    (Ok(_), false) => return Ok(Outcome::Skipped),
                    (Ok(p), true) => p,
                };
                let hash = hash.expect("hash of rendered prompt");
                if let Some(r) = cache_ref.lookup(&item.key, &hash) {
                    return Ok(Outcome::Done(r.clone(), true));
                }
                let request = GenerationRequest {
                    key: &item.key,
                    prompt,
                    structured: &item.structured,
                };
                let response = match backend.generate(&request).await {
                    Ok(r) => r,
                    Err(e) => {
                        return Ok(Outcome::Failed(ItemFailure {
                            key: item.key.clone(),
                            kind: FailureKind::Backend,
                            message: e.to_string(),
                            raw_output: None,
                        }))
                    }
                };
                match parse(&response.raw_text) {
                    Ok(label) => {
                        let record = StoreRecord::from_key(&item.key, label, response.raw_text, Some(hash));
                        cache_ref.append(&record)?;
                        Ok(Outcome::Done(record, false))
                    }
                    Err(message) => Ok(Outcome::Failed(ItemFailure {
                        key: item.key.clone(),
                        kind: FailureKind::Parse,
                        message,
                        raw_output: Some(response.raw_text),
                    })),
                }
            }
            .await;
            (pos, outcome)
        })
        .buffer_unordered(in_flight)
        .collect()
        .await;

    let mut ordered: Vec<Option<Outcome>> = (0..outcomes.len()).map(|_| None).collect();
    for (pos, outcome) in outcomes {
        ordered[pos] = Some(outcome?);
    }
    let (mut records, mut failures) = (Vec::new(), Vec::new());
    let (mut cached, mut generated, mut skipped) = (0, 0, 0);
    for outcome in ordered.into_iter().map(|o| o.expect("every position filled")) {
        match outcome {
            Outcome::Done(r, from_cache) => {
                if from_cache {
                    cached += 1;
                } else {
                    generated += 1;
                }
                records.push(r);
            }
            Outcome::Failed(f) => failures.push(f),
            Outcome::Skipped => skipped += 1,
        }
    }
    cache.finish(&run_keys, &records)?;
    Ok((records, failures, cached, generated, skipped))
}

/// Verifies every sub-claim against the full evidence of its parent claim,
/// once per seed.
pub async fn run_subclaim_experiment(
    dataset: &Dataset,
    backend: &dyn Backend,
    options: &RunOptions,
) -> Result<RunSummary<SubClaimPrediction>, PipelineError> {
    if options.seeds.is_empty() {
        return Err(PipelineError::NoSeeds);
    }
    for claim in dataset.claims() {
        if !claim.subclaim_ids.is_empty() && dataset.documents_of(&claim.id).next().is_none() {
            return Err(PipelineError::NoDocuments(claim.id.clone()));
        }
    }
    let mut items = Vec::new();
    for &seed in &options.seeds {
        for sub in dataset.subclaims() {
            let key = StoreKey::subclaim(&sub.id, backend.tag(), seed);
            let structured = assemble_subclaim_input(sub, dataset);
            items.push(Item::new(key, structured, &options.subclaim_template, options)?);
        }
    }
    let lenient = options.lenient_parse;
    let (records, failures, cached, generated, skipped) = execute(items, backend, options, |raw| {
        match parse_subclaim_verdict(raw) {
            Ok(l) => Ok(l),
            Err(_) if lenient => Ok(VeracityLabel3::U),
            Err(e) => Err(e.to_string()),
        }
    })
    .await?;
    Ok(RunSummary {
        records: records.iter().filter_map(StoreRecord::to_subclaim_prediction).collect(),
        failures,
        cached,
        generated,
        skipped,
        excluded: Vec::new(),
    })
}

/// Claim verdicts under one configuration and label regime, once per seed.
///
/// Claims with gold label U are out of scope and never produce a record.
/// Under a predicted regime, `prediction_source` supplies the sub-claim
/// labels that take the place of gold labels in the prompt.
pub async fn run_claim_experiment(
    dataset: &Dataset,
    configuration: EvidenceConfiguration,
    regime: &LabelRegime,
    backend: &dyn Backend,
    options: &RunOptions,
    prediction_source: Option<&PredictionSource>,
) -> Result<RunSummary<PredictionRecord>, PipelineError> {
    if options.seeds.is_empty() {
        return Err(PipelineError::NoSeeds);
    }
    let template = options.templates.for_configuration(configuration);
    let needs_source = configuration.carries_labels() && matches!(regime, LabelRegime::Predicted(_));
    let mut excluded = Vec::new();
    let mut items = Vec::new();
    for &seed in &options.seeds {
        let labels = match (needs_source, prediction_source) {
            (true, Some(src)) => Some(src.labels_for(seed).ok_or(PipelineError::MissingSourceSeed(seed))?),
            (true, None) => return Err(AlignmentError::MissingPredictionSource.into()),
            (false, _) => None,
        };
        for claim in dataset.claims() {
            if claim.gold_label == Some(VeracityLabel3::U) {
                if seed == options.seeds[0] {
                    excluded.push(claim.id.clone());
                }
                continue;
            }
            let key = StoreKey::claim(&claim.id, configuration, regime.clone(), backend.tag(), seed);
            let structured = assemble_input(claim, dataset, configuration, regime, labels)?;
            items.push(Item::new(key, structured, template, options)?);
        }
    }
    let (records, failures, cached, generated, skipped) = execute(items, backend, options, |raw| {
        parse_claim_verdict(raw).map(VeracityLabel3::from).map_err(|e| e.to_string())
    })
    .await?;
    Ok(RunSummary {
        records: records.iter().filter_map(StoreRecord::to_claim_prediction).collect(),
        failures,
        cached,
        generated,
        skipped,
        excluded,
    })
}

/// Claim verdicts from sub-claim labels with a fixed rule instead of a model.
/// Records carry `backend_tag = "rule:<rule>"`; claims whose labels cannot be
/// aggregated are reported as failures.
pub fn run_rule_aggregation(
    dataset: &Dataset,
    configuration: EvidenceConfiguration,
    regime: &LabelRegime,
    rule: AggregationRule,
    seeds: &[u64],
    prediction_source: Option<&PredictionSource>,
) -> Result<RunSummary<PredictionRecord>, PipelineError> {
    if seeds.is_empty() {
        return Err(PipelineError::NoSeeds);
    }
    let tag = format!("rule:{}", rule.as_str());
    let mut summary = RunSummary {
        records: Vec::new(),
        failures: Vec::new(),
        cached: 0,
        generated: 0,
        skipped: 0,
        excluded: Vec::new(),
    };
    for &seed in seeds {
        let labels = match regime {
            LabelRegime::Predicted(_) => Some(
                prediction_source
                    .ok_or(AlignmentError::MissingPredictionSource)?
                    .labels_for(seed)
                    .ok_or(PipelineError::MissingSourceSeed(seed))?,
            ),
            _ => None,
        };
        for claim in dataset.claims() {
            if claim.gold_label == Some(VeracityLabel3::U) {
                if seed == seeds[0] {
                    summary.excluded.push(claim.id.clone());
                }
                continue;
            }
            let key = StoreKey::claim(&claim.id, configuration, regime.clone(), &tag, seed);
            let mut sub_labels = Vec::new();
            for sub in dataset.subclaims_of(claim) {
                let label = match (regime, labels) {
                    (LabelRegime::Predicted(_), Some(map)) => map.get(&sub.id).copied(),
                    _ => sub.gold_label,
                };
                sub_labels.push(label.ok_or_else(|| match regime {
                    LabelRegime::Predicted(_) => AlignmentError::MissingPrediction(sub.id.clone()),
                    _ => AlignmentError::MissingLabel(sub.id.clone()),
                })?);
            }
            match rule_aggregate(&sub_labels, rule) {
                Ok(label) => summary.records.push(PredictionRecord {
                    claim_id: claim.id.clone(),
                    label,
                    raw_output: crate::backends::format_verdict(label),
                    configuration,
                    regime: regime.clone(),
                    backend_tag: tag.clone(),
                    seed,
                }),
                Err(e) => summary.failures.push(ItemFailure {
                    key,
                    kind: FailureKind::Parse,
                    message: e.to_string(),
                    raw_output: None,
                }),
            }
        }
    }
    summary.generated = summary.records.len();
    Ok(summary)
}

/// The prompt text a claim item would send, for inspection and tests.
pub fn claim_prompt(
    dataset: &Dataset,
    claim_id: &str,
    configuration: EvidenceConfiguration,
    regime: &LabelRegime,
    labels: Option<&HashMap<String, VeracityLabel3>>,
    options: &RunOptions,
) -> Result<String, PipelineError> {
    let claim = dataset
        .claim(claim_id)
        .ok_or_else(|| PipelineError::UnknownClaim(claim_id.to_string()))?;
    let template = options.templates.for_configuration(configuration);
    let structured = assemble_input(claim, dataset, configuration, regime, labels)?;
    let rendered = render_prompt(&structured, template)?;
    let limit = options.limits.limit_for(PromptKind::Claim(configuration));
    Ok(enforce_context(&rendered, template, limit, &options.estimator)?.into_string())
}
