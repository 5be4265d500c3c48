//! Domain types for complex claims, their sub-claims and the evidence attached
//! to both.
//!
//! All values are immutable once a [`Dataset`] is built; [`Dataset::new`] runs
//! the full referential-integrity check so a `Dataset` in hand is always
//! closed over its ids.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Sub-claim (and raw claim-level) veracity: true, false or unverified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VeracityLabel3 {
    T,
    F,
    U,
}

/// Claim-level verdict used for evaluation. Unverified has no image here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimLabel2 {
    T,
    F,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label {0:?}")]
pub struct LabelParseError(pub String);

impl VeracityLabel3 {
    pub const ALL: [VeracityLabel3; 3] = [VeracityLabel3::T, VeracityLabel3::F, VeracityLabel3::U];

    pub fn as_str(self) -> &'static str {
        match self {
            VeracityLabel3::T => "T",
            VeracityLabel3::F => "F",
            VeracityLabel3::U => "U",
        }
    }

    /// `T`/`F` map to the claim-level label; `U` has no image.
    pub fn to_claim_label(self) -> Option<ClaimLabel2> {
        match self {
            VeracityLabel3::T => Some(ClaimLabel2::T),
            VeracityLabel3::F => Some(ClaimLabel2::F),
            VeracityLabel3::U => None,
        }
    }

    pub fn is_verifiable(self) -> bool {
        self != VeracityLabel3::U
    }
}

impl ClaimLabel2 {
    pub const ALL: [ClaimLabel2; 2] = [ClaimLabel2::T, ClaimLabel2::F];

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimLabel2::T => "T",
            ClaimLabel2::F => "F",
        }
    }
}

impl From<ClaimLabel2> for VeracityLabel3 {
    fn from(label: ClaimLabel2) -> Self {
        match label {
            ClaimLabel2::T => VeracityLabel3::T,
            ClaimLabel2::F => VeracityLabel3::F,
        }
    }
}

impl TryFrom<VeracityLabel3> for ClaimLabel2 {
    type Error = LabelParseError;

    fn try_from(label: VeracityLabel3) -> Result<Self, Self::Error> {
        label
            .to_claim_label()
            .ok_or_else(|| LabelParseError(label.as_str().to_string()))
    }
}

impl FromStr for VeracityLabel3 {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" => Ok(VeracityLabel3::T),
            "F" => Ok(VeracityLabel3::F),
            "U" => Ok(VeracityLabel3::U),
            other => Err(LabelParseError(other.to_string())),
        }
    }
}

impl FromStr for ClaimLabel2 {
    type Err = LabelParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "T" => Ok(ClaimLabel2::T),
            "F" => Ok(ClaimLabel2::F),
            other => Err(LabelParseError(other.to_string())),
        }
    }
}

impl fmt::Display for VeracityLabel3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for ClaimLabel2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A complex claim. `subclaim_ids` is the authoritative order of its
/// sub-claims (index j = position + 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub id: String,
    pub text: String,
    pub event: String,
    /// UTC epoch seconds.
    #[serde(default)]
    pub timestamp: Option<i64>,
    /// Gold veracity as annotated. `U` is kept here and dropped by evaluation.
    #[serde(default)]
    pub gold_label: Option<VeracityLabel3>,
    #[serde(default)]
    pub subclaim_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubClaim {
    pub id: String,
    pub claim_id: String,
    pub text: String,
    #[serde(default)]
    pub gold_label: Option<VeracityLabel3>,
    /// Annotation order.
    #[serde(default)]
    pub span_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceDocument {
    pub id: String,
    pub claim_id: String,
    pub text: String,
    #[serde(default)]
    pub published_at: Option<i64>,
}

/// Character offsets (Unicode scalar values, end exclusive) into the
/// document text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    /// Extracts the range from `text`, or `None` when out of bounds.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        if self.start > self.end {
            return None;
        }
        let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
        let start = indices.nth(self.start)?;
        let end = if self.end == self.start {
            start
        } else {
            indices.nth(self.end - self.start - 1)?
        };
        Some(&text[start..end])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceSpan {
    pub id: String,
    pub subclaim_id: String,
    pub doc_id: String,
    pub text: String,
    #[serde(default, with = "char_range_pair")]
    pub char_range: Option<CharRange>,
}

mod char_range_pair {
    use super::CharRange;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(range: &Option<CharRange>, s: S) -> Result<S::Ok, S::Error> {
        match range {
            Some(r) => s.collect_seq([r.start, r.end]),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CharRange>, D::Error> {
        let pair: Option<(usize, usize)> = Option::deserialize(d)?;
        Ok(pair.map(|(start, end)| CharRange { start, end }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Which record family an id belongs to. Used in integrity errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Claim,
    SubClaim,
    Document,
    Span,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Claim => "claim",
            RecordKind::SubClaim => "subclaim",
            RecordKind::Document => "document",
            RecordKind::Span => "span",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: RecordKind, id: String },
    #[error("{referrer_kind} {referrer:?} references missing {kind} {id:?}")]
    Dangling {
        kind: RecordKind,
        id: String,
        referrer_kind: RecordKind,
        referrer: String,
    },
    #[error("{kind} {id:?} has empty text")]
    EmptyText { kind: RecordKind, id: String },
    #[error("claim {claim:?} lists sub-claims {listed:?} but the file order gives {actual:?}")]
    SubClaimOrder {
        claim: String,
        listed: Vec<String>,
        actual: Vec<String>,
    },
    #[error("sub-claim {subclaim:?} lists spans {listed:?} but the file order gives {actual:?}")]
    SpanOrder {
        subclaim: String,
        listed: Vec<String>,
        actual: Vec<String>,
    },
    #[error("span {span:?} cites document {doc:?} which belongs to claim {doc_claim:?}, not {claim:?}")]
    ForeignDocument {
        span: String,
        doc: String,
        doc_claim: String,
        claim: String,
    },
    #[error("span {span:?} char_range does not reproduce its text in document {doc:?}")]
    SpanMismatch { span: String, doc: String },
    #[error("split assignment references unknown id {0:?}")]
    UnknownSplitId(String),
}

/// A closed collection of claims, sub-claims, documents and spans.
///
/// Collections keep file order; lookups go through id indexes built at
/// construction time.
#[derive(Debug, Clone)]
pub struct Dataset {
    claims: Vec<Claim>,
    subclaims: Vec<SubClaim>,
    documents: Vec<EvidenceDocument>,
    spans: Vec<EvidenceSpan>,
    split_assignment: Option<BTreeMap<String, Split>>,
    claim_index: HashMap<String, usize>,
    subclaim_index: HashMap<String, usize>,
    document_index: HashMap<String, usize>,
    span_index: HashMap<String, usize>,
    documents_by_claim: HashMap<String, Vec<usize>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.claims == other.claims
            && self.subclaims == other.subclaims
            && self.documents == other.documents
            && self.spans == other.spans
            && self.split_assignment == other.split_assignment
    }
}

fn index_of<T>(
    items: &[T],
    kind: RecordKind,
    id: impl Fn(&T) -> &str,
) -> Result<HashMap<String, usize>, IntegrityError> {
    let mut index = HashMap::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        if index.insert(id(item).to_string(), i).is_some() {
            return Err(IntegrityError::DuplicateId {
                kind,
                id: id(item).to_string(),
            });
        }
    }
    Ok(index)
}

impl Dataset {
    /// Builds a dataset and validates referential integrity.
    pub fn new(
        claims: Vec<Claim>,
        subclaims: Vec<SubClaim>,
        documents: Vec<EvidenceDocument>,
        spans: Vec<EvidenceSpan>,
        split_assignment: Option<BTreeMap<String, Split>>,
    ) -> Result<Self, IntegrityError> {
        let claim_index = index_of(&claims, RecordKind::Claim, |c| &c.id)?;
        let subclaim_index = index_of(&subclaims, RecordKind::SubClaim, |s| &s.id)?;
        let document_index = index_of(&documents, RecordKind::Document, |d| &d.id)?;
        let span_index = index_of(&spans, RecordKind::Span, |s| &s.id)?;

        for c in &claims {
            if c.text.trim().is_empty() {
                return Err(IntegrityError::EmptyText {
                    kind: RecordKind::Claim,
                    id: c.id.clone(),
                });
            }
        }

        let mut subclaims_by_claim: HashMap<&str, Vec<String>> = HashMap::new();
        for s in &subclaims {
            if s.text.trim().is_empty() {
                return Err(IntegrityError::EmptyText {
                    kind: RecordKind::SubClaim,
                    id: s.id.clone(),
                });
            }
            if !claim_index.contains_key(&s.claim_id) {
                return Err(IntegrityError::Dangling {
                    kind: RecordKind::Claim,
                    id: s.claim_id.clone(),
                    referrer_kind: RecordKind::SubClaim,
                    referrer: s.id.clone(),
                });
            }
            subclaims_by_claim
                .entry(s.claim_id.as_str())
                .or_default()
                .push(s.id.clone());
        }

        for c in &claims {
            for sid in &c.subclaim_ids {
                if !subclaim_index.contains_key(sid) {
                    return Err(IntegrityError::Dangling {
                        kind: RecordKind::SubClaim,
                        id: sid.clone(),
                        referrer_kind: RecordKind::Claim,
                        referrer: c.id.clone(),
                    });
                }
            }
            let actual = subclaims_by_claim.remove(c.id.as_str()).unwrap_or_default();
            if actual != c.subclaim_ids {
                return Err(IntegrityError::SubClaimOrder {
                    claim: c.id.clone(),
                    listed: c.subclaim_ids.clone(),
                    actual,
                });
            }
        }

        let mut documents_by_claim: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, d) in documents.iter().enumerate() {
            if d.text.trim().is_empty() {
                return Err(IntegrityError::EmptyText {
                    kind: RecordKind::Document,
                    id: d.id.clone(),
                });
            }
            if !claim_index.contains_key(&d.claim_id) {
                return Err(IntegrityError::Dangling {
                    kind: RecordKind::Claim,
                    id: d.claim_id.clone(),
                    referrer_kind: RecordKind::Document,
                    referrer: d.id.clone(),
                });
            }
            documents_by_claim.entry(d.claim_id.clone()).or_default().push(i);
        }

        let mut spans_by_subclaim: HashMap<&str, Vec<String>> = HashMap::new();
        for sp in &spans {
            if sp.text.trim().is_empty() {
                return Err(IntegrityError::EmptyText {
                    kind: RecordKind::Span,
                    id: sp.id.clone(),
                });
            }
            let Some(&si) = subclaim_index.get(&sp.subclaim_id) else {
                return Err(IntegrityError::Dangling {
                    kind: RecordKind::SubClaim,
                    id: sp.subclaim_id.clone(),
                    referrer_kind: RecordKind::Span,
                    referrer: sp.id.clone(),
                });
            };
            let Some(&di) = document_index.get(&sp.doc_id) else {
                return Err(IntegrityError::Dangling {
                    kind: RecordKind::Document,
                    id: sp.doc_id.clone(),
                    referrer_kind: RecordKind::Span,
                    referrer: sp.id.clone(),
                });
            };
            let doc = &documents[di];
            let claim_id = &subclaims[si].claim_id;
            if &doc.claim_id != claim_id {
                return Err(IntegrityError::ForeignDocument {
                    span: sp.id.clone(),
                    doc: doc.id.clone(),
                    doc_claim: doc.claim_id.clone(),
                    claim: claim_id.clone(),
                });
            }
            if let Some(range) = sp.char_range {
                if range.slice(&doc.text) != Some(sp.text.as_str()) {
                    return Err(IntegrityError::SpanMismatch {
                        span: sp.id.clone(),
                        doc: doc.id.clone(),
                    });
                }
            }
            spans_by_subclaim
                .entry(sp.subclaim_id.as_str())
                .or_default()
                .push(sp.id.clone());
        }

        for s in &subclaims {
            for spid in &s.span_ids {
                if !span_index.contains_key(spid) {
                    return Err(IntegrityError::Dangling {
                        kind: RecordKind::Span,
                        id: spid.clone(),
                        referrer_kind: RecordKind::SubClaim,
                        referrer: s.id.clone(),
                    });
                }
            }
            let actual = spans_by_subclaim.remove(s.id.as_str()).unwrap_or_default();
            if actual != s.span_ids {
                return Err(IntegrityError::SpanOrder {
                    subclaim: s.id.clone(),
                    listed: s.span_ids.clone(),
                    actual,
                });
            }
        }

        if let Some(assignment) = &split_assignment {
            for id in assignment.keys() {
                if !claim_index.contains_key(id) && !subclaim_index.contains_key(id) {
                    return Err(IntegrityError::UnknownSplitId(id.clone()));
                }
            }
        }

        Ok(Self {
            claims,
            subclaims,
            documents,
            spans,
            split_assignment,
            claim_index,
            subclaim_index,
            document_index,
            span_index,
            documents_by_claim,
        })
    }

    pub fn claims(&self) -> &[Claim] {
        &self.claims
    }

    pub fn subclaims(&self) -> &[SubClaim] {
        &self.subclaims
    }

    pub fn documents(&self) -> &[EvidenceDocument] {
        &self.documents
    }

    pub fn spans(&self) -> &[EvidenceSpan] {
        &self.spans
    }

    pub fn split_assignment(&self) -> Option<&BTreeMap<String, Split>> {
        self.split_assignment.as_ref()
    }

    pub fn claim(&self, id: &str) -> Option<&Claim> {
        self.claim_index.get(id).map(|&i| &self.claims[i])
    }

    pub fn subclaim(&self, id: &str) -> Option<&SubClaim> {
        self.subclaim_index.get(id).map(|&i| &self.subclaims[i])
    }

    pub fn document(&self, id: &str) -> Option<&EvidenceDocument> {
        self.document_index.get(id).map(|&i| &self.documents[i])
    }

    pub fn span(&self, id: &str) -> Option<&EvidenceSpan> {
        self.span_index.get(id).map(|&i| &self.spans[i])
    }

    /// Sub-claims of `claim` in index order (j = 1..m).
    pub fn subclaims_of<'a>(&'a self, claim: &'a Claim) -> impl Iterator<Item = &'a SubClaim> + 'a {
        claim
            .subclaim_ids
            .iter()
            .filter_map(move |id| self.subclaim(id))
    }

    /// Documents of `claim_id` in file order.
    pub fn documents_of<'a>(&'a self, claim_id: &str) -> impl Iterator<Item = &'a EvidenceDocument> + 'a {
        self.documents_by_claim
            .get(claim_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.documents[i])
    }

    /// Spans of `subclaim` in annotation order.
    pub fn spans_of<'a>(&'a self, subclaim: &'a SubClaim) -> impl Iterator<Item = &'a EvidenceSpan> + 'a {
        subclaim.span_ids.iter().filter_map(move |id| self.span(id))
    }

    pub fn events(&self) -> Vec<&str> {
        let mut events: Vec<&str> = Vec::new();
        for c in &self.claims {
            if !events.contains(&c.event.as_str()) {
                events.push(&c.event);
            }
        }
        events
    }

    pub fn into_parts(
        self,
    ) -> (
        Vec<Claim>,
        Vec<SubClaim>,
        Vec<EvidenceDocument>,
        Vec<EvidenceSpan>,
        Option<BTreeMap<String, Split>>,
    ) {
        (
            self.claims,
            self.subclaims,
            self.documents,
            self.spans,
            self.split_assignment,
        )
    }

    pub fn with_split_assignment(
        self,
        assignment: Option<BTreeMap<String, Split>>,
    ) -> Result<Self, IntegrityError> {
        let (c, s, d, sp, _) = self.into_parts();
        Dataset::new(c, s, d, sp, assignment)
    }
}

/// The evidence layout handed to the claim-level verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvidenceConfiguration {
    /// Claim plus all claim-level evidence; no sub-claims.
    Vanilla,
    /// Sub-claims, each followed by the full claim-level evidence.
    Sre,
    /// Sub-claims, each followed by its own aligned evidence spans.
    Sae,
    /// SRE without sub-claim labels.
    AblSre,
    /// SAE without sub-claim labels.
    AblSae,
}

impl EvidenceConfiguration {
    pub const ALL: [EvidenceConfiguration; 5] = [
        EvidenceConfiguration::Vanilla,
        EvidenceConfiguration::Sre,
        EvidenceConfiguration::Sae,
        EvidenceConfiguration::AblSre,
        EvidenceConfiguration::AblSae,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceConfiguration::Vanilla => "vanilla",
            EvidenceConfiguration::Sre => "sre",
            EvidenceConfiguration::Sae => "sae",
            EvidenceConfiguration::AblSre => "abl_sre",
            EvidenceConfiguration::AblSae => "abl_sae",
        }
    }

    pub fn has_subclaims(self) -> bool {
        self != EvidenceConfiguration::Vanilla
    }

    pub fn carries_labels(self) -> bool {
        matches!(self, EvidenceConfiguration::Sre | EvidenceConfiguration::Sae)
    }

    /// True when evidence is the sub-claim's own spans rather than the claim documents.
    pub fn aligned_evidence(self) -> bool {
        matches!(self, EvidenceConfiguration::Sae | EvidenceConfiguration::AblSae)
    }
}

impl fmt::Display for EvidenceConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown evidence configuration {0:?}")]
pub struct UnknownConfiguration(pub String);

impl FromStr for EvidenceConfiguration {
    type Err = UnknownConfiguration;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        EvidenceConfiguration::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| UnknownConfiguration(s.to_string()))
    }
}

impl Serialize for EvidenceConfiguration {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EvidenceConfiguration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where the sub-claim labels in the prompt come from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelRegime {
    /// Gold sub-claim labels.
    Oracle,
    /// Labels predicted by the named source.
    Predicted(String),
    /// No labels.
    None,
}

impl LabelRegime {
    pub fn includes_labels(&self) -> bool {
        !matches!(self, LabelRegime::None)
    }
}

impl fmt::Display for LabelRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelRegime::Oracle => f.write_str("oracle"),
            LabelRegime::Predicted(tag) => write!(f, "predicted:{tag}"),
            LabelRegime::None => f.write_str("none"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown label regime {0:?} (expected oracle, none or predicted:<source>)")]
pub struct UnknownRegime(pub String);

impl FromStr for LabelRegime {
    type Err = UnknownRegime;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(LabelRegime::Oracle),
            "none" => Ok(LabelRegime::None),
            _ => match s.strip_prefix("predicted:") {
                Some(tag) if !tag.is_empty() => Ok(LabelRegime::Predicted(tag.to_string())),
                _ => Err(UnknownRegime(s.to_string())),
            },
        }
    }
}

impl Serialize for LabelRegime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LabelRegime {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A predicted sub-claim label, one per (sub-claim, backend, seed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubClaimPrediction {
    pub subclaim_id: String,
    pub label: VeracityLabel3,
    pub raw_output: String,
    pub backend_tag: String,
    pub seed: u64,
}

/// A predicted claim verdict for one experimental setup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub claim_id: String,
    pub label: ClaimLabel2,
    pub raw_output: String,
    pub configuration: EvidenceConfiguration,
    pub regime: LabelRegime,
    pub backend_tag: String,
    pub seed: u64,
}
