//! Synthetic corpora with controllable label counts.
//!
//! Sub-claims are short templated sentences built from disjoint word pools,
//! so siblings never share content words. Evidence follows the label:
//! a T sub-claim has its sentence copied into a document (occasionally a
//! vague paraphrase instead), an F sub-claim has the same sentence with
//! "never" inserted, and a U sub-claim has nothing. Annotated spans are the
//! exact document sentences, with character offsets.
//!
//! Claim and sub-claim labels are kept consistent: every sub-claim of a T
//! claim is T, an F claim has at least one F sub-claim and a U claim at least
//! one U sub-claim and no F.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::backends::{format_verdict, StoreKey, StoreRecord};
use crate::model::{
    CharRange, Claim, Dataset, EvidenceConfiguration, EvidenceDocument, EvidenceSpan, IntegrityError, LabelRegime, SubClaim,
    VeracityLabel3,
};

const SUBJECTS: &[&str] = &[
    "The city council", "The regional hospital", "The national airline", "The river authority",
    "The state university", "The central bank", "The football club", "The transport ministry",
    "The fire brigade", "The harbour police", "The energy regulator", "The farmers union",
];
const VERBS: &[&str] = &[
    "approved", "cancelled", "announced", "postponed", "expanded", "suspended", "funded",
    "investigated", "rejected", "completed", "launched", "reviewed",
];
const OBJECTS: &[&str] = &[
    "the budget", "the merger", "the vaccine trial", "the rail link", "the curfew", "the tax rebate",
    "the stadium plan", "the evacuation", "the wage deal", "the water ban", "the audit", "the ferry route",
];
const PLACES: &[&str] = &[
    "Lyon", "Porto", "Gdansk", "Leeds", "Bremen", "Turin", "Ghent", "Malmo", "Cork", "Brno",
    "Split", "Tartu",
];
const FILLER: &[&str] = &[
    "Weather stations recorded mild temperatures along the coast.",
    "Local shops reported ordinary weekend trade.",
    "Commuters described calm traffic during the morning.",
    "A spokesperson declined further comment.",
    "Photographs circulated widely across social platforms.",
    "Several readers wrote letters expressing concern.",
];
const PARAPHRASE: &str = "Officials confirmed a related development after checking records.";

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("label counts do not add up: {0}")]
    Counts(String),
    #[error("labels cannot be made consistent: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Integrity(#[from] IntegrityError),
}

/// Counts are `[T, F, U]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub claim_labels: [usize; 3],
    pub subclaim_labels: [usize; 3],
    pub min_subclaims: usize,
    pub max_subclaims: usize,
    pub docs_per_claim: (usize, usize),
    /// Share of T sub-claims whose evidence is a vague paraphrase.
    pub paraphrase_rate: f64,
    pub events: Vec<String>,
    /// Shuffle claim labels; otherwise claims come as T…, F…, U….
    pub shuffle_claims: bool,
    pub seed: u64,
}

impl CorpusConfig {
    /// 399 claims and 1169 sub-claims with the annotated corpus's label mix.
    pub fn sample() -> Self {
        Self {
            claim_labels: [193, 81, 125],
            subclaim_labels: [674, 97, 398],
            min_subclaims: 2,
            max_subclaims: 6,
            docs_per_claim: (2, 3),
            paraphrase_rate: 0.15,
            events: ["flood", "election", "outbreak", "bridge", "strike"].map(String::from).to_vec(),
            shuffle_claims: true,
            seed: 20240601,
        }
    }

    /// 20 claims with three sub-claims each.
    pub fn small() -> Self {
        Self {
            claim_labels: [8, 6, 6],
            subclaim_labels: [38, 10, 12],
            min_subclaims: 3,
            max_subclaims: 3,
            docs_per_claim: (2, 3),
            paraphrase_rate: 0.2,
            events: ["flood", "election"].map(String::from).to_vec(),
            shuffle_claims: true,
            seed: 11,
        }
    }

    /// 14 claims in label order: 7 T, 5 F, 2 U, two sub-claims each.
    pub fn replay_fixture() -> Self {
        Self {
            claim_labels: [7, 5, 2],
            subclaim_labels: [20, 5, 3],
            min_subclaims: 2,
            max_subclaims: 2,
            docs_per_claim: (2, 2),
            paraphrase_rate: 0.0,
            events: vec!["fixture".into()],
            shuffle_claims: false,
            seed: 3,
        }
    }
}

fn distribute_subclaims(rng: &mut ChaCha8Rng, cfg: &CorpusConfig, n_claims: usize, n_subs: usize) -> Result<Vec<usize>, SyntheticError> {
    if n_subs < n_claims * cfg.min_subclaims || n_subs > n_claims * cfg.max_subclaims {
        return Err(SyntheticError::Counts(format!(
            "{n_subs} sub-claims cannot be spread over {n_claims} claims with {}..={} each",
            cfg.min_subclaims, cfg.max_subclaims
        )));
    }
    let mut counts = vec![cfg.min_subclaims; n_claims];
    let mut open: Vec<usize> = (0..n_claims).collect();
    for _ in 0..n_subs - n_claims * cfg.min_subclaims {
        let at = rng.random_range(0..open.len());
        counts[open[at]] += 1;
        if counts[open[at]] == cfg.max_subclaims {
            open.swap_remove(at);
        }
    }
    Ok(counts)
}

fn assign_subclaim_labels(
    rng: &mut ChaCha8Rng,
    claim_labels: &[VeracityLabel3],
    sizes: &[usize],
    totals: [usize; 3],
) -> Result<Vec<Vec<VeracityLabel3>>, SyntheticError> {
    use VeracityLabel3::*;
    let mut left = totals;
    let mut take = |l: VeracityLabel3, n: usize| -> Result<(), SyntheticError> {
        let i = l as usize;
        left[i] = left[i].checked_sub(n).ok_or_else(|| SyntheticError::Infeasible(format!("not enough {l} sub-claims")))?;
        Ok(())
    };
    let mut out: Vec<Vec<Option<VeracityLabel3>>> = sizes.iter().map(|&n| vec![None; n]).collect();
    for (c, &label) in claim_labels.iter().enumerate() {
        match label {
            T => {
                take(T, sizes[c])?;
                out[c].iter_mut().for_each(|s| *s = Some(T));
            }
            F | U => {
                take(label, 1)?;
                out[c][0] = Some(label);
            }
        }
    }
    // leftover F only fits into F claims
    let mut f_slots: Vec<(usize, usize)> = Vec::new();
    let mut free: Vec<(usize, usize)> = Vec::new();
    for (c, &label) in claim_labels.iter().enumerate() {
        for j in 1..sizes[c] {
            if out[c][j].is_none() {
                free.push((c, j));
                if label == F {
                    f_slots.push((c, j));
                }
            }
        }
    }
    if left[F as usize] > f_slots.len() {
        return Err(SyntheticError::Infeasible("too many F sub-claims for the F claims".into()));
    }
    f_slots.shuffle(rng);
    for &(c, j) in f_slots.iter().take(left[F as usize]) {
        out[c][j] = Some(F);
    }
    let rest: Vec<(usize, usize)> = free.into_iter().filter(|&(c, j)| out[c][j].is_none()).collect();
    let mut pool: Vec<VeracityLabel3> = std::iter::repeat_n(T, left[T as usize])
        .chain(std::iter::repeat_n(U, left[U as usize]))
        .collect();
    if pool.len() != rest.len() {
        return Err(SyntheticError::Infeasible(format!(
            "{} open slots for {} remaining T/U labels",
            rest.len(),
            pool.len()
        )));
    }
    pool.shuffle(rng);
    for ((c, j), l) in rest.into_iter().zip(pool) {
        out[c][j] = Some(l);
    }
    // keep the leading label from always sitting first
    let mut labels: Vec<Vec<VeracityLabel3>> = out
        .into_iter()
        .map(|v| v.into_iter().map(|l| l.expect("every slot filled")).collect())
        .collect();
    for v in &mut labels {
        v.shuffle(rng);
    }
    Ok(labels)
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], n: usize) -> Vec<&'a str> {
    let mut v = pool.to_vec();
    v.shuffle(rng);
    v.truncate(n);
    v
}

/// Builds a corpus. Deterministic in the config.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Dataset, SyntheticError> {
    use VeracityLabel3::*;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_claims: usize = cfg.claim_labels.iter().sum();
    let n_subs: usize = cfg.subclaim_labels.iter().sum();
    if cfg.max_subclaims > SUBJECTS.len() || cfg.min_subclaims == 0 || cfg.min_subclaims > cfg.max_subclaims {
        return Err(SyntheticError::Counts("sub-claims per claim out of range".into()));
    }
    if cfg.events.is_empty() || cfg.docs_per_claim.0 == 0 || cfg.docs_per_claim.0 > cfg.docs_per_claim.1 {
        return Err(SyntheticError::Counts("need events and at least one document per claim".into()));
    }

    let mut claim_labels: Vec<VeracityLabel3> = [T, F, U]
        .iter()
        .zip(cfg.claim_labels)
        .flat_map(|(&l, n)| std::iter::repeat_n(l, n))
        .collect();
    if cfg.shuffle_claims {
        claim_labels.shuffle(&mut rng);
    }
    let sizes = distribute_subclaims(&mut rng, cfg, n_claims, n_subs)?;
    let sub_labels = assign_subclaim_labels(&mut rng, &claim_labels, &sizes, cfg.subclaim_labels)?;

    let width = n_claims.to_string().len().max(2);
    let (mut claims, mut subclaims, mut documents, mut spans) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (c, labels) in sub_labels.iter().enumerate() {
        let claim_id = format!("c{:0width$}", c + 1);
        let timestamp = 1_600_000_000 + c as i64 * 86_400;
        let m = labels.len();
        let (subj, verbs, objs, places) = (
            pick(&mut rng, SUBJECTS, m),
            pick(&mut rng, VERBS, m),
            pick(&mut rng, OBJECTS, m),
            pick(&mut rng, PLACES, m),
        );
        let first_span = spans.len();
        let n_docs = rng.random_range(cfg.docs_per_claim.0..=cfg.docs_per_claim.1);
        let mut doc_sentences: Vec<Vec<(String, Option<usize>)>> = (0..n_docs)
            .map(|_| vec![(FILLER[rng.random_range(0..FILLER.len())].to_string(), None)])
            .collect();

        let mut sub_texts = Vec::new();
        for (j, &label) in labels.iter().enumerate() {
            let text = format!("{} {} {} in {}.", subj[j], verbs[j], objs[j], places[j]);
            let evidence = match label {
                T if rng.random_bool(cfg.paraphrase_rate) => Some(PARAPHRASE.to_string()),
                T => Some(text.clone()),
                F => Some(format!("{} never {} {} in {}.", subj[j], verbs[j], objs[j], places[j])),
                U => None,
            };
            if let Some(sentence) = evidence {
                doc_sentences[j % n_docs].push((sentence, Some(j)));
            }
            sub_texts.push(text);
        }

        let sub_ids: Vec<String> = (0..m).map(|j| format!("{claim_id}-s{}", j + 1)).collect();
        let mut span_lists: Vec<Vec<String>> = vec![Vec::new(); m];
        for (d, sentences) in doc_sentences.iter().enumerate() {
            let doc_id = format!("{claim_id}-d{}", d + 1);
            let mut text = String::new();
            for (sentence, owner) in sentences {
                if !text.is_empty() {
                    text.push(' ');
                }
                let start = text.chars().count();
                text.push_str(sentence);
                if let Some(j) = owner {
                    let span_id = format!("{}-e{}", sub_ids[*j], span_lists[*j].len() + 1);
                    span_lists[*j].push(span_id.clone());
                    spans.push((
                        *j,
                        EvidenceSpan {
                            id: span_id,
                            subclaim_id: sub_ids[*j].clone(),
                            doc_id: doc_id.clone(),
                            text: sentence.clone(),
                            char_range: Some(CharRange {
                                start,
                                end: start + sentence.chars().count(),
                            }),
                        },
                    ));
                }
            }
            documents.push(EvidenceDocument {
                id: doc_id,
                claim_id: claim_id.clone(),
                text,
                published_at: Some(timestamp - 3_600 * (n_docs - d) as i64),
            });
        }
        // spans are listed sub-claim by sub-claim
        spans[first_span..].sort_by_key(|(j, _)| *j);

        for j in 0..m {
            subclaims.push(SubClaim {
                id: sub_ids[j].clone(),
                claim_id: claim_id.clone(),
                text: sub_texts[j].clone(),
                gold_label: Some(labels[j]),
                span_ids: span_lists[j].clone(),
            });
        }
        claims.push(Claim {
            id: claim_id,
            text: sub_texts.join(" "),
            event: cfg.events[c % cfg.events.len()].clone(),
            timestamp: Some(timestamp),
            gold_label: Some(claim_labels[c]),
            subclaim_ids: sub_ids,
        });
    }
    let spans = spans.into_iter().map(|(_, s)| s).collect();
    Ok(Dataset::new(claims, subclaims, documents, spans, None)?)
}

/// Claim-level labels shipped with the replay fixture, for claims c01 to c12
/// in order. Oracle SAE beats Vanilla on both metrics.
pub const FIXTURE_VANILLA: &str = "TTTTFTFTTFTF";
pub const FIXTURE_SAE_ORACLE: &str = "TTTTTTFFFTTF";
pub const FIXTURE_TAG: &str = "fixture";

fn fixture_label(c: char) -> VeracityLabel3 {
    match c {
        'T' => VeracityLabel3::T,
        'F' => VeracityLabel3::F,
        _ => VeracityLabel3::U,
    }
}

/// Prediction store for the replay fixture: Vanilla and Oracle SAE claim
/// verdicts plus sub-claim verdicts with a fixed pattern of errors.
pub fn replay_fixture_store(dataset: &Dataset) -> Vec<StoreRecord> {
    let mut out = Vec::new();
    for (i, s) in dataset.subclaims().iter().enumerate() {
        let gold = s.gold_label.unwrap_or(VeracityLabel3::U);
        let label = match (i % 5, i % 7, gold) {
            (3, _, _) => VeracityLabel3::U,
            (_, 4, VeracityLabel3::T) => VeracityLabel3::F,
            (_, 4, VeracityLabel3::F) => VeracityLabel3::T,
            (_, _, VeracityLabel3::U) if i % 2 == 0 => VeracityLabel3::T,
            _ => gold,
        };
        let key = StoreKey::subclaim(&s.id, FIXTURE_TAG, 0);
        out.push(StoreRecord::from_key(&key, label, format_verdict(label), None));
    }
    let setups = [
        (EvidenceConfiguration::Vanilla, LabelRegime::None, FIXTURE_VANILLA),
        (EvidenceConfiguration::Sae, LabelRegime::Oracle, FIXTURE_SAE_ORACLE),
    ];
    for (cfg, regime, labels) in setups {
        let scored = dataset
            .claims()
            .iter()
            .filter(|c| c.gold_label.is_some_and(|g| g.is_verifiable()));
        for (claim, c) in scored.zip(labels.chars()) {
            let label = fixture_label(c);
            let key = StoreKey::claim(&claim.id, cfg, regime.clone(), FIXTURE_TAG, 0);
            out.push(StoreRecord::from_key(&key, label, format_verdict(label), None));
        }
    }
    out
}
