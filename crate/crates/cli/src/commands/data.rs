use std::collections::HashSet;

use decompcheck::ingest::{
    assign_split, complexity_filter, dataset_hash, dataset_to_string, filter_temporal, label_distribution, save_dataset,
    split_dataset, ComplexityThresholds, HeuristicVerbCounter, SplitLevel, SplitMode, TemporalMode,
};
use decompcheck::model::Dataset;
use serde_json::json;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::io::emit;
use crate::{OutputFormat, SplitArgs, SplitLevelArg, SplitModeArg, TemporalArg, ValidateArgs};

/// Keeps only the listed claims and everything hanging off them.
fn retain_claims(dataset: &Dataset, keep: &HashSet<String>) -> CliResult<Dataset> {
    let (claims, subclaims, documents, spans, split) = dataset.clone().into_parts();
    let claims: Vec<_> = claims.into_iter().filter(|c| keep.contains(&c.id)).collect();
    let subclaims: Vec<_> = subclaims.into_iter().filter(|s| keep.contains(&s.claim_id)).collect();
    let sub_ids: HashSet<&str> = subclaims.iter().map(|s| s.id.as_str()).collect();
    let documents: Vec<_> = documents.into_iter().filter(|d| keep.contains(&d.claim_id)).collect();
    let spans: Vec<_> = spans.into_iter().filter(|s| sub_ids.contains(s.subclaim_id.as_str())).collect();
    let split = split.map(|m| {
        m.into_iter()
            .filter(|(id, _)| keep.contains(id) || sub_ids.contains(id.as_str()))
            .collect()
    });
    Dataset::new(claims, subclaims, documents, spans, split).map_err(CliError::data)
}

pub fn validate(config: &Config, args: ValidateArgs) -> CliResult<()> {
    let mut dataset = super::load(config, &args.data)?;
    let loaded_claims = dataset.claims().len();
    let loaded_docs = dataset.documents().len();
    if let Some(t) = args.temporal {
        let mode = match (t, args.window_start, args.window_end) {
            (TemporalArg::Claim, _, _) => TemporalMode::ClaimTimestamp,
            (TemporalArg::Window, Some(start), Some(end)) => TemporalMode::Window { start, end },
            (TemporalArg::Window, _, _) => {
                return Err(CliError::usage(anyhow::anyhow!("--temporal window needs --window-start and --window-end")))
            }
        };
        dataset = filter_temporal(&dataset, mode)?;
    }
    if args.complexity {
        let thresholds = ComplexityThresholds {
            min_sentences: args.min_sentences,
            min_verbs: args.min_verbs,
        };
        let keep: HashSet<String> = complexity_filter(dataset.claims(), thresholds, &HeuristicVerbCounter)
            .into_iter()
            .map(|c| c.id.clone())
            .collect();
        dataset = retain_claims(&dataset, &keep)?;
    }
    if let Some(out) = &args.out {
        save_dataset(&dataset, out)?;
    }
    let table = label_distribution(&dataset)?;
    let hash = dataset_hash(&dataset);
    let text = match args.format {
        OutputFormat::Markdown => format!(
            "Dataset OK: {} claims ({} dropped), {} sub-claims, {} documents ({} dropped), {} spans.\n\
             Dataset hash: `{}`\n\n{}",
            dataset.claims().len(),
            loaded_claims - dataset.claims().len(),
            dataset.subclaims().len(),
            dataset.documents().len(),
            loaded_docs - dataset.documents().len(),
            dataset.spans().len(),
            hash,
            table.to_markdown()
        ),
        OutputFormat::Json => {
            let v = json!({
                "claims": dataset.claims().len(),
                "subclaims": dataset.subclaims().len(),
                "documents": dataset.documents().len(),
                "spans": dataset.spans().len(),
                "dropped_claims": loaded_claims - dataset.claims().len(),
                "dropped_documents": loaded_docs - dataset.documents().len(),
                "dataset_hash": hash,
                "distribution": table,
            });
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
    };
    emit(None, &text)
}

pub fn split(config: &Config, args: SplitArgs) -> CliResult<()> {
    let dataset = super::load(config, &args.data)?;
    let mode = match args.mode {
        SplitModeArg::Random => SplitMode::RandomStratified {
            ratio: args.ratio,
            seed: args.seed,
        },
        SplitModeArg::LeaveOneEventOut => SplitMode::LeaveOneEventOut(args.event.clone().unwrap_or_default()),
    };
    let level = match args.level {
        SplitLevelArg::Claim => SplitLevel::Claim,
        SplitLevelArg::Subclaim => SplitLevel::Subclaim,
    };
    let (train, test) = split_dataset(&dataset, &mode, level)?;
    let write = |name: &str, ds: &Dataset| crate::io::write_file(&args.out_dir.join(name), dataset_to_string(ds).as_bytes());
    write("train.jsonl", &train)?;
    write("test.jsonl", &test)?;
    let assignment = assign_split(&dataset, &mode, level)?;
    let annotated = dataset.with_split_assignment(Some(assignment)).map_err(CliError::data)?;
    let table = label_distribution(&annotated)?;
    emit(
        None,
        &format!(
            "train: {} claims, {} sub-claims\ntest: {} claims, {} sub-claims\n\n{}",
            train.claims().len(),
            train.subclaims().len(),
            test.claims().len(),
            test.subclaims().len(),
            table.to_markdown()
        ),
    )
}
