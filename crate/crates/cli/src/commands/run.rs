use std::path::Path;

use anyhow::anyhow;
use decompcheck::backends::{decompose_claim, Backend};
use decompcheck::ingest::dataset_hash;
use decompcheck::model::{Dataset, LabelRegime, SubClaimPrediction};
use decompcheck::pipeline::{
    run_claim_experiment, run_rule_aggregation, run_subclaim_experiment, FailureKind, PredictionSource, RunManifest,
    RunOptions, RunSummary,
};
use serde::Serialize;

use crate::config::Config;
use crate::error::{CliError, CliResult, Exit, OrExit};
use crate::io::{emit, file_hash, read_jsonl, write_jsonl};
use crate::{BackendArgs, DecomposeArgs, RunArgs, RunClaimsArgs, RunSubclaimsArgs};

fn apply_backend_args(config: &mut Config, args: &BackendArgs) {
    let b = &mut config.backend;
    if let Some(kind) = args.backend {
        b.kind = kind;
    }
    if let Some(tag) = &args.backend_tag {
        b.tag = Some(tag.clone());
    }
    if let Some(store) = &args.store {
        // flag paths are relative to the working directory
        b.store = Some(std::path::absolute(store).unwrap_or_else(|_| store.clone()));
    }
    if let Some(endpoint) = &args.endpoint {
        b.endpoint = Some(endpoint.clone());
    }
    if let Some(model) = &args.model {
        b.params.model_name = model.clone();
    }
}

fn run_options(config: &Config, args: &RunArgs) -> CliResult<RunOptions> {
    let seeds = args
        .seeds
        .clone()
        .or_else(|| config.run.seeds.clone())
        .unwrap_or_else(|| vec![0]);
    let cache_path = args
        .cache
        .clone()
        .or_else(|| config.run.cache.as_ref().map(|p| config.resolve(p)));
    Ok(RunOptions {
        seeds,
        templates: config.template_set()?,
        subclaim_template: config.subclaim_template()?,
        limits: config.limits(),
        estimator: config.estimator()?,
        cache_path,
        lenient_parse: args.lenient_parse || config.run.lenient_parse,
        max_calls: args.max_calls.or(config.run.max_calls),
        max_in_flight: args.max_in_flight.or(config.run.max_in_flight),
    })
}

fn runtime() -> CliResult<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new().or_exit(Exit::Backend, "starting async runtime")
}

fn failures_path(out: &Path) -> std::path::PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".failures.jsonl");
    s.into()
}

/// Writes records, manifest and failures, prints a summary and maps
/// backend failures to the backend exit code.
fn finish<T: Serialize>(out: &Path, summary: &RunSummary<T>, manifest: &RunManifest) -> CliResult<()> {
    write_jsonl(out, &summary.records)?;
    manifest
        .save(RunManifest::path_for(out))
        .or_exit(Exit::Data, "writing manifest")?;
    let fpath = failures_path(out);
    if summary.failures.is_empty() {
        if fpath.exists() {
            std::fs::remove_file(&fpath).or_exit(Exit::Data, format!("removing {}", fpath.display()))?;
        }
    } else {
        write_jsonl(&fpath, &summary.failures)?;
    }
    let count = |k: FailureKind| summary.failures.iter().filter(|f| f.kind == k).count();
    eprintln!(
        "{} records ({} cached, {} generated); failures: {} backend, {} parse, {} context; {} skipped; {} excluded",
        summary.records.len(),
        summary.cached,
        summary.generated,
        count(FailureKind::Backend),
        count(FailureKind::Parse),
        count(FailureKind::Context),
        summary.skipped,
        summary.excluded.len(),
    );
    if !summary.failures.is_empty() {
        eprintln!("failed items written to {}", fpath.display());
    }
    if count(FailureKind::Backend) > 0 {
        return Err(CliError::new(
            Exit::Backend,
            anyhow!("{} items failed in the backend; rerun with the same cache to retry them", count(FailureKind::Backend)),
        ));
    }
    Ok(())
}

fn manifest(dataset: &Dataset, level: &str, backend: &dyn Backend, options: &RunOptions) -> RunManifest {
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        level: level.to_string(),
        dataset_hash: dataset_hash(dataset),
        configuration: None,
        regime: None,
        template_name: options.subclaim_template.name.clone(),
        template_hash: options.subclaim_template.hash.clone(),
        backend_tag: backend.tag().to_string(),
        params: backend.params().cloned(),
        seeds: options.seeds.clone(),
        lenient_parse: options.lenient_parse,
        prediction_source_hash: None,
    }
}

pub fn run_subclaims(mut config: Config, args: RunSubclaimsArgs) -> CliResult<()> {
    apply_backend_args(&mut config, &args.run.backend);
    let dataset = super::load(&config, &args.data)?;
    let options = run_options(&config, &args.run)?;
    let backend = config.build_backend()?;
    let summary = runtime()?.block_on(run_subclaim_experiment(&dataset, backend.as_ref(), &options))?;
    let m = manifest(&dataset, "subclaim", backend.as_ref(), &options);
    finish(&args.run.out, &summary, &m)
}

pub fn run_claims(mut config: Config, args: RunClaimsArgs) -> CliResult<()> {
    apply_backend_args(&mut config, &args.run.backend);
    let dataset = super::load(&config, &args.data)?;
    let options = run_options(&config, &args.run)?;

    let (source, source_hash) = match (&args.regime, &args.subclaim_predictions) {
        (LabelRegime::Predicted(_), Some(path)) => {
            let preds: Vec<SubClaimPrediction> = read_jsonl(path)?;
            (Some(PredictionSource::from_predictions(&preds)), Some(file_hash(path)?))
        }
        (LabelRegime::Predicted(_), None) if args.configuration.carries_labels() => {
            return Err(CliError::usage(anyhow!("a predicted regime needs --subclaim-predictions")));
        }
        (_, Some(_)) => return Err(CliError::usage(anyhow!("--subclaim-predictions only applies to predicted regimes"))),
        _ => (None, None),
    };

    if let Some(rule) = args.rule {
        let summary = run_rule_aggregation(
            &dataset,
            args.configuration,
            &args.regime,
            rule,
            &options.seeds,
            source.as_ref(),
        )?;
        let m = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            level: "claim".into(),
            dataset_hash: dataset_hash(&dataset),
            configuration: Some(args.configuration),
            regime: Some(args.regime.clone()),
            template_name: format!("rule:{}", rule.as_str()),
            template_hash: String::new(),
            backend_tag: format!("rule:{}", rule.as_str()),
            params: None,
            seeds: options.seeds.clone(),
            lenient_parse: false,
            prediction_source_hash: source_hash,
        };
        return finish(&args.run.out, &summary, &m);
    }

    let backend = config.build_backend()?;
    let summary = runtime()?.block_on(run_claim_experiment(
        &dataset,
        args.configuration,
        &args.regime,
        backend.as_ref(),
        &options,
        source.as_ref(),
    ))?;
    let template = options.templates.for_configuration(args.configuration);
    let mut m = manifest(&dataset, "claim", backend.as_ref(), &options);
    m.configuration = Some(args.configuration);
    m.regime = Some(args.regime.clone());
    m.template_name = template.name.clone();
    m.template_hash = template.hash.clone();
    m.prediction_source_hash = source_hash;
    finish(&args.run.out, &summary, &m)
}

#[derive(Serialize)]
struct Decomposition<'a> {
    claim_id: &'a str,
    subclaims: Vec<String>,
}

pub fn decompose(mut config: Config, args: DecomposeArgs) -> CliResult<()> {
    apply_backend_args(&mut config, &args.backend);
    let dataset = super::load(&config, &args.data)?;
    let template = config.decompose_template()?;
    let backend = config.build_backend()?;
    let rt = runtime()?;
    let mut out = Vec::new();
    let mut failed = 0;
    for claim in dataset.claims() {
        match rt.block_on(decompose_claim(&claim.text, backend.as_ref(), &template)) {
            Ok(subclaims) => out.push(Decomposition {
                claim_id: &claim.id,
                subclaims,
            }),
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", claim.id);
            }
        }
    }
    let mut text = String::new();
    for d in &out {
        text.push_str(&serde_json::to_string(d).expect("json"));
        text.push('\n');
    }
    emit(args.out.as_deref(), &text)?;
    if failed > 0 {
        return Err(CliError::new(Exit::Backend, anyhow!("{failed} claims could not be decomposed")));
    }
    Ok(())
}
