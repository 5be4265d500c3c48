use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::anyhow;
use decompcheck::ingest::load_dataset;
use decompcheck::metrics::{balanced_accuracy, macro_f1};
use decompcheck::model::{ClaimLabel2, PredictionRecord, SubClaimPrediction, VeracityLabel3};
use decompcheck::pipeline::evaluate::{compare_systems, paired_runs, profile_subclaims, score_system, SeedProfile};
use decompcheck::pipeline::RunManifest;
use decompcheck::report::{build_report, render_profiles, render_report, SystemRun};
use decompcheck::stats::{bennett_s, bleu_overlap, BleuSmoothing};
use serde::Serialize;
use serde_json::json;

use crate::config::Config;
use crate::error::{CliError, CliResult, Exit, OrExit};
use crate::io::{emit, named_path, read_jsonl};
use crate::{CompareArgs, EvaluateArgs, IaaArgs, OutputFormat, ProfileArgs, ReportArgs};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "—".to_string(), |v| format!("{v:.4}"))
}

fn json_text(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

fn load_named<T: serde::de::DeserializeOwned>(arg: &str) -> CliResult<(String, PathBuf, Vec<T>)> {
    let (name, path) = named_path(arg)?;
    let records = read_jsonl(&path)?;
    Ok((name, path, records))
}

pub fn evaluate(config: &Config, args: EvaluateArgs) -> CliResult<()> {
    let dataset = super::load(config, &args.data)?;
    let mut scores = Vec::new();
    for arg in &args.predictions {
        let (name, _, records) = load_named::<PredictionRecord>(arg)?;
        scores.push(score_system(&dataset, &name, &records, args.allow_partial)?);
    }
    let text = match args.format {
        OutputFormat::Json => json_text(&scores),
        OutputFormat::Markdown => {
            let mut t = String::from(
                "| System | Seeds | Macro F1 | std | Bal. Acc | std | Coverage |\n|---|---:|---:|---:|---:|---:|---:|\n",
            );
            for s in &scores {
                t.push_str(&format!(
                    "| {} | {} | {:.4} | {} | {:.4} | {} | {}/{} |\n",
                    s.name,
                    s.seeds.len(),
                    s.macro_f1,
                    opt(s.macro_f1_std),
                    s.balanced_accuracy,
                    opt(s.balanced_accuracy_std),
                    s.coverage.covered,
                    s.coverage.expected
                ));
            }
            t
        }
    };
    emit(args.out.as_deref(), &text)
}

pub fn compare(config: &Config, args: CompareArgs) -> CliResult<()> {
    let dataset = super::load(config, &args.data)?;
    let (sys_name, _, sys) = load_named::<PredictionRecord>(&args.system)?;
    let (base_name, _, base) = load_named::<PredictionRecord>(&args.baseline)?;
    if sys_name == base_name {
        return Err(CliError::usage(anyhow!("both systems are named {sys_name:?}; use NAME=PATH")));
    }
    let n = args.n_resamples.unwrap_or(config.stats.n_resamples);
    let seed = args.bootstrap_seed.unwrap_or(config.stats.bootstrap_seed);
    let cmp = compare_systems(&dataset, (&sys_name, &sys), (&base_name, &base), n, seed, args.allow_partial)?;
    let (runs, _) = paired_runs(&dataset, (&sys_name, &sys), (&base_name, &base), args.allow_partial)?;
    let classes = [ClaimLabel2::T, ClaimLabel2::F];
    let f1 = (
        macro_f1(&runs.gold, &runs.pred_a, &classes).map_err(CliError::data)?,
        macro_f1(&runs.gold, &runs.pred_b, &classes).map_err(CliError::data)?,
    );
    let bacc = (
        balanced_accuracy(&runs.gold, &runs.pred_a).map_err(CliError::data)?,
        balanced_accuracy(&runs.gold, &runs.pred_b).map_err(CliError::data)?,
    );
    let text = match args.format {
        OutputFormat::Json => json_text(&json!({
            "comparison": cmp,
            "system_macro_f1": f1.0,
            "baseline_macro_f1": f1.1,
            "system_balanced_accuracy": bacc.0,
            "baseline_balanced_accuracy": bacc.1,
        })),
        OutputFormat::Markdown => {
            let mut t = format!(
                "`{}` vs baseline `{}`: {} paired rows, coverage {}/{}.\n\n\
                 | Metric | System | Baseline | Δ | 95% interval | p_boot |\n|---|---:|---:|---:|---:|---:|\n",
                cmp.system, cmp.baseline, cmp.rows, cmp.coverage.covered, cmp.coverage.expected
            );
            for (name, (a, b), r) in [("Macro F1", f1, &cmp.macro_f1), ("Bal. Acc", bacc, &cmp.balanced_accuracy)] {
                t.push_str(&format!(
                    "| {name} | {a:.4} | {b:.4} | {:+.4} | [{:.4}, {:.4}] | {:.4} |\n",
                    r.delta_point, r.summary.q025, r.summary.q975, r.p_boot
                ));
            }
            let m = &cmp.mcnemar;
            t.push_str(&format!(
                "\nMcNemar: b01 = {}, b10 = {}, OR = {}, p = {:.4}\nBootstrap: {} valid of {} resamples, seed {}\n",
                m.b01,
                m.b10,
                opt(m.odds_ratio),
                m.p,
                cmp.macro_f1.n_valid,
                cmp.macro_f1.n_resamples,
                cmp.bootstrap_seed
            ));
            t
        }
    };
    emit(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct NamedProfiles {
    name: String,
    seeds: Vec<SeedProfile>,
}

pub fn profile(config: &Config, args: ProfileArgs) -> CliResult<()> {
    let dataset = super::load(config, &args.data)?;
    let mut all = Vec::new();
    for arg in &args.predictions {
        let (name, _, preds) = load_named::<SubClaimPrediction>(arg)?;
        let seeds = profile_subclaims(&dataset, &name, &preds, args.allow_partial)?;
        all.push(NamedProfiles { name, seeds });
    }
    let text = match args.format {
        OutputFormat::Json => json_text(&all),
        OutputFormat::Markdown => {
            let pairs: Vec<(String, Vec<SeedProfile>)> = all.into_iter().map(|p| (p.name, p.seeds)).collect();
            render_profiles(&pairs)
        }
    };
    emit(args.out.as_deref(), &text)
}

pub fn iaa(args: IaaArgs) -> CliResult<()> {
    let version = decompcheck::ingest::SCHEMA_VERSION;
    let a = load_dataset(&args.a, version)?;
    let b = load_dataset(&args.b, version)?;

    let labels_b: HashMap<&str, VeracityLabel3> = b
        .subclaims()
        .iter()
        .filter_map(|s| Some((s.id.as_str(), s.gold_label?)))
        .collect();
    let (la, lb): (Vec<VeracityLabel3>, Vec<VeracityLabel3>) = a
        .subclaims()
        .iter()
        .filter_map(|s| Some((s.gold_label?, *labels_b.get(s.id.as_str())?)))
        .unzip();
    let s = bennett_s(&la, &lb, 3)?;
    let agreement = la.iter().zip(&lb).filter(|(x, y)| x == y).count() as f64 / la.len() as f64;

    let smoothing = if args.no_smoothing {
        BleuSmoothing::None
    } else {
        BleuSmoothing::AddOneHigherOrders
    };
    let joined = |ds: &decompcheck::model::Dataset, id: &str| -> Option<String> {
        let claim = ds.claim(id)?;
        let texts: Vec<&str> = ds.subclaims_of(claim).map(|s| s.text.as_str()).collect();
        (!texts.is_empty()).then(|| texts.join(" "))
    };
    let mut bleu = Vec::new();
    for claim in a.claims() {
        if let (Some(reference), Some(candidate)) = (joined(&a, &claim.id), joined(&b, &claim.id)) {
            bleu.push(bleu_overlap(&candidate, &reference, args.max_n, smoothing)?);
        }
    }
    if bleu.is_empty() {
        return Err(CliError::new(Exit::Data, anyhow!("no claim has decompositions in both files")));
    }
    let mean_bleu = bleu.iter().sum::<f64>() / bleu.len() as f64;
    let text = match args.format {
        OutputFormat::Json => json_text(&json!({
            "labelled_subclaims": la.len(),
            "observed_agreement": agreement,
            "bennett_s": s,
            "decomposed_claims": bleu.len(),
            "mean_bleu": mean_bleu,
            "bleu_max_n": args.max_n,
            "bleu_smoothing": smoothing,
        })),
        OutputFormat::Markdown => format!(
            "| Measure | Items | Value |\n|---|---:|---:|\n\
             | Observed agreement | {} | {:.4} |\n\
             | Bennett's S (k = 3) | {} | {:.4} |\n\
             | Mean BLEU-{} | {} | {:.4} |\n",
            la.len(),
            agreement,
            la.len(),
            s,
            args.max_n,
            bleu.len(),
            mean_bleu
        ),
    };
    emit(None, &text)
}

pub fn report(config: &Config, args: ReportArgs) -> CliResult<()> {
    let dataset = super::load(config, &args.data)?;
    let mut loaded = Vec::new();
    for arg in &args.runs {
        let (name, path, records) = load_named::<PredictionRecord>(arg)?;
        let mpath = RunManifest::path_for(&path);
        let manifest = if mpath.exists() {
            Some(RunManifest::load(&mpath).or_exit(Exit::Data, format!("reading {}", mpath.display()))?)
        } else {
            None
        };
        loaded.push((name, records, manifest));
    }
    let systems: Vec<SystemRun> = loaded
        .iter()
        .map(|(name, records, manifest)| SystemRun {
            name,
            records,
            manifest: manifest.as_ref(),
        })
        .collect();
    let report = build_report(
        &dataset,
        &systems,
        &args.baseline,
        args.n_resamples.unwrap_or(config.stats.n_resamples),
        args.bootstrap_seed.unwrap_or(config.stats.bootstrap_seed),
        args.allow_partial,
    )?;
    emit(args.out.as_deref(), &render_report(&report, args.format)?)
}
