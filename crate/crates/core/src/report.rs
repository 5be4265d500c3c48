//! Result tables comparing claim-level setups against a named baseline.
//!
//! Each row carries F1 and balanced accuracy (mean and seed std), their
//! bootstrap deltas and p-values against the baseline, and the McNemar odds
//! ratio and p-value. Markdown is for reading; CSV and JSON carry the raw
//! values and the provenance hashes of every run.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::dataset_hash;
use crate::model::{Dataset, EvidenceConfiguration, LabelRegime, PredictionRecord};
use crate::pipeline::evaluate::{claim_scope, compare_systems, score_system, Coverage, EvalError, SeedProfile};
use crate::pipeline::RunManifest;

/// Decimal places used for every number in markdown output.
pub const MARKDOWN_PRECISION: usize = 4;

const UNDEFINED: &str = "—";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no systems to report")]
    NoSystems,
    #[error("baseline {0:?} is not among the reported systems")]
    UnknownBaseline(String),
    #[error("system name {0:?} appears twice")]
    DuplicateName(String),
    #[error("{system} and {baseline} cover different claim sets ({a} vs {b} claims)")]
    InconsistentClaimSet {
        system: String,
        baseline: String,
        a: usize,
        b: usize,
    },
    #[error("{system}: manifest dataset hash {found} does not match the dataset ({expected})")]
    DatasetMismatch {
        system: String,
        found: String,
        expected: String,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown report format {other:?} (expected markdown, csv or json)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Markdown => "markdown",
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

/// One run to report: a name, its claim records and, when known, its manifest.
#[derive(Debug, Clone, Copy)]
pub struct SystemRun<'a> {
    pub name: &'a str,
    pub records: &'a [PredictionRecord],
    pub manifest: Option<&'a RunManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest_hash: String,
    pub dataset_hash: String,
    pub template_name: String,
    pub template_hash: String,
}

impl From<&RunManifest> for Provenance {
    fn from(m: &RunManifest) -> Self {
        Self {
            manifest_hash: m.hash(),
            dataset_hash: m.dataset_hash.clone(),
            template_name: m.template_name.clone(),
            template_hash: m.template_hash.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub setup: String,
    pub backend_tag: String,
    pub configuration: Option<EvidenceConfiguration>,
    pub regime: Option<LabelRegime>,
    pub seeds: usize,
    pub coverage: Coverage,
    pub macro_f1: f64,
    pub macro_f1_std: Option<f64>,
    pub delta_f1: Option<f64>,
    pub p_boot_f1: Option<f64>,
    pub odds_ratio: Option<f64>,
    pub mcnemar_p: Option<f64>,
    pub balanced_accuracy: f64,
    pub balanced_accuracy_std: Option<f64>,
    pub delta_bacc: Option<f64>,
    pub p_boot_bacc: Option<f64>,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub baseline: String,
    pub dataset_hash: String,
    pub claims: usize,
    pub n_resamples: usize,
    pub bootstrap_seed: u64,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn row(&self, setup: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.setup == setup)
    }
}

fn covered_claims(dataset: &Dataset, records: &[PredictionRecord]) -> BTreeSet<String> {
    let scope: BTreeSet<&str> = claim_scope(dataset).into_iter().map(|(id, _)| id).collect();
    records
        .iter()
        .filter(|r| scope.contains(r.claim_id.as_str()))
        .map(|r| r.claim_id.clone())
        .collect()
}

/// Scores every system and compares each non-baseline system to `baseline`.
pub fn build_report(
    dataset: &Dataset,
    systems: &[SystemRun<'_>],
    baseline: &str,
    n_resamples: usize,
    bootstrap_seed: u64,
    allow_partial: bool,
) -> Result<Report, ReportError> {
    if systems.is_empty() {
        return Err(ReportError::NoSystems);
    }
    let mut names = BTreeSet::new();
    for s in systems {
        if !names.insert(s.name) {
            return Err(ReportError::DuplicateName(s.name.to_string()));
        }
    }
    let base = systems
        .iter()
        .find(|s| s.name == baseline)
        .ok_or_else(|| ReportError::UnknownBaseline(baseline.to_string()))?;

    let hash = dataset_hash(dataset);
    for s in systems {
        if let Some(m) = s.manifest {
            if m.dataset_hash != hash {
                return Err(ReportError::DatasetMismatch {
                    system: s.name.to_string(),
                    found: m.dataset_hash.clone(),
                    expected: hash,
                });
            }
        }
    }

    let base_claims = covered_claims(dataset, base.records);
    let mut rows = Vec::with_capacity(systems.len());
    for s in systems {
        let claims = covered_claims(dataset, s.records);
        if claims != base_claims {
            return Err(ReportError::InconsistentClaimSet {
                system: s.name.to_string(),
                baseline: baseline.to_string(),
                a: claims.len(),
                b: base_claims.len(),
            });
        }
        let score = score_system(dataset, s.name, s.records, allow_partial)?;
        let first = s.records.first();
        let mut row = ReportRow {
            setup: s.name.to_string(),
            backend_tag: first.map(|r| r.backend_tag.clone()).unwrap_or_default(),
            configuration: first.map(|r| r.configuration),
            regime: first.map(|r| r.regime.clone()),
            seeds: score.seeds.len(),
            coverage: score.coverage,
            macro_f1: score.macro_f1,
            macro_f1_std: score.macro_f1_std,
            delta_f1: None,
            p_boot_f1: None,
            odds_ratio: None,
            mcnemar_p: None,
            balanced_accuracy: score.balanced_accuracy,
            balanced_accuracy_std: score.balanced_accuracy_std,
            delta_bacc: None,
            p_boot_bacc: None,
            provenance: s.manifest.map(Provenance::from),
        };
        if s.name != baseline {
            let c = compare_systems(
                dataset,
                (s.name, s.records),
                (base.name, base.records),
                n_resamples,
                bootstrap_seed,
                allow_partial,
            )?;
            row.delta_f1 = Some(c.macro_f1.delta_point);
            row.p_boot_f1 = Some(c.macro_f1.p_boot);
            row.odds_ratio = c.mcnemar.odds_ratio;
            row.mcnemar_p = Some(c.mcnemar.p);
            row.delta_bacc = Some(c.balanced_accuracy.delta_point);
            row.p_boot_bacc = Some(c.balanced_accuracy.p_boot);
        }
        rows.push(row);
    }
    Ok(Report {
        baseline: baseline.to_string(),
        dataset_hash: hash,
        claims: base_claims.len(),
        n_resamples,
        bootstrap_seed,
        rows,
    })
}

pub fn render_report(report: &Report, format: ReportFormat) -> Result<String, ReportError> {
    match format {
        ReportFormat::Markdown => Ok(render_markdown(report)),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report).expect("report serializes") + "\n"),
    }
}

#[derive(Clone, Copy)]
enum Better {
    Higher,
    Lower,
}

/// The stat columns in display order, with the value they bold on.
const COLUMNS: [(&str, Better); 8] = [
    ("Macro F1", Better::Higher),
    ("ΔF1", Better::Higher),
    ("p_boot", Better::Lower),
    ("OR", Better::Higher),
    ("McNemar p", Better::Lower),
    ("Bal. Acc", Better::Higher),
    ("ΔBAcc", Better::Higher),
    ("p_boot", Better::Lower),
];

fn stat_values(r: &ReportRow) -> [Option<f64>; 8] {
    [
        Some(r.macro_f1),
        r.delta_f1,
        r.p_boot_f1,
        r.odds_ratio,
        r.mcnemar_p,
        Some(r.balanced_accuracy),
        r.delta_bacc,
        r.p_boot_bacc,
    ]
}

fn num(v: f64) -> String {
    format!("{v:.MARKDOWN_PRECISION$}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), num)
}

fn signed(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:+.MARKDOWN_PRECISION$}"))
}

fn cell(r: &ReportRow, col: usize) -> String {
    match col {
        0 => format!("{} ± {}", num(r.macro_f1), opt(r.macro_f1_std)),
        1 => signed(r.delta_f1),
        2 => opt(r.p_boot_f1),
        3 => opt(r.odds_ratio),
        4 => opt(r.mcnemar_p),
        5 => format!("{} ± {}", num(r.balanced_accuracy), opt(r.balanced_accuracy_std)),
        6 => signed(r.delta_bacc),
        7 => opt(r.p_boot_bacc),
        _ => unreachable!(),
    }
}

/// Rows holding the best displayed value of each column. Columns with fewer
/// than two defined values have no best.
fn best_rows(report: &Report) -> Vec<BTreeSet<usize>> {
    let scale = 10f64.powi(MARKDOWN_PRECISION as i32);
    let values: Vec<[Option<f64>; 8]> = report.rows.iter().map(stat_values).collect();
    (0..COLUMNS.len())
        .map(|col| {
            let defined: Vec<(usize, f64)> = values
                .iter()
                .enumerate()
                .filter_map(|(i, v)| Some((i, (v[col]? * scale).round())))
                .collect();
            if defined.len() < 2 {
                return BTreeSet::new();
            }
            let best = match COLUMNS[col].1 {
                Better::Higher => defined.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max),
                Better::Lower => defined.iter().map(|d| d.1).fold(f64::INFINITY, f64::min),
            };
            defined.iter().filter(|d| d.1 == best).map(|d| d.0).collect()
        })
        .collect()
}

fn render_markdown(report: &Report) -> String {
    let partial = report.rows.iter().any(|r| !r.coverage.is_full());
    let mut out = format!(
        "Baseline: `{}`. Claims: {}. Bootstrap: {} resamples, seed {}.\n\n",
        report.baseline, report.claims, report.n_resamples, report.bootstrap_seed
    );
    out.push_str("| Setup |");
    for (name, _) in COLUMNS {
        out.push_str(&format!(" {name} |"));
    }
    if partial {
        out.push_str(" Coverage |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(COLUMNS.len() + usize::from(partial)));
    out.push('\n');

    let best = best_rows(report);
    for (i, r) in report.rows.iter().enumerate() {
        out.push_str(&format!("| {} |", r.setup));
        for (col, winners) in best.iter().enumerate() {
            let c = cell(r, col);
            if winners.contains(&i) {
                out.push_str(&format!(" **{c}** |"));
            } else {
                out.push_str(&format!(" {c} |"));
            }
        }
        if partial {
            out.push_str(&format!(" {}/{} |", r.coverage.covered, r.coverage.expected));
        }
        out.push('\n');
    }

    out.push_str(&format!("\nDataset hash: `{}`\n", report.dataset_hash));
    let with_provenance: Vec<&ReportRow> = report.rows.iter().filter(|r| r.provenance.is_some()).collect();
    if !with_provenance.is_empty() {
        out.push('\n');
        for r in with_provenance {
            let p = r.provenance.as_ref().expect("filtered");
            out.push_str(&format!(
                "- `{}`: manifest `{}`, template `{}` `{}`\n",
                r.setup, p.manifest_hash, p.template_name, p.template_hash
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct CsvRow<'a> {
    setup: &'a str,
    backend_tag: &'a str,
    configuration: Option<&'a str>,
    regime: Option<String>,
    seeds: usize,
    covered: usize,
    expected: usize,
    macro_f1: f64,
    macro_f1_std: Option<f64>,
    delta_f1: Option<f64>,
    p_boot_f1: Option<f64>,
    odds_ratio: Option<f64>,
    mcnemar_p: Option<f64>,
    balanced_accuracy: f64,
    balanced_accuracy_std: Option<f64>,
    delta_bacc: Option<f64>,
    p_boot_bacc: Option<f64>,
    manifest_hash: Option<&'a str>,
    dataset_hash: &'a str,
    template_hash: Option<&'a str>,
}

fn render_csv(report: &Report) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        let p = r.provenance.as_ref();
        w.serialize(CsvRow {
            setup: &r.setup,
            backend_tag: &r.backend_tag,
            configuration: r.configuration.map(|c| c.as_str()),
            regime: r.regime.as_ref().map(|g| g.to_string()),
            seeds: r.seeds,
            covered: r.coverage.covered,
            expected: r.coverage.expected,
            macro_f1: r.macro_f1,
            macro_f1_std: r.macro_f1_std,
            delta_f1: r.delta_f1,
            p_boot_f1: r.p_boot_f1,
            odds_ratio: r.odds_ratio,
            mcnemar_p: r.mcnemar_p,
            balanced_accuracy: r.balanced_accuracy,
            balanced_accuracy_std: r.balanced_accuracy_std,
            delta_bacc: r.delta_bacc,
            p_boot_bacc: r.p_boot_bacc,
            manifest_hash: p.map(|p| p.manifest_hash.as_str()),
            dataset_hash: p.map_or(&report.dataset_hash, |p| &p.dataset_hash),
            template_hash: p.map(|p| p.template_hash.as_str()),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Markdown table of sub-claim error profiles, one row per (system, seed).
pub fn render_profiles(profiles: &[(String, Vec<SeedProfile>)]) -> String {
    let mut out = String::from(
        "| System | Seed | N | T% | F% | U% | R_F | P_F | Cov_ver | Acc_v strict | Acc_v commit | Macro F1 (3-way) |\n\
         |---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n",
    );
    for (name, seeds) in profiles {
        for s in seeds {
            let p = &s.profile;
            out.push_str(&format!(
                "| {} | {} | {} | {:.1} | {:.1} | {:.1} | {} | {} | {} | {} | {} | {} |\n",
                name,
                s.seed,
                p.n,
                p.pct_t,
                p.pct_f,
                p.pct_u,
                opt(p.r_f),
                opt(p.p_f),
                num(p.cov_ver),
                num(p.acc_v_strict),
                opt(p.acc_v_commit),
                num(s.macro_f1),
            ));
        }
    }
    out
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_markdown(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::seed_mean_std;
    use crate::model::ClaimLabel2;
    use crate::synthetic::{generate_corpus, CorpusConfig};

    fn records(labels: &str, cfg: EvidenceConfiguration, regime: LabelRegime, seed: u64) -> Vec<PredictionRecord> {
        labels
            .chars()
            .enumerate()
            .map(|(i, c)| PredictionRecord {
                claim_id: format!("c{:02}", i + 1),
                label: if c == 'T' { ClaimLabel2::T } else { ClaimLabel2::F },
                raw_output: String::new(),
                configuration: cfg,
                regime: regime.clone(),
                backend_tag: "fixture".into(),
                seed,
            })
            .collect()
    }

    fn fixture() -> (Dataset, Vec<PredictionRecord>, Vec<PredictionRecord>) {
        let ds = generate_corpus(&CorpusConfig::replay_fixture()).unwrap();
        let vanilla = records("TTTTFTFTTFTF", EvidenceConfiguration::Vanilla, LabelRegime::None, 0);
        let sae = records("TTTTTTFFFTTF", EvidenceConfiguration::Sae, LabelRegime::Oracle, 0);
        (ds, vanilla, sae)
    }

    fn report(ds: &Dataset, vanilla: &[PredictionRecord], sae: &[PredictionRecord]) -> Report {
        let systems = [
            SystemRun {
                name: "vanilla",
                records: vanilla,
                manifest: None,
            },
            SystemRun {
                name: "sae-oracle",
                records: sae,
                manifest: None,
            },
        ];
        build_report(ds, &systems, "vanilla", 1000, 7, false).unwrap()
    }

    #[test]
    fn two_system_fixture_values() {
        let (ds, v, s) = fixture();
        let r = report(&ds, &v, &s);
        let base = r.row("vanilla").unwrap();
        let sae = r.row("sae-oracle").unwrap();
        assert!((base.macro_f1 - 5.0 / 9.0).abs() < 1e-12);
        assert!((sae.macro_f1 - 11.0 / 15.0).abs() < 1e-12);
        assert!((sae.delta_f1.unwrap() - 8.0 / 45.0).abs() < 1e-12);
        assert!((base.balanced_accuracy - 39.0 / 70.0).abs() < 1e-12);
        assert!((sae.delta_bacc.unwrap() - 6.0 / 35.0).abs() < 1e-12);
        assert_eq!(sae.odds_ratio, Some(3.0));
        assert_eq!(sae.mcnemar_p, Some(0.625));
        assert_eq!(base.delta_f1, None);
        assert_eq!(r.claims, 12);
    }

    #[test]
    fn markdown_has_two_rows_and_eight_stat_columns() {
        let (ds, v, s) = fixture();
        let md = render_report(&report(&ds, &v, &s), ReportFormat::Markdown).unwrap();
        let table: Vec<&str> = md.lines().filter(|l| l.starts_with('|')).collect();
        assert_eq!(table.len(), 4);
        for line in &table {
            assert_eq!(line.matches('|').count(), 10, "{line}");
        }
        assert!(table[2].contains(UNDEFINED));
        // the better setup wins both headline columns
        assert!(table[3].contains("**0.7333 ± —**"));
        assert!(table[3].contains("**0.7286 ± —**"));
    }

    #[test]
    fn undefined_odds_ratio_renders_as_dash_and_null() {
        let (ds, v, _) = fixture();
        let mut same = v.clone();
        for r in &mut same {
            r.configuration = EvidenceConfiguration::Sre;
        }
        let systems = [
            SystemRun {
                name: "vanilla",
                records: &v,
                manifest: None,
            },
            SystemRun {
                name: "copy",
                records: &same,
                manifest: None,
            },
        ];
        let r = build_report(&ds, &systems, "vanilla", 200, 1, false).unwrap();
        let row = r.row("copy").unwrap();
        assert_eq!(row.odds_ratio, None);
        assert_eq!(row.p_boot_f1, Some(1.0));
        let md = render_report(&r, ReportFormat::Markdown).unwrap();
        let line = md.lines().find(|l| l.starts_with("| copy")).unwrap();
        let cells: Vec<&str> = line.split('|').map(str::trim).collect();
        assert_eq!(cells[5], UNDEFINED);
        let json: serde_json::Value = serde_json::from_str(&render_report(&r, ReportFormat::Json).unwrap()).unwrap();
        assert!(json["rows"][1]["odds_ratio"].is_null());
        let csv = render_report(&r, ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn three_seeds_fill_the_std_column() {
        let (ds, _, _) = fixture();
        let runs = ["TTTTFTFTTFTF", "TTTTTTFTTFTF", "TTTFFTFTFFTF"];
        let v: Vec<PredictionRecord> = runs
            .iter()
            .enumerate()
            .flat_map(|(s, l)| records(l, EvidenceConfiguration::Vanilla, LabelRegime::None, s as u64))
            .collect();
        let r = build_report(
            &ds,
            &[SystemRun {
                name: "vanilla",
                records: &v,
                manifest: None,
            }],
            "vanilla",
            10,
            0,
            false,
        )
        .unwrap();
        let per_seed: Vec<f64> = runs
            .iter()
            .map(|l| {
                let rec = records(l, EvidenceConfiguration::Vanilla, LabelRegime::None, 0);
                score_system(&ds, "x", &rec, false).unwrap().macro_f1
            })
            .collect();
        let (mean, std) = seed_mean_std(&per_seed).unwrap();
        assert_eq!(r.rows[0].macro_f1, mean);
        assert_eq!(r.rows[0].macro_f1_std, Some(std));
        assert_eq!(r.rows[0].seeds, 3);
    }

    #[test]
    fn different_claim_sets_are_rejected() {
        let (ds, v, s) = fixture();
        let systems = [
            SystemRun {
                name: "vanilla",
                records: &v,
                manifest: None,
            },
            SystemRun {
                name: "sae",
                records: &s[1..],
                manifest: None,
            },
        ];
        let err = build_report(&ds, &systems, "vanilla", 10, 0, true).unwrap_err();
        assert!(matches!(err, ReportError::InconsistentClaimSet { a: 11, b: 12, .. }));
        assert!(matches!(
            build_report(&ds, &systems, "nobody", 10, 0, true),
            Err(ReportError::UnknownBaseline(_))
        ));
    }

    #[test]
    fn json_and_markdown_agree() {
        let (ds, v, s) = fixture();
        let r = report(&ds, &v, &s);
        let back = Report::from_json(&render_report(&r, ReportFormat::Json).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(
            render_report(&back, ReportFormat::Markdown).unwrap(),
            render_report(&r, ReportFormat::Markdown).unwrap()
        );
    }

    #[test]
    fn provenance_is_embedded() {
        let (ds, v, s) = fixture();
        let manifest = RunManifest {
            tool_version: "0.1.0".into(),
            level: "claim".into(),
            dataset_hash: dataset_hash(&ds),
            configuration: Some(EvidenceConfiguration::Vanilla),
            regime: Some(LabelRegime::None),
            template_name: "vanilla".into(),
            template_hash: "feedface".into(),
            backend_tag: "fixture".into(),
            params: None,
            seeds: vec![0],
            lenient_parse: false,
            prediction_source_hash: None,
        };
        let systems = [
            SystemRun {
                name: "vanilla",
                records: &v,
                manifest: Some(&manifest),
            },
            SystemRun {
                name: "sae-oracle",
                records: &s,
                manifest: None,
            },
        ];
        let r = build_report(&ds, &systems, "vanilla", 10, 0, false).unwrap();
        let md = render_report(&r, ReportFormat::Markdown).unwrap();
        assert!(md.contains(&manifest.hash()));
        assert!(md.contains("feedface"));
        assert!(md.contains(&dataset_hash(&ds)));
        let csv = render_report(&r, ReportFormat::Csv).unwrap();
        assert!(csv.contains(&manifest.hash()));

        let mut wrong = manifest.clone();
        wrong.dataset_hash = "00".into();
        let systems = [SystemRun {
            name: "vanilla",
            records: &v,
            manifest: Some(&wrong),
        }];
        assert!(matches!(
            build_report(&ds, &systems, "vanilla", 10, 0, false),
            Err(ReportError::DatasetMismatch { .. })
        ));
    }
}
