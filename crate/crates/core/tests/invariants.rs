use std::collections::HashSet;

use proptest::prelude::*;

use decompcheck::alignment::{assemble_input, render_prompt, TagCounter, TemplateSet};
use decompcheck::backends::{Duplicates, PredictionStore, StoreKey, StoreRecord};
use decompcheck::ingest::{
    dataset_to_string, filter_temporal, read_dataset, split_dataset, SplitLevel, SplitMode, TemporalMode, SCHEMA_VERSION,
};
use decompcheck::metrics::{balanced_accuracy, error_profile, macro_f1};
use decompcheck::model::{ClaimLabel2, EvidenceConfiguration, LabelRegime, VeracityLabel3};
use decompcheck::stats::{mcnemar_from_counts, paired_bootstrap, EmptyOddsRatio, PairedRuns};
use decompcheck::synthetic::{generate_corpus, CorpusConfig};

fn label3() -> impl Strategy<Value = VeracityLabel3> {
    prop_oneof![Just(VeracityLabel3::T), Just(VeracityLabel3::F), Just(VeracityLabel3::U)]
}

fn label2() -> impl Strategy<Value = ClaimLabel2> {
    prop_oneof![Just(ClaimLabel2::T), Just(ClaimLabel2::F)]
}

fn paired3(max: usize) -> impl Strategy<Value = (Vec<VeracityLabel3>, Vec<VeracityLabel3>)> {
    (1..max).prop_flat_map(|n| (prop::collection::vec(label3(), n), prop::collection::vec(label3(), n)))
}

fn runs(max_items: usize) -> impl Strategy<Value = PairedRuns<ClaimLabel2>> {
    (2..max_items, 1..3usize)
        .prop_flat_map(|(items, seeds)| {
            let rows = items * seeds;
            (
                Just((items, seeds)),
                prop::collection::vec(label2(), items),
                prop::collection::vec(label2(), rows),
                prop::collection::vec(label2(), rows),
            )
        })
        .prop_map(|((items, seeds), gold, a, b)| {
            let ids = (0..items).flat_map(|i| std::iter::repeat_n(format!("c{i}"), seeds)).collect();
            let gold = gold.iter().flat_map(|&g| std::iter::repeat_n(g, seeds)).collect();
            PairedRuns::new(ids, gold, a, b).unwrap()
        })
}

fn f1_2(gold: &[ClaimLabel2], pred: &[ClaimLabel2]) -> Result<f64, decompcheck::metrics::MetricError> {
    macro_f1(gold, pred, &ClaimLabel2::ALL)
}

fn corpus(seed: u64) -> decompcheck::model::Dataset {
    generate_corpus(&CorpusConfig {
        seed,
        ..CorpusConfig::small()
    })
    .unwrap()
}

proptest! {
    #[test]
    fn metrics_ignore_joint_permutation((gold, pred) in paired3(20), rot in 0usize..20) {
        let k = rot % gold.len();
        let (mut g2, mut p2) = (gold.clone(), pred.clone());
        g2.rotate_left(k);
        p2.rotate_left(k);
        g2.reverse();
        p2.reverse();
        let all = VeracityLabel3::ALL;
        prop_assert!((macro_f1(&gold, &pred, &all).unwrap() - macro_f1(&g2, &p2, &all).unwrap()).abs() < 1e-12);
        prop_assert!((balanced_accuracy(&gold, &pred).unwrap() - balanced_accuracy(&g2, &p2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_score_one(gold in prop::collection::vec(label3(), 1..30)) {
        prop_assert_eq!(macro_f1(&gold, &gold, &VeracityLabel3::ALL).unwrap(), 1.0);
        prop_assert_eq!(balanced_accuracy(&gold, &gold).unwrap(), 1.0);
    }

    #[test]
    fn metrics_stay_in_unit_interval((gold, pred) in paired3(30)) {
        let f1 = macro_f1(&gold, &pred, &VeracityLabel3::ALL).unwrap();
        let bacc = balanced_accuracy(&gold, &pred).unwrap();
        prop_assert!((0.0..=1.0).contains(&f1));
        prop_assert!((0.0..=1.0).contains(&bacc));
    }

    #[test]
    fn profile_percentages_sum_to_100((gold, pred) in paired3(40)) {
        if let Ok(p) = error_profile(&gold, &pred) {
            prop_assert!((p.pct_t + p.pct_f + p.pct_u - 100.0).abs() < 1e-9);
            match p.acc_v_commit {
                Some(c) => prop_assert_eq!(p.acc_v_strict, c * p.cov_ver),
                None => prop_assert!(p.cov_ver == 0.0 && p.acc_v_strict == 0.0),
            }
        }
    }

    #[test]
    fn bootstrap_is_antisymmetric(runs in runs(12), seed in 0u64..1000) {
        let ab = paired_bootstrap(&runs, f1_2, 60, seed).unwrap();
        let ba = paired_bootstrap(&runs.swapped(), f1_2, 60, seed).unwrap();
        prop_assert_eq!(ab.delta_point, -ba.delta_point);
        prop_assert_eq!(ab.p_boot, ba.p_boot);
        prop_assert_eq!(ab.count_le, ba.count_ge);
        prop_assert!(ab.p_boot > 0.0 && ab.p_boot <= 1.0);
    }

    #[test]
    fn mcnemar_is_symmetric_and_bounded(b01 in 0u64..200, b10 in 0u64..200) {
        let a = mcnemar_from_counts(b01, b10, EmptyOddsRatio::Undefined);
        let b = mcnemar_from_counts(b10, b01, EmptyOddsRatio::Undefined);
        prop_assert_eq!(a.p, b.p);
        prop_assert!(a.p > 0.0 && a.p <= 1.0);
        if b01 == b10 {
            prop_assert_eq!(a.p, 1.0);
        }
    }

    #[test]
    fn store_round_trips(entries in prop::collection::btree_map("[a-z]{1,6}", (label3(), 0u64..4, any::<bool>(), "[ -~]{0,20}"), 0..12)) {
        let records: Vec<StoreRecord> = entries
            .into_iter()
            .map(|(id, (label, seed, claim, raw))| {
                let key = if claim {
                    StoreKey::claim(id, EvidenceConfiguration::Sae, LabelRegime::Oracle, "t", seed)
                } else {
                    StoreKey::subclaim(id, "t", seed)
                };
                let label = if claim && label == VeracityLabel3::U { VeracityLabel3::T } else { label };
                StoreRecord::from_key(&key, label, raw, None)
            })
            .collect();
        let store = PredictionStore::from_records(records, Duplicates::Reject).unwrap();
        let mut bytes = Vec::new();
        store.write(&mut bytes).unwrap();
        let back = PredictionStore::read(bytes.as_slice(), Duplicates::Reject).unwrap();
        prop_assert_eq!(back.records(), store.records());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dataset_round_trips(seed in 0u64..10_000) {
        let ds = corpus(seed);
        let text = dataset_to_string(&ds);
        let back = read_dataset(text.as_bytes(), SCHEMA_VERSION).unwrap();
        prop_assert_eq!(dataset_to_string(&back), text);
    }

    #[test]
    fn temporal_filter_is_idempotent(seed in 0u64..10_000, start in 1_600_000_000i64..1_700_000_000, len in 0i64..40_000_000) {
        let ds = corpus(seed);
        for mode in [TemporalMode::ClaimTimestamp, TemporalMode::Window { start, end: start + len }] {
            let once = filter_temporal(&ds, mode).unwrap();
            let twice = filter_temporal(&once, mode).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once.claims(), ds.claims());
        }
    }

    #[test]
    fn splits_partition_claims(seed in 0u64..10_000, ratio in 0.1f64..0.9) {
        let ds = corpus(seed);
        let (train, test) = split_dataset(&ds, &SplitMode::RandomStratified { ratio, seed }, SplitLevel::Claim).unwrap();
        let a: HashSet<&str> = train.claims().iter().map(|c| c.id.as_str()).collect();
        let b: HashSet<&str> = test.claims().iter().map(|c| c.id.as_str()).collect();
        prop_assert!(a.is_disjoint(&b));
        prop_assert_eq!(a.len() + b.len(), ds.claims().len());
    }

    #[test]
    fn rendered_prompts_are_balanced_and_pure(seed in 0u64..10_000) {
        let ds = corpus(seed);
        let templates = TemplateSet::default();
        let tags = TagCounter::appendix_tags();
        for claim in ds.claims() {
            for cfg in EvidenceConfiguration::ALL {
                let structured = assemble_input(claim, &ds, cfg, &LabelRegime::Oracle, None).unwrap();
                let a = render_prompt(&structured, templates.for_configuration(cfg)).unwrap();
                let b = render_prompt(&structured, templates.for_configuration(cfg)).unwrap();
                prop_assert!(tags.is_balanced(a.as_str()));
                prop_assert_eq!(a, b);
            }
        }
    }
}
