use std::collections::BTreeMap;

use proptest::prelude::*;

use asdedu::classifiers::{
    fit_decision_tree, fit_knn, predict_knn, predict_tree, KnnParams, TreeParams,
};
use asdedu::data_model::{
    load_dataset, merge_datasets, summarize, validate, write_csv, AVector, ColumnAliases, Dataset,
    DatasetSchema, Record,
};
use asdedu::evaluation::{confusion_matrix, metrics, Averaging, ConfusionMatrix};
use asdedu::preprocessing::FeatureMatrix;
use asdedu::rules::{assign_label, label_dataset, RuleSet};
use asdedu::synthetic::{generate, SynthSpec};
use asdedu::Label;

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z ,'\"-]{0,10}[A-Za-z]"
}

fn yes_no(capital: bool) -> impl Strategy<Value = String> {
    prop::bool::ANY.prop_map(move |b| {
        let s = if b { "yes" } else { "no" };
        if capital {
            format!("{}{}", s[..1].to_uppercase(), &s[1..])
        } else {
            s.to_string()
        }
    })
}

fn record(labeled: bool) -> impl Strategy<Value = Record> {
    (
        (1u32..100_000, 0u16..1024, 0u8..=10, 1u32..240),
        (
            text(),
            text(),
            yes_no(false),
            yes_no(false),
            text(),
            yes_no(true),
        ),
        0u32..7,
    )
        .prop_map(
            move |((case_no, bits, qchat, age), (sex, eth, j, fam, who, class), label)| Record {
                case_no,
                a: AVector::from_bits(bits),
                qchat_score: qchat,
                age_months: age,
                sex,
                ethnicity: eth,
                jaundice: j,
                family_asd: fam,
                who_completed: who,
                class_asd: class,
                preferred_education: labeled.then_some(label),
            },
        )
}

fn dataset(labeled: bool, max_rows: usize) -> impl Strategy<Value = Dataset> {
    prop::collection::vec(record(labeled), 1..max_rows).prop_map(move |rows| {
        let schema = if labeled {
            DatasetSchema::canonical_labeled()
        } else {
            DatasetSchema::canonical()
        };
        Dataset::new(schema, rows, vec!["src".into()]).unwrap()
    })
}

fn reload(ds: &Dataset) -> Dataset {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf).unwrap();
    let (back, report) = load_dataset(
        &buf[..],
        &DatasetSchema::canonical(),
        &ColumnAliases::new(),
        "src",
    )
    .unwrap();
    assert!(report.row_errors.is_empty(), "{:?}", report.row_errors);
    back
}

fn without_case_no(ds: &Dataset) -> Vec<Record> {
    let mut rows: Vec<Record> = ds
        .rows()
        .iter()
        .cloned()
        .map(|mut r| {
            r.case_no = 0;
            r
        })
        .collect();
    rows.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(ds in prop_oneof![dataset(false, 20), dataset(true, 20)]) {
        prop_assert_eq!(reload(&ds), ds);
    }

    #[test]
    fn merge_is_order_insensitive(p1 in dataset(false, 12), p2 in dataset(false, 12)) {
        let a = merge_datasets(&[p1.clone(), p2.clone()]).unwrap();
        let b = merge_datasets(&[p2, p1]).unwrap();
        prop_assert_eq!(without_case_no(&a), without_case_no(&b));
    }

    #[test]
    fn accepted_rows_never_exceed_input(ds in dataset(false, 15), garbage in prop::collection::vec(0usize..15, 0..5)) {
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let mut lines: Vec<String> = String::from_utf8(buf).unwrap().lines().map(str::to_string).collect();
        for g in garbage {
            let at = 1 + g % (lines.len() - 1);
            lines.insert(at, "1,2,x".into());
        }
        let n_input = lines.len() - 1;
        let (_, report) = load_dataset(lines.join("\n").as_bytes(), &DatasetSchema::canonical(), &ColumnAliases::new(), "src").unwrap();
        prop_assert!(report.rows_accepted <= n_input);
        prop_assert_eq!(report.rows_accepted + report.rows_rejected, n_input);
        prop_assert!(validate(&ds).rows_accepted <= ds.len());
    }

    #[test]
    fn labels_depend_only_on_answers(r1 in record(false), r2 in record(false)) {
        let rs = RuleSet::canonical();
        let mut twin = r2.clone();
        twin.a = r1.a;
        let ds = Dataset::new(DatasetSchema::canonical(), vec![r1, twin], vec![]).unwrap();
        let labeled = label_dataset(&ds, &rs);
        let y = labeled.labels().unwrap();
        prop_assert_eq!(y[0], y[1]);
        prop_assert_eq!(y[0], assign_label(&ds.rows()[0].a, &rs).code());
    }

    #[test]
    fn labeling_preserves_rows_and_columns(ds in dataset(false, 20)) {
        let labeled = label_dataset(&ds, &RuleSet::canonical());
        prop_assert_eq!(labeled.len(), ds.len());
        for (a, b) in ds.rows().iter().zip(labeled.rows()) {
            let mut b = b.clone();
            prop_assert!(b.preferred_education.is_some());
            b.preferred_education = None;
            prop_assert_eq!(a, &b);
        }
    }

    #[test]
    fn confusion_matrix_conservation_and_permutation(
        pairs in prop::collection::vec((0u32..5, 0u32..5), 1..60),
        shift in 0usize..60,
    ) {
        let classes: Vec<Label> = (0..5).collect();
        let (t, p): (Vec<Label>, Vec<Label>) = pairs.iter().copied().unzip();
        let cm = confusion_matrix(&t, &p, &classes).unwrap();
        prop_assert_eq!(cm.total() as usize, pairs.len());
        let mut rotated = pairs.clone();
        rotated.rotate_left(shift % pairs.len());
        rotated.reverse();
        let (t2, p2): (Vec<Label>, Vec<Label>) = rotated.into_iter().unzip();
        prop_assert_eq!(confusion_matrix(&t2, &p2, &classes).unwrap(), cm);
    }

    #[test]
    fn metrics_are_scale_free(
        counts in prop::collection::vec(prop::collection::vec(0u64..20, 4), 4),
        factor in 2u64..9,
    ) {
        let mut counts = counts;
        counts[1][1] += 1;
        let scaled: Vec<Vec<u64>> = counts.iter().map(|r| r.iter().map(|c| c * factor).collect()).collect();
        let classes: Vec<Label> = (0..4).collect();
        let a = ConfusionMatrix::from_counts(classes.clone(), counts).unwrap();
        let b = ConfusionMatrix::from_counts(classes, scaled).unwrap();
        for avg in [Averaging::Macro, Averaging::Weighted] {
            let (ma, mb) = (metrics(&a, avg).unwrap(), metrics(&b, avg).unwrap());
            for (u, v) in [(ma.accuracy, mb.accuracy), (ma.precision, mb.precision), (ma.recall, mb.recall), (ma.f1, mb.f1)] {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn memorization(rows in prop::collection::btree_map(prop::collection::vec(0i32..6, 3), 0u32..4, 2..40)) {
        // Distinct rows, so there are no conflicting labels.
        let x: Vec<Vec<f64>> = rows.keys().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let y: Vec<Label> = rows.values().copied().collect();
        let m = FeatureMatrix::unnamed(&x).unwrap();
        let knn = fit_knn(&m, &y, KnnParams { k: 1 }).unwrap();
        prop_assert_eq!(predict_knn(&knn, &m).unwrap(), y.clone());

        // With one all-distinct feature every impure node has a split that
        // lowers impurity, so the unlimited tree must fit the data exactly.
        let with_id: Vec<Vec<f64>> = x.iter().enumerate().map(|(i, r)| {
            let mut r = r.clone();
            r.push(((i * 7919) % 1009) as f64);
            r
        }).collect();
        let m = FeatureMatrix::unnamed(&with_id).unwrap();
        let tree = fit_decision_tree(&m, &y, TreeParams::default()).unwrap();
        prop_assert_eq!(predict_tree(&tree, &m).unwrap(), y);
    }
}

#[test]
fn tree_stops_when_no_split_lowers_impurity() {
    // XOR: every split leaves both children as mixed as the parent.
    let x = FeatureMatrix::unnamed(&[
        vec![0.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
    ])
    .unwrap();
    let tree = fit_decision_tree(&x, &[0, 1, 1, 0], TreeParams::default()).unwrap();
    assert_eq!(tree.root_split(), None);
    assert_eq!(predict_tree(&tree, &x).unwrap(), vec![0; 4]);
}

#[test]
fn synthetic_rows_are_consistent_and_valid() {
    let ds = generate(&SynthSpec::new(100, 11)).unwrap();
    assert_eq!(ds.len(), 100);
    assert!(ds.rows().iter().all(|r| r.qchat_score == r.a.score()));
    let report = validate(&ds);
    assert!(report.row_errors.is_empty() && report.warnings.is_empty());
}

#[test]
fn distinct_seeds_give_distinct_datasets() {
    let a = generate(&SynthSpec::new(50, 1)).unwrap();
    let b = generate(&SynthSpec::new(50, 2)).unwrap();
    assert_ne!(a.rows(), b.rows());
}

#[test]
fn seed_42_synthetic_data_covers_every_method() {
    let ds = generate(&SynthSpec::new(3043, 42)).unwrap();
    let report = validate(&ds);
    assert!(report.row_errors.is_empty() && report.warnings.is_empty());
    let labeled = label_dataset(&ds, &RuleSet::canonical());
    let mut counts = BTreeMap::new();
    for y in labeled.labels().unwrap() {
        *counts.entry(y).or_insert(0) += 1;
    }
    assert_eq!(
        counts.keys().copied().collect::<Vec<_>>(),
        (0..7).collect::<Vec<_>>()
    );
}

#[test]
fn summary_prevalence_tracks_the_generator() {
    let ds = generate(&SynthSpec::new(3043, 42)).unwrap();
    let s = summarize(&ds);
    for p in s.a_prevalence {
        assert!((p - 0.5).abs() < 0.03, "{p}");
    }
    assert_eq!(s.qchat_histogram.iter().sum::<usize>(), 3043);
}
