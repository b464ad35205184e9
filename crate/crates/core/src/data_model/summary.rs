use std::collections::BTreeMap;

use serde::Serialize;

use super::{Cell, Dataset};
use crate::Label;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryStats {
    pub rows: usize,
    /// Value histogram for every categorical column.
    pub categorical: BTreeMap<String, BTreeMap<String, usize>>,
    /// Fraction of rows with `Class_ASD_Traits = Yes`.
    pub class_balance: f64,
    /// Fraction of rows answering 1, per item A1..A10.
    pub a_prevalence: [f64; 10],
    pub qchat_histogram: [usize; 11],
    pub age_months_min: u32,
    pub age_months_max: u32,
    pub age_months_mean: f64,
    pub label_counts: Option<BTreeMap<Label, usize>>,
}

pub fn summarize(ds: &Dataset) -> SummaryStats {
    let n = ds.len();
    let mut categorical: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for c in ds
        .schema()
        .columns
        .iter()
        .filter(|c| c.kind.is_categorical())
    {
        let hist = categorical.entry(c.name.clone()).or_default();
        for r in ds.rows() {
            if let Some(Cell::Text(v)) = r.cell(&c.name) {
                *hist.entry(v.to_string()).or_default() += 1;
            }
        }
    }

    let mut a_counts = [0usize; 10];
    let mut qchat_histogram = [0usize; 11];
    let mut yes = 0usize;
    let mut age_sum = 0u64;
    for r in ds.rows() {
        for (count, &v) in a_counts.iter_mut().zip(r.a.values()) {
            *count += usize::from(v);
        }
        if let Some(slot) = qchat_histogram.get_mut(usize::from(r.qchat_score)) {
            *slot += 1;
        }
        if r.class_asd == "Yes" {
            yes += 1;
        }
        age_sum += u64::from(r.age_months);
    }

    let label_counts = ds.schema().is_labeled().then(|| {
        let mut counts = BTreeMap::new();
        for t in ds.rows().iter().filter_map(|r| r.preferred_education) {
            *counts.entry(t).or_default() += 1;
        }
        counts
    });

    SummaryStats {
        rows: n,
        categorical,
        class_balance: yes as f64 / n as f64,
        a_prevalence: a_counts.map(|c| c as f64 / n as f64),
        qchat_histogram,
        age_months_min: ds.rows().iter().map(|r| r.age_months).min().unwrap_or(0),
        age_months_max: ds.rows().iter().map(|r| r.age_months).max().unwrap_or(0),
        age_months_mean: age_sum as f64 / n as f64,
        label_counts,
    }
}
