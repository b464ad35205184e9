//! Label encoding, standardization and the train/test split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{
    Cell, Dataset, Record, AGE_MONTHS, A_COLUMNS, CLASS_ASD, ETHNICITY, FAMILY_ASD, JAUNDICE,
    QCHAT_SCORE, SEX,
};
use crate::{Error, Label, Result};

/// The 17 model inputs: the ten answers, the Q-chat score, age and the
/// five encoded categorical columns (including the screening outcome).
pub fn default_feature_columns() -> Vec<String> {
    A_COLUMNS
        .iter()
        .chain(&[
            QCHAT_SCORE,
            AGE_MONTHS,
            SEX,
            ETHNICITY,
            JAUNDICE,
            FAMILY_ASD,
            CLASS_ASD,
        ])
        .map(|s| s.to_string())
        .collect()
}

/// Categorical columns among `feature_columns`, judged by the schema.
pub fn categorical_columns(ds: &Dataset, feature_columns: &[String]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for name in feature_columns {
        let column = ds
            .schema()
            .column(name)
            .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
        if column.kind.is_categorical() {
            out.push(name.clone());
        }
    }
    Ok(out)
}

/// Per-column mapping from categorical value to a dense integer code.
/// Codes follow ascending byte order of the value strings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderMap {
    columns: Vec<String>,
    codes: BTreeMap<String, BTreeMap<String, u32>>,
}

impl EncoderMap {
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn code(&self, column: &str, value: &str) -> Option<u32> {
        self.codes.get(column)?.get(value).copied()
    }

    pub fn vocabulary(&self, column: &str) -> Option<&BTreeMap<String, u32>> {
        self.codes.get(column)
    }

    fn encode(&self, column: &str, value: &str) -> Result<f64> {
        let codes = self.codes.get(column).ok_or_else(|| {
            Error::InvalidParam(format!("no encoder fitted for column `{column}`"))
        })?;
        codes
            .get(value)
            .map(|&c| f64::from(c))
            .ok_or_else(|| Error::UnseenCategory {
                column: column.to_string(),
                value: value.to_string(),
            })
    }
}

pub fn fit_label_encoders(ds: &Dataset, columns: &[String]) -> Result<EncoderMap> {
    let mut codes = BTreeMap::new();
    for column in columns {
        // The domain is a sorted set, so enumeration order is the code.
        let domain = ds.categorical_domain(column)?;
        let map = domain.into_iter().zip(0u32..).collect();
        codes.insert(column.clone(), map);
    }
    Ok(EncoderMap {
        columns: columns.to_vec(),
        codes,
    })
}

/// Dense row-major matrix of finite reals with named columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    feature_names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, n_rows: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * feature_names.len() {
            return Err(Error::LengthMismatch(format!(
                "{} values for a {}x{} matrix",
                values.len(),
                n_rows,
                feature_names.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "non-finite value at row {}, column {}",
                i / feature_names.len().max(1),
                i % feature_names.len().max(1)
            )));
        }
        Ok(FeatureMatrix {
            feature_names,
            n_rows,
            values,
        })
    }

    pub fn from_rows(feature_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = feature_names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(feature_names, rows.len(), values)
    }

    /// Matrix with generated names `x0..x{d-1}`.
    pub fn unnamed(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        Self::from_rows((0..d).map(|j| format!("x{j}")).collect(), rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features() + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.n_features());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            n_rows: indices.len(),
            values,
        }
    }

    /// Applies `f(column, value)` to every entry.
    pub fn map(&self, mut f: impl FnMut(usize, f64) -> f64) -> Result<FeatureMatrix> {
        let d = self.n_features();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % d, v))
            .collect();
        FeatureMatrix::new(self.feature_names.clone(), self.n_rows, values)
    }

    pub(crate) fn check_width(&self, expected: usize) -> Result<()> {
        if self.n_features() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.n_features(),
            });
        }
        Ok(())
    }
}

/// Encodes one record into a feature row.
pub fn encode_record(r: &Record, enc: &EncoderMap, feature_columns: &[String]) -> Result<Vec<f64>> {
    feature_columns
        .iter()
        .map(|c| match r.cell(c) {
            Some(Cell::Int(v)) => Ok(v as f64),
            Some(Cell::Text(s)) => enc.encode(c, s),
            None => Err(Error::UnknownColumn(c.clone())),
        })
        .collect()
}

pub fn apply_encoders(
    ds: &Dataset,
    enc: &EncoderMap,
    feature_columns: &[String],
) -> Result<FeatureMatrix> {
    let mut values = Vec::with_capacity(ds.len() * feature_columns.len());
    for r in ds.rows() {
        values.extend(encode_record(r, enc, feature_columns)?);
    }
    FeatureMatrix::new(feature_columns.to_vec(), ds.len(), values)
}

/// Per-feature standardization parameters (population standard deviation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerParams {
    pub fn identity(feature_names: &[String]) -> Self {
        ScalerParams {
            feature_names: feature_names.to_vec(),
            mean: vec![0.0; feature_names.len()],
            std: vec![1.0; feature_names.len()],
        }
    }

    pub fn scale_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &x)| self.scale_value(j, x))
            .collect())
    }

    fn scale_value(&self, j: usize, x: f64) -> f64 {
        if self.std[j] == 0.0 {
            0.0
        } else {
            (x - self.mean[j]) / self.std[j]
        }
    }
}

/// Fits mean and std for the named columns; other columns get (0, 1).
pub fn fit_scaler(train: &FeatureMatrix, scale_columns: &[String]) -> Result<ScalerParams> {
    if train.n_rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    for c in scale_columns {
        if !train.feature_names().contains(c) {
            return Err(Error::UnknownColumn(c.clone()));
        }
    }
    let mut params = ScalerParams::identity(train.feature_names());
    let n = train.n_rows() as f64;
    for (j, name) in train.feature_names().iter().enumerate() {
        if !scale_columns.contains(name) {
            continue;
        }
        let mean = train.column(j).sum::<f64>() / n;
        let var = train.column(j).map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        params.mean[j] = mean;
        params.std[j] = var.sqrt();
    }
    Ok(params)
}

pub fn apply_scaler(m: &FeatureMatrix, s: &ScalerParams) -> Result<FeatureMatrix> {
    m.check_width(s.mean.len())?;
    if m.feature_names() != s.feature_names.as_slice() {
        return Err(Error::FeatureNameMismatch);
    }
    m.map(|j, x| s.scale_value(j, x))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub stratified: bool,
}

impl SplitSpec {
    pub const DEFAULT_TEST_FRACTION: f64 = 0.05;

    pub fn new(seed: u64) -> Self {
        SplitSpec {
            test_fraction: Self::DEFAULT_TEST_FRACTION,
            seed,
            stratified: false,
        }
    }

    /// `round(n * test_fraction)`, kept within `[1, n - 1]`.
    pub fn test_size(&self, n: usize) -> Result<usize> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParam(format!(
                "test fraction {} is outside (0, 1)",
                self.test_fraction
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParam(format!("cannot split {n} rows")));
        }
        let raw = (n as f64 * self.test_fraction).round() as usize;
        Ok(raw.clamp(1, n - 1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTestSplit {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub train_x: FeatureMatrix,
    pub train_y: Vec<Label>,
    pub test_x: FeatureMatrix,
    pub test_y: Vec<Label>,
}

/// Partitions row indices into (train, test), both in shuffled order.
pub fn split_indices(y: &[Label], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = y.len();
    let n_test = spec.test_size(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));

    if !spec.stratified {
        let train = order.split_off(n_test);
        return Ok((train, order));
    }

    let mut quota = stratified_quotas(y, n_test);
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for i in order {
        let q = quota.get_mut(&y[i]).expect("every class has a quota");
        if *q > 0 {
            *q -= 1;
            test.push(i);
        } else {
            train.push(i);
        }
    }
    Ok((train, test))
}

/// Largest-remainder apportionment of `n_test` rows over the classes;
/// remainder ties go to the lower class code.
fn stratified_quotas(y: &[Label], n_test: usize) -> BTreeMap<Label, usize> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for &c in y {
        *counts.entry(c).or_default() += 1;
    }
    let n = y.len();
    let mut quota: BTreeMap<Label, usize> = BTreeMap::new();
    let mut remainders = Vec::new();
    for (&c, &count) in &counts {
        let exact = count * n_test;
        quota.insert(c, exact / n);
        remainders.push((exact % n, c));
    }
    let assigned: usize = quota.values().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().take(n_test - assigned) {
        *quota.get_mut(&c).unwrap() += 1;
    }
    quota
}

pub fn train_test_split(
    m: &FeatureMatrix,
    y: &[Label],
    spec: &SplitSpec,
) -> Result<TrainTestSplit> {
    if m.n_rows() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "{} feature rows but {} labels",
            m.n_rows(),
            y.len()
        )));
    }
    let (train_indices, test_indices) = split_indices(y, spec)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i]).collect::<Vec<_>>();
    Ok(TrainTestSplit {
        train_x: m.select_rows(&train_indices),
        train_y: pick(&train_indices),
        test_x: m.select_rows(&test_indices),
        test_y: pick(&test_indices),
        train_indices,
        test_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::test_support::{dataset, record};
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn column_matrix(values: &[f64]) -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        FeatureMatrix::from_rows(names(&["x"]), &rows).unwrap()
    }

    #[test]
    fn encoder_codes_follow_sorted_order() {
        let mut rows = Vec::new();
        for (sex, eth) in [("m", "white"), ("f", "asian"), ("m", "black")] {
            let mut r = record([0; 10]);
            r.sex = sex.into();
            r.ethnicity = eth.into();
            r.jaundice = "yes".into();
            rows.push(r);
        }
        let ds = dataset(rows);
        let enc = fit_label_encoders(&ds, &names(&["Sex", "Ethnicity", "Jaundice"])).unwrap();

        let mut sexes = vec!["m", "f", "m"];
        sexes.sort();
        sexes.dedup();
        for (code, v) in sexes.iter().enumerate() {
            assert_eq!(enc.code("Sex", v), Some(code as u32));
        }
        assert_eq!(enc.code("Ethnicity", "asian"), Some(0));
        assert_eq!(enc.code("Ethnicity", "black"), Some(1));
        assert_eq!(enc.code("Ethnicity", "white"), Some(2));
        assert_eq!(enc.vocabulary("Jaundice").unwrap().len(), 1);
        assert_eq!(enc.code("Jaundice", "yes"), Some(0));
    }

    #[test]
    fn encoding_non_categorical_column_fails() {
        let ds = dataset(vec![record([0; 10])]);
        assert!(matches!(
            fit_label_encoders(&ds, &names(&["A1"])),
            Err(Error::NotCategorical(_))
        ));
    }

    #[test]
    fn default_features_and_pass_through() {
        let features = default_feature_columns();
        assert_eq!(features.len(), 17);
        let ds = dataset(vec![
            record([1, 0, 1, 0, 1, 0, 1, 0, 1, 1]),
            record([0; 10]),
        ]);
        let enc = fit_label_encoders(&ds, &categorical_columns(&ds, &features).unwrap()).unwrap();
        let m = apply_encoders(&ds, &enc, &features).unwrap();
        assert_eq!(m.n_features(), 17);

        let a_only: Vec<String> = A_COLUMNS.iter().map(|s| s.to_string()).collect();
        let m = apply_encoders(&ds, &enc, &a_only).unwrap();
        assert_eq!(
            m.row(0),
            &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0]
        );
        assert_eq!(m.row(1), &[0.0; 10]);
    }

    #[test]
    fn unseen_category_is_an_error() {
        let train = dataset(vec![record([0; 10])]);
        let enc = fit_label_encoders(&train, &names(&["Ethnicity"])).unwrap();
        let mut r = record([0; 10]);
        r.ethnicity = "other".into();
        match apply_encoders(&dataset(vec![r]), &enc, &names(&["Ethnicity"])) {
            Err(Error::UnseenCategory { column, value }) => {
                assert_eq!((column.as_str(), value.as_str()), ("Ethnicity", "other"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scaler_examples() {
        let m = column_matrix(&[1.0, 2.0, 3.0]);
        let s = fit_scaler(&m, &names(&["x"])).unwrap();
        assert_eq!(s.mean[0], 2.0);
        assert!((s.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let out = apply_scaler(&m, &s).unwrap();
        for (got, want) in out.column(0).zip([-1.2247, 0.0, 1.2247]) {
            assert!((got - want).abs() < 1e-4);
        }

        let constant = column_matrix(&[5.0, 5.0]);
        let s = fit_scaler(&constant, &names(&["x"])).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (5.0, 0.0));
        assert!(apply_scaler(&constant, &s)
            .unwrap()
            .column(0)
            .all(|v| v == 0.0));

        let s = fit_scaler(&m, &[]).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (0.0, 1.0));
        assert_eq!(apply_scaler(&m, &s).unwrap(), m);
    }

    #[test]
    fn scaler_dimension_mismatch() {
        let s = fit_scaler(&column_matrix(&[1.0, 2.0]), &names(&["x"])).unwrap();
        let wide = FeatureMatrix::unnamed(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            apply_scaler(&wide, &s),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(fit_scaler(&column_matrix(&[]), &[]).is_err());
    }

    #[test]
    fn scaler_ignores_test_statistics() {
        let m = FeatureMatrix::unnamed(&[vec![1.0], vec![4.0], vec![2.0], vec![9.0]]).unwrap();
        let y = vec![0, 1, 0, 1];
        let split = train_test_split(
            &m,
            &y,
            &SplitSpec {
                test_fraction: 0.5,
                seed: 3,
                stratified: false,
            },
        )
        .unwrap();
        let params = fit_scaler(&split.train_x, &names(&["x0"])).unwrap();
        let corrupted = split.test_x.map(|_, v| v * 1000.0 + 7.0).unwrap();
        let _ = apply_scaler(&corrupted, &params).unwrap();
        assert_eq!(params, fit_scaler(&split.train_x, &names(&["x0"])).unwrap());
    }

    #[test]
    fn split_sizes() {
        let spec = SplitSpec::new(42);
        assert_eq!(spec.test_size(3043).unwrap(), 152);
        assert_eq!(spec.test_size(2).unwrap(), 1);
        let bad = SplitSpec {
            test_fraction: 1.0,
            ..spec
        };
        assert!(bad.test_size(10).is_err());
        let bad = SplitSpec {
            test_fraction: 0.0,
            ..spec
        };
        assert!(bad.test_size(10).is_err());

        let m = FeatureMatrix::unnamed(&[vec![0.0], vec![1.0]]).unwrap();
        let s = train_test_split(&m, &[0, 1], &spec).unwrap();
        assert_eq!((s.train_y.len(), s.test_y.len()), (1, 1));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let y: Vec<Label> = (0..100).map(|i| i % 3).collect();
        let a = split_indices(&y, &SplitSpec::new(7)).unwrap();
        let b = split_indices(&y, &SplitSpec::new(7)).unwrap();
        let c = split_indices(&y, &SplitSpec::new(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn stratified_split_keeps_proportions() {
        // 7 classes with very uneven support.
        let sizes = [900usize, 600, 400, 300, 200, 100, 43];
        let y: Vec<Label> = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(c as Label, k))
            .collect();
        let spec = SplitSpec {
            stratified: true,
            ..SplitSpec::new(42)
        };
        let (train, test) = split_indices(&y, &spec).unwrap();
        assert_eq!(test.len(), 127);
        assert_eq!(train.len() + test.len(), y.len());
        for (c, &k) in sizes.iter().enumerate() {
            let got = test.iter().filter(|&&i| y[i] == c as Label).count() as f64;
            let exact = k as f64 * test.len() as f64 / y.len() as f64;
            assert!((got - exact).abs() < 1.0, "class {c}: {got} vs {exact}");
        }
    }

    proptest! {
        #[test]
        fn split_partitions_indices(n in 2usize..300, frac in 0.01f64..0.99, seed: u64, stratified: bool) {
            let y: Vec<Label> = (0..n).map(|i| (i * 7 % 5) as Label).collect();
            let spec = SplitSpec { test_fraction: frac, seed, stratified };
            let (train, test) = split_indices(&y, &spec).unwrap();
            prop_assert_eq!(test.len(), spec.test_size(n).unwrap());
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn scaled_training_columns_are_standard(
            rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..60)
        ) {
            let m = FeatureMatrix::unnamed(&rows).unwrap();
            let all = m.feature_names().to_vec();
            let s = fit_scaler(&m, &all).unwrap();
            let out = apply_scaler(&m, &s).unwrap();
            let n = m.n_rows() as f64;
            for j in 0..3 {
                if s.std[j] == 0.0 {
                    continue;
                }
                let mean = out.column(j).sum::<f64>() / n;
                let var = out.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn encoding_is_injective(values in proptest::collection::vec("[a-e]{1,3}", 1..40)) {
            let rows = values.iter().map(|v| {
                let mut r = record([0; 10]);
                r.ethnicity = v.clone();
                r
            }).collect();
            let ds = dataset(rows);
            let enc = fit_label_encoders(&ds, &names(&["Ethnicity"])).unwrap();
            let vocab = enc.vocabulary("Ethnicity").unwrap();
            let mut codes: Vec<u32> = vocab.values().copied().collect();
            codes.sort_unstable();
            prop_assert_eq!(codes, (0..vocab.len() as u32).collect::<Vec<_>>());
        }
    }
}
