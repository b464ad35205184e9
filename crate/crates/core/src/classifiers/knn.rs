use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_training_set, majority, Classifier};
use crate::preprocessing::FeatureMatrix;
use crate::{Error, Label, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

/// Brute-force Euclidean k-nearest-neighbour classifier. Fitting only
/// stores the training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    x: FeatureMatrix,
    y: Vec<Label>,
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn stored_x(&self) -> &FeatureMatrix {
        &self.x
    }

    pub fn stored_y(&self) -> &[Label] {
        &self.y
    }

    /// Indices of the k nearest stored rows, nearest first; equal
    /// distances keep the lower stored index first.
    pub fn neighbours(&self, query: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .rows()
            .enumerate()
            .map(|(i, r)| (euclidean(r, query), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        let k = self.params.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        dist.sort_unstable_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl Classifier for KnnModel {
    fn n_features(&self) -> usize {
        self.x.n_features()
    }

    fn predict_row(&self, row: &[f64]) -> Label {
        majority(self.neighbours(row).into_iter().map(|i| self.y[i])).expect("k >= 1 neighbours")
    }
}

pub fn fit_knn(x: &FeatureMatrix, y: &[Label], params: KnnParams) -> Result<KnnModel> {
    check_training_set(x, y)?;
    if params.k < 1 || params.k > y.len() {
        return Err(Error::InvalidParam(format!(
            "k = {} must lie in [1, {}]",
            params.k,
            y.len()
        )));
    }
    Ok(KnnModel {
        params,
        x: x.clone(),
        y: y.to_vec(),
    })
}

pub fn predict_knn(m: &KnnModel, x: &FeatureMatrix) -> Result<Vec<Label>> {
    m.predict(x)
}
