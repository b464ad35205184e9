//! The four classifiers and the model-file envelope.
//!
//! All models share one contract: fit is a pure function of the training
//! matrix, labels, parameters and (for the forest) a seed, and every tie,
//! whether between splits, votes, distances or posteriors, resolves to the
//! lowest index or class code.

mod forest;
mod knn;
mod model;
mod naive_bayes;
mod tree;

pub use forest::{
    fit_random_forest, fit_random_forest_with, predict_forest, tree_seed, ForestModel, ForestParams,
};
pub use knn::{fit_knn, predict_knn, KnnModel, KnnParams};
pub use model::{LabelEntry, ModelKind, ModelPayload, TrainedModel, FORMAT_VERSION};
pub use naive_bayes::{fit_gaussian_nb, predict_nb, NbModel, NbParams};
pub use tree::{fit_decision_tree, gini, predict_tree, Criterion, Node, TreeModel, TreeParams};

use std::collections::BTreeMap;

use crate::preprocessing::FeatureMatrix;
use crate::{Error, Label, Result};

/// Common predict contract.
pub trait Classifier {
    fn n_features(&self) -> usize;

    fn predict_row(&self, row: &[f64]) -> Label;

    fn predict(&self, x: &FeatureMatrix) -> Result<Vec<Label>> {
        x.check_width(self.n_features())?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}

/// Most frequent label; ties go to the lowest code.
pub(crate) fn majority<I: IntoIterator<Item = Label>>(labels: I) -> Option<Label> {
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut best: Option<(Label, usize)> = None;
    for (label, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((label, count));
        }
    }
    best.map(|(l, _)| l)
}

fn check_training_set(x: &FeatureMatrix, y: &[Label]) -> Result<()> {
    if x.n_rows() == 0 || y.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.n_rows() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "{} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::majority;

    #[test]
    fn majority_breaks_ties_low() {
        assert_eq!(majority([1, 1, 6]), Some(1));
        assert_eq!(majority([6, 2]), Some(2));
        assert_eq!(majority([3, 5, 5, 3]), Some(3));
        assert_eq!(majority(Vec::new()), None);
    }
}
