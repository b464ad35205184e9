use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier};
use crate::preprocessing::FeatureMatrix;
use crate::{Label, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbParams {
    /// Variance floor as a fraction of the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        NbParams {
            var_smoothing: 1e-9,
        }
    }
}

/// Gaussian naive Bayes: per-class priors and per-feature normal densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub params: NbParams,
    classes: Vec<Label>,
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    epsilon: f64,
}

impl NbModel {
    pub fn classes(&self) -> &[Label] {
        &self.classes
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self, class_index: usize) -> &[f64] {
        &self.means[class_index]
    }

    pub fn variances(&self, class_index: usize) -> &[f64] {
        &self.variances[class_index]
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Log prior plus log likelihood, per class in ascending code order.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        self.classes
            .iter()
            .enumerate()
            .map(|(c, _)| {
                let mut ll = self.priors[c].ln();
                for ((&x, &mu), &var) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                    ll -= 0.5 * (2.0 * PI * var).ln() + (x - mu).powi(2) / (2.0 * var);
                }
                ll
            })
            .collect()
    }
}

impl Classifier for NbModel {
    fn n_features(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn predict_row(&self, row: &[f64]) -> Label {
        let jll = self.joint_log_likelihood(row);
        let mut best = 0;
        for c in 1..jll.len() {
            if jll[c] > jll[best] {
                best = c;
            }
        }
        self.classes[best]
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

pub fn fit_gaussian_nb(x: &FeatureMatrix, y: &[Label], params: NbParams) -> Result<NbModel> {
    check_training_set(x, y)?;
    if params.var_smoothing.is_nan() || params.var_smoothing <= 0.0 {
        return Err(crate::Error::InvalidParam(
            "var_smoothing must be positive".into(),
        ));
    }
    let d = x.n_features();
    let n = y.len() as f64;

    let max_var = (0..d)
        .map(|j| mean_var(&x.column(j).collect::<Vec<_>>()).1)
        .fold(0.0f64, f64::max);
    // All-constant data would give a zero floor; fall back to the raw factor.
    let epsilon = match params.var_smoothing * max_var {
        e if e > 0.0 => e,
        _ => params.var_smoothing,
    };

    let mut classes: Vec<Label> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let mut priors = Vec::with_capacity(classes.len());
    let mut means = Vec::with_capacity(classes.len());
    let mut variances = Vec::with_capacity(classes.len());
    for &c in &classes {
        let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        priors.push(members.len() as f64 / n);
        let (mu, var): (Vec<f64>, Vec<f64>) = (0..d)
            .map(|j| {
                let (m, v) = mean_var(&members.iter().map(|&i| x.get(i, j)).collect::<Vec<_>>());
                (m, v.max(epsilon))
            })
            .unzip();
        means.push(mu);
        variances.push(var);
    }

    Ok(NbModel {
        params,
        classes,
        priors,
        means,
        variances,
        epsilon,
    })
}

pub fn predict_nb(m: &NbModel, x: &FeatureMatrix) -> Result<Vec<Label>> {
    m.predict(x)
}
