use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Builder, TreeModel, TreeParams};
use super::{majority, Classifier};
use crate::preprocessing::FeatureMatrix;
use crate::{Error, Label, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per node; `None` means `floor(sqrt(d))`.
    pub features_per_split: Option<usize>,
    /// Draw an n-row bootstrap sample per tree; otherwise use every row once.
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            features_per_split: None,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

impl ForestParams {
    pub fn resolved_features(&self, d: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d.max(1))
    }
}

/// Bagged CART trees combined by majority vote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub master_seed: u64,
    features_per_split: usize,
    n_features: usize,
    trees: Vec<TreeModel>,
}

impl ForestModel {
    /// Assembles a forest from already-built trees.
    pub fn from_trees(trees: Vec<TreeModel>, master_seed: u64) -> Result<Self> {
        let first = trees
            .first()
            .ok_or_else(|| Error::InvalidParam("a forest needs at least one tree".into()))?;
        let n_features = first.n_features();
        if trees.iter().any(|t| t.n_features() != n_features) {
            return Err(Error::InvalidParam(
                "trees disagree on feature count".into(),
            ));
        }
        Ok(ForestModel {
            params: ForestParams {
                n_trees: trees.len(),
                ..ForestParams::default()
            },
            master_seed,
            features_per_split: n_features,
            n_features,
            trees,
        })
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn features_per_split(&self) -> usize {
        self.features_per_split
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.trees.is_empty() || self.trees.len() != self.params.n_trees {
            return Err(Error::ModelFormat("forest tree count mismatch".into()));
        }
        for t in &self.trees {
            if t.n_features() != self.n_features {
                return Err(Error::ModelFormat("forest tree width mismatch".into()));
            }
            t.check()?;
        }
        Ok(())
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> Label {
        majority(self.trees.iter().map(|t| t.predict_row(row))).expect("forest has trees")
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of tree `t`: SplitMix64 applied to `master_seed + t * GOLDEN_GAMMA`.
/// Each tree's randomness depends only on its own index, so trees can be
/// built in any order.
pub fn tree_seed(master_seed: u64, tree_index: usize) -> u64 {
    splitmix64(master_seed.wrapping_add((tree_index as u64).wrapping_mul(GOLDEN_GAMMA)))
}

/// Trains the trees on the rayon pool; see [`fit_random_forest_with`].
pub fn fit_random_forest(
    x: &FeatureMatrix,
    y: &[Label],
    params: ForestParams,
    master_seed: u64,
) -> Result<ForestModel> {
    fit_random_forest_with(x, y, params, master_seed, true)
}

/// Serial and parallel training produce identical forests.
pub fn fit_random_forest_with(
    x: &FeatureMatrix,
    y: &[Label],
    params: ForestParams,
    master_seed: u64,
    parallel: bool,
) -> Result<ForestModel> {
    if params.n_trees < 1 {
        return Err(Error::InvalidParam("n_trees must be at least 1".into()));
    }
    let d = x.n_features();
    let k = params.resolved_features(d);
    let builder = Builder::new(x, y, params.tree, Some(k))?;
    let n = y.len();

    let build = |t: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(master_seed, t));
        let sample: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        builder.grow(sample, Some(&mut rng))
    };
    let trees: Vec<TreeModel> = if parallel {
        (0..params.n_trees).into_par_iter().map(build).collect()
    } else {
        (0..params.n_trees).map(build).collect()
    };

    Ok(ForestModel {
        params,
        master_seed,
        features_per_split: k,
        n_features: d,
        trees,
    })
}

pub fn predict_forest(m: &ForestModel, x: &FeatureMatrix) -> Result<Vec<Label>> {
    m.predict(x)
}
