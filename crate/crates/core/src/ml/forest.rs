use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::tree::{
    check_shape, grow_tree, split_decrease, AllFeatures, BinaryTree, FeatureChooser, TreeParams,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))` features per split.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().ceil() as usize).clamp(1, d.max(1)),
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub seed: u64,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
            tree: TreeParams::default(),
        }
    }
}

/// Draws a random feature subset per node. If none of the drawn features
/// splits the node, further features are drawn until one does.
struct RandomSubset<'r> {
    rng: &'r mut ChaCha8Rng,
    n_features: usize,
    k: usize,
}

impl FeatureChooser for RandomSubset<'_> {
    fn candidates(&mut self, x: &[FeatureVector], y: &[bool], idx: &[usize]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.shuffle(self.rng);
        let mut take = self.k;
        while take < order.len()
            && !order[..take]
                .iter()
                .any(|&f| split_decrease(x, y, idx, f).is_some())
        {
            take += 1;
        }
        order.truncate(take);
        order
    }
}

/// Bagged trees for one binary target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryForest {
    pub trees: Vec<BinaryTree>,
}

impl BinaryForest {
    /// Fraction of trees voting positive.
    pub fn vote_fraction(&self, x: &FeatureVector) -> Result<f64> {
        let mut yes = 0usize;
        for t in &self.trees {
            if t.predict(x)? {
                yes += 1;
            }
        }
        Ok(yes as f64 / self.trees.len() as f64)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<bool> {
        Ok(self.vote_fraction(x)? >= 0.5)
    }
}

/// Fit one target's forest, drawing all randomness from `rng`.
pub fn fit_binary_forest(
    x: &[FeatureVector],
    y: &[bool],
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> Result<BinaryForest> {
    let d = check_shape(x, y.len())?;
    if params.n_trees == 0 {
        return Err(Error::InvalidValue("n_trees must be positive".into()));
    }
    let n = x.len();
    let k = params.max_features.resolve(d);
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let sample: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let tree = if k >= d {
            grow_tree(x, y, sample, params.tree, AllFeatures(d))
        } else {
            let chooser = RandomSubset {
                rng: &mut *rng,
                n_features: d,
                k,
            };
            grow_tree(x, y, sample, params.tree, chooser)
        };
        trees.push(tree);
    }
    Ok(BinaryForest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::tree::fit_tree;
    use rand::SeedableRng;

    fn fv(bits: &[u8]) -> FeatureVector {
        FeatureVector(bits.iter().map(|&b| b == 1).collect())
    }

    fn toy() -> (Vec<FeatureVector>, Vec<bool>) {
        let x = vec![
            fv(&[1, 0, 0, 1]),
            fv(&[1, 1, 0, 0]),
            fv(&[0, 0, 1, 1]),
            fv(&[0, 1, 1, 0]),
            fv(&[1, 0, 1, 0]),
            fv(&[0, 1, 0, 1]),
        ];
        let y = x.iter().map(|v| v.get(0)).collect();
        (x, y)
    }

    #[test]
    fn sqrt_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(48), 7);
        assert_eq!(MaxFeatures::Sqrt.resolve(4), 2);
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::Count(100).resolve(6), 6);
    }

    #[test]
    fn degenerate_forest_is_a_tree() {
        let (x, y) = toy();
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = fit_binary_forest(&x, &y, &params, &mut rng).unwrap();
        let t = fit_tree(&x, &y, TreeParams::default()).unwrap();
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = toy();
        let params = ForestParams {
            n_trees: 15,
            seed: 7,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let f = fit_binary_forest(&x, &y, &params, &mut rng).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(f.predict(xi).unwrap(), *yi);
        }
    }

    #[test]
    fn zero_trees_rejected() {
        let (x, y) = toy();
        let params = ForestParams {
            n_trees: 0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(fit_binary_forest(&x, &y, &params, &mut rng).is_err());
    }
}
