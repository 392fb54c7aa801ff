//! Decision-tree and random-forest baselines for multi-label cause
//! prediction from main-damage features.
//!
//! Multi-label prediction uses binary relevance: one independent model per
//! non-green cause. A bit with no predicted cause is reported as green.

pub mod features;
pub mod forest;
pub mod tree;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use features::{
    build_features, feature_index, feature_name, FeatureVector, LabelVector, FEATURE_DIM,
};
pub use forest::{fit_binary_forest, BinaryForest, ForestParams, MaxFeatures};
pub use tree::{fit_tree, gini, BinaryTree, Node, TreeParams};

use crate::error::{Error, Result};
use crate::model::FailureCause;
use crate::rules::CauseSet;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeTarget {
    pub cause: FailureCause,
    pub tree: BinaryTree,
}

/// One decision tree per cause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub params: TreeParams,
    pub targets: Vec<TreeTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestTarget {
    pub cause: FailureCause,
    pub forest: BinaryForest,
}

/// One random forest per cause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub targets: Vec<ForestTarget>,
}

fn target_labels(y: &[LabelVector], t: usize) -> Vec<bool> {
    y.iter().map(|l| l.target(t)).collect()
}

pub fn fit_tree_model(
    x: &[FeatureVector],
    y: &[LabelVector],
    params: TreeParams,
) -> Result<TreeModel> {
    tree::check_shape(x, y.len())?;
    let targets = FailureCause::DAMAGE_CAUSES
        .iter()
        .enumerate()
        .map(|(t, &cause)| {
            Ok(TreeTarget {
                cause,
                tree: fit_tree(x, &target_labels(y, t), params)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TreeModel { params, targets })
}

/// Each target draws from its own ChaCha8 stream (stream = target index)
/// of the seeded generator, so targets are independent of fit order.
pub fn fit_forest(
    x: &[FeatureVector],
    y: &[LabelVector],
    params: ForestParams,
) -> Result<ForestModel> {
    tree::check_shape(x, y.len())?;
    let targets = FailureCause::DAMAGE_CAUSES
        .iter()
        .enumerate()
        .map(|(t, &cause)| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            Ok(ForestTarget {
                cause,
                forest: fit_binary_forest(x, &target_labels(y, t), &params, &mut rng)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ForestModel { params, targets })
}

/// A persisted model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CauseModel {
    DecisionTree(TreeModel),
    RandomForest(ForestModel),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    n_features: usize,
    model: CauseModel,
}

impl CauseModel {
    pub fn n_features(&self) -> usize {
        let first = match self {
            CauseModel::DecisionTree(m) => m.targets.first().map(|t| t.tree.n_features),
            CauseModel::RandomForest(m) => m
                .targets
                .first()
                .and_then(|t| t.forest.trees.first())
                .map(|t| t.n_features),
        };
        first.unwrap_or(0)
    }

    /// Per-cause positive probability (leaf probability for trees, vote
    /// fraction for forests).
    pub fn probabilities(&self, x: &FeatureVector) -> Result<Vec<(FailureCause, f64)>> {
        match self {
            CauseModel::DecisionTree(m) => m
                .targets
                .iter()
                .map(|t| Ok((t.cause, t.tree.predict_proba(x)?)))
                .collect(),
            CauseModel::RandomForest(m) => m
                .targets
                .iter()
                .map(|t| Ok((t.cause, t.forest.vote_fraction(x)?)))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            n_features: self.n_features(),
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        if f.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Model(format!(
                "schema_version {} not supported",
                f.schema_version
            )));
        }
        Ok(f.model)
    }
}

/// Causes with probability >= 0.5; none at all means green.
pub fn predict(model: &CauseModel, x: &FeatureVector) -> Result<CauseSet> {
    let probs = model.probabilities(x)?;
    Ok(CauseSet::from_causes(
        probs.into_iter().filter(|(_, p)| *p >= 0.5).map(|(c, _)| c),
    ))
}

/// Leave-one-out predictions: sample `i` is predicted by a model fit on all
/// other samples.
pub fn leave_one_out<F>(x: &[FeatureVector], y: &[LabelVector], mut fit: F) -> Result<Vec<CauseSet>>
where
    F: FnMut(&[FeatureVector], &[LabelVector]) -> Result<CauseModel>,
{
    tree::check_shape(x, y.len())?;
    if x.len() < 2 {
        return Err(Error::InvalidValue(
            "leave-one-out needs at least two samples".into(),
        ));
    }
    (0..x.len())
        .map(|i| {
            let xs: Vec<_> = x
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| v.clone())
                .collect();
            let ys: Vec<_> = y
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| *v)
                .collect();
            predict(&fit(&xs, &ys)?, &x[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use FailureCause as F;

    fn fv(bits: &[u8]) -> FeatureVector {
        FeatureVector(bits.iter().map(|&b| b == 1).collect())
    }

    fn data() -> (Vec<FeatureVector>, Vec<LabelVector>) {
        let x = vec![
            fv(&[1, 0, 0]),
            fv(&[0, 1, 0]),
            fv(&[0, 0, 1]),
            fv(&[1, 1, 0]),
        ];
        let y = vec![
            LabelVector::from_causes(&[F::ThermalWear]),
            LabelVector::from_causes(&[F::Whirl]),
            LabelVector::from_causes(&[]),
            LabelVector::from_causes(&[F::ThermalWear, F::Whirl]),
        ];
        (x, y)
    }

    #[test]
    fn tree_model_reproduces_training_labels() {
        let (x, y) = data();
        let m = CauseModel::DecisionTree(fit_tree_model(&x, &y, TreeParams::default()).unwrap());
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(predict(&m, xi).unwrap().causes, yi.to_cause_set().causes);
        }
        assert!(predict(&m, &x[2]).unwrap().is_green());
    }

    #[test]
    fn pure_leaf_gives_single_cause() {
        let x = vec![fv(&[1]), fv(&[1])];
        let y = vec![LabelVector::from_causes(&[F::ThermalWear]); 2];
        let m = CauseModel::DecisionTree(fit_tree_model(&x, &y, TreeParams::default()).unwrap());
        let set = predict(&m, &x[0]).unwrap();
        assert_eq!(
            set.causes.into_iter().collect::<Vec<_>>(),
            vec![F::ThermalWear]
        );
    }

    #[test]
    fn model_json_round_trip_and_dimension_check() {
        let (x, y) = data();
        let m = CauseModel::RandomForest(
            fit_forest(
                &x,
                &y,
                ForestParams {
                    n_trees: 5,
                    seed: 3,
                    ..Default::default()
                },
            )
            .unwrap(),
        );
        let text = m.to_json();
        let back = CauseModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.n_features(), 3);
        assert!(matches!(
            predict(&back, &fv(&[1, 0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn forest_seed_determinism() {
        let (x, y) = data();
        let p = |seed| ForestParams {
            n_trees: 10,
            seed,
            ..Default::default()
        };
        let a = CauseModel::RandomForest(fit_forest(&x, &y, p(11)).unwrap()).to_json();
        let b = CauseModel::RandomForest(fit_forest(&x, &y, p(11)).unwrap()).to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn loo_runs_per_sample() {
        let (x, y) = data();
        let preds = leave_one_out(&x, &y, |xs, ys| {
            Ok(CauseModel::DecisionTree(fit_tree_model(
                xs,
                ys,
                TreeParams::default(),
            )?))
        })
        .unwrap();
        assert_eq!(preds.len(), 4);
    }
}
