//! The boosting loop (classic and unbiased modes), ensemble prediction,
//! and model persistence.
//!
//! Unbiased mode draws a fresh three-way sample partition per boosting
//! round from a stream derived deterministically from the config seed and
//! the round index, so the whole pipeline is a pure function of
//! (data, config).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    partition, Dataset, DataError, FeatureColumn, FeatureKind, PartitionAssignment,
    UNSEEN_CATEGORY,
};
use crate::loss::{base_score, grad_hess, LossError, LossKind};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::splitter::{ScoringScheme, SplitDescriptor, SplitKind, SplitterConfig};
use crate::tree::{grow, GrowthConfig, NodeRole, RowAccess, Tree, TreeNode};

/// Stream coordinate reserved for per-round partition draws.
const PARTITION_STREAM: u64 = 1;
/// Consecutive bare zero-weight trees tolerated before stopping early.
const DEGENERATE_TREE_LIMIT: usize = 10;

pub const MODEL_FORMAT_VERSION: &str = "ugbm-1";

#[derive(Debug, Error)]
pub enum BoosterError {
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("non-finite prediction or gradient; training diverged")]
    NonFiniteGradient,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("model file format `{found}` is not `{expected}`", expected = MODEL_FORMAT_VERSION)]
    FormatVersionMismatch { found: String },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Training mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Single-set second-order GBDT baseline.
    Classic,
    /// Three-partition split finding with leaf-wise early stopping.
    Unbiased,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Classic => "classic",
            Mode::Unbiased => "unbiased",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(Mode::Classic),
            "unbiased" => Ok(Mode::Unbiased),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, Serialize)]
pub struct GBMConfig<S: Scalar> {
    pub mode: Mode,
    pub n_estimators: usize,
    pub learning_rate: S,
    /// Minimum sub-training samples on each side of a split.
    pub min_data_in_leaf: usize,
    /// Threshold on the gating gain; may be negative in unbiased mode.
    pub min_split_gain: S,
    pub max_leaves: usize,
    pub max_depth: usize,
    /// Sub-train : validation-1 : validation-2 proportions.
    pub partition_ratios: [f64; 3],
    /// Identify the two validation sets (the `1:1+1` layout).
    pub merge_validation: bool,
    pub loss: LossKind,
    pub seed: u64,
}

impl<S: Scalar> Default for GBMConfig<S> {
    fn default() -> Self {
        GBMConfig {
            mode: Mode::Classic,
            n_estimators: 200,
            learning_rate: S::cast(0.05),
            min_data_in_leaf: 20,
            min_split_gain: S::zero(),
            max_leaves: 31,
            max_depth: 10,
            partition_ratios: [1.0, 1.0, 1.0],
            merge_validation: true,
            loss: LossKind::SquaredError,
            seed: 0,
        }
    }
}

impl<S: Scalar> GBMConfig<S> {
    pub fn validate(&self) -> Result<(), BoosterError> {
        let fail = |msg: &str| Err(BoosterError::InvalidConfig(msg.to_string()));
        if self.n_estimators == 0 {
            return fail("n_estimators must be positive");
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= S::zero() {
            return fail("learning_rate must be positive and finite");
        }
        if self.min_data_in_leaf == 0 {
            return fail("min_data_in_leaf must be positive");
        }
        if self.max_leaves == 0 || self.max_depth == 0 {
            return fail("max_leaves and max_depth must be positive");
        }
        if !self.min_split_gain.is_finite() {
            return fail("min_split_gain must be finite");
        }
        if self.mode == Mode::Classic && self.min_split_gain < S::zero() {
            return fail("classic mode requires min_split_gain >= 0");
        }
        if self
            .partition_ratios
            .iter()
            .any(|r| !r.is_finite() || *r < 0.0)
        {
            return fail("partition ratios must be non-negative and finite");
        }
        Ok(())
    }

    pub(crate) fn scoring_scheme(&self) -> ScoringScheme {
        match (self.mode, self.merge_validation) {
            (Mode::Classic, _) => ScoringScheme::Classic,
            (Mode::Unbiased, true) => ScoringScheme::UnbiasedMerged,
            (Mode::Unbiased, false) => ScoringScheme::UnbiasedThreeWay,
        }
    }

    fn growth_config(&self) -> GrowthConfig<S> {
        GrowthConfig {
            splitter: SplitterConfig::new(self.scoring_scheme(), self.min_data_in_leaf),
            max_leaves: self.max_leaves,
            max_depth: self.max_depth,
            min_split_gain: self.min_split_gain,
        }
    }
}

/// Name, kind, and vocabulary of one model input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    pub vocab: Option<Vec<String>>,
}

/// A trained ensemble.
#[derive(Debug, Clone)]
pub struct BoostedModel<S: Scalar> {
    pub base_score: S,
    pub learning_rate: S,
    pub loss: LossKind,
    pub mode: Mode,
    pub features: Vec<FeatureMeta>,
    pub trees: Vec<Tree<S>>,
    /// Training-time gating-gain sums per feature (unbiased mode).
    pub importance_unbiased: Vec<S>,
    /// Training-time single-set gain sums per feature (classic mode).
    pub importance_classic: Vec<S>,
    /// Config used at fit time. Reconstructed from the file plus defaults
    /// after `load`; only persisted fields survive the round trip.
    pub config_echo: GBMConfig<S>,
}

fn feature_meta<S: Scalar>(train: &Dataset<S>) -> Vec<FeatureMeta> {
    train
        .feature_names()
        .iter()
        .zip(train.columns())
        .map(|(name, col)| FeatureMeta {
            name: name.clone(),
            kind: col.kind(),
            vocab: col.vocab().map(|v| v.to_vec()),
        })
        .collect()
}

/// Train an ensemble.
pub fn fit<S: Scalar>(train: &Dataset<S>, config: &GBMConfig<S>) -> Result<BoostedModel<S>, BoosterError> {
    config.validate()?;
    let n = train.n_rows();
    let min_rows = match config.mode {
        Mode::Classic => 1,
        Mode::Unbiased => 3,
    };
    if n < min_rows {
        return Err(BoosterError::DegenerateDataset(format!(
            "{} mode needs at least {min_rows} rows, got {n}",
            config.mode.as_str()
        )));
    }

    let base = base_score(config.loss, train.target())?;
    let mut preds = vec![base; n];
    let growth = config.growth_config();
    let m = train.n_features();
    let mut importance = vec![S::zero(); m];
    let mut trees: Vec<Tree<S>> = Vec::with_capacity(config.n_estimators);
    let mut degenerate_streak = 0usize;

    for round in 0..config.n_estimators {
        let gh = grad_hess(config.loss, &preds, train.target())?;
        if gh.g.iter().any(|v| !v.is_finite()) || gh.h.iter().any(|v| !v.is_finite()) {
            return Err(BoosterError::NonFiniteGradient);
        }
        let parts = match config.mode {
            Mode::Classic => PartitionAssignment::single_bucket(n),
            Mode::Unbiased => partition(
                n,
                config.partition_ratios,
                config.merge_validation,
                &mut stream_rng(config.seed, &[PARTITION_STREAM, round as u64]),
            )?,
        };
        let tree = grow(train, &gh, &parts, &growth);
        for (i, pred) in preds.iter_mut().enumerate() {
            *pred += config.learning_rate * tree.predict_row(train, i);
            if !pred.is_finite() {
                return Err(BoosterError::NonFiniteGradient);
            }
        }
        for (acc, delta) in importance.iter_mut().zip(&tree.feature_importance_delta) {
            *acc += *delta;
        }

        let bare_zero_leaf = tree.nodes.len() == 1
            && matches!(tree.nodes[0].role, NodeRole::Leaf { weight } if weight.abs() <= S::cast(1e-12));
        degenerate_streak = if bare_zero_leaf {
            degenerate_streak + 1
        } else {
            0
        };
        trees.push(tree);
        if degenerate_streak >= DEGENERATE_TREE_LIMIT {
            break;
        }
    }

    let (importance_unbiased, importance_classic) = match config.mode {
        Mode::Classic => (vec![S::zero(); m], importance),
        Mode::Unbiased => (importance, vec![S::zero(); m]),
    };
    Ok(BoostedModel {
        base_score: base,
        learning_rate: config.learning_rate,
        loss: config.loss,
        mode: config.mode,
        features: feature_meta(train),
        trees,
        importance_unbiased,
        importance_classic,
        config_echo: config.clone(),
    })
}

/// Prediction input with categorical codes remapped to the model vocabulary.
pub(crate) enum TranslatedColumn<'a, S> {
    Numeric(&'a [S]),
    Categorical(Vec<u32>),
}

pub(crate) struct TranslatedInput<'a, S> {
    pub(crate) columns: Vec<TranslatedColumn<'a, S>>,
    pub(crate) n_rows: usize,
}

impl<S: Scalar> RowAccess<S> for TranslatedInput<'_, S> {
    fn numeric(&self, feature: usize, row: usize) -> S {
        match &self.columns[feature] {
            TranslatedColumn::Numeric(v) => v[row],
            TranslatedColumn::Categorical(_) => panic!("feature {feature} is categorical"),
        }
    }

    fn code(&self, feature: usize, row: usize) -> u32 {
        match &self.columns[feature] {
            TranslatedColumn::Categorical(codes) => codes[row],
            TranslatedColumn::Numeric(_) => panic!("feature {feature} is numeric"),
        }
    }
}

impl<S: Scalar> BoostedModel<S> {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Check names and kinds, then remap categorical codes onto the model
    /// vocabulary by label; labels the model never saw route as unseen.
    pub(crate) fn translate<'a>(
        &self,
        data: &'a Dataset<S>,
    ) -> Result<TranslatedInput<'a, S>, BoosterError> {
        if data.n_features() != self.features.len() {
            return Err(BoosterError::SchemaMismatch(format!(
                "expected {} features, got {}",
                self.features.len(),
                data.n_features()
            )));
        }
        let mut columns = Vec::with_capacity(self.features.len());
        for (j, meta) in self.features.iter().enumerate() {
            let name = &data.feature_names()[j];
            if name != &meta.name {
                return Err(BoosterError::SchemaMismatch(format!(
                    "feature {j} is `{name}`, expected `{}`",
                    meta.name
                )));
            }
            let col = data.column(j);
            if col.kind() != meta.kind {
                return Err(BoosterError::SchemaMismatch(format!(
                    "feature `{name}` kind differs from the model"
                )));
            }
            columns.push(match col {
                FeatureColumn::Numeric(v) => TranslatedColumn::Numeric(v.as_slice()),
                FeatureColumn::Categorical { codes, vocab } => {
                    let model_vocab = meta.vocab.as_deref().unwrap_or(&[]);
                    let mapping: Vec<u32> = vocab
                        .iter()
                        .map(|label| {
                            model_vocab
                                .iter()
                                .position(|m| m == label)
                                .map_or(UNSEEN_CATEGORY, |p| p as u32)
                        })
                        .collect();
                    TranslatedColumn::Categorical(
                        codes.iter().map(|&c| mapping[c as usize]).collect(),
                    )
                }
            });
        }
        Ok(TranslatedInput {
            columns,
            n_rows: data.n_rows(),
        })
    }

    pub(crate) fn predict_access<A: RowAccess<S>>(&self, input: &A, n_rows: usize) -> Vec<S> {
        let mut out = vec![self.base_score; n_rows];
        for tree in &self.trees {
            for (row, out_i) in out.iter_mut().enumerate() {
                *out_i += self.learning_rate * tree.predict_row(input, row);
            }
        }
        out
    }

    pub(crate) fn predict_translated(&self, input: &TranslatedInput<'_, S>) -> Vec<S> {
        self.predict_access(input, input.n_rows)
    }

    /// Raw ensemble scores: `base_score + learning_rate * sum of tree outputs`.
    pub fn predict(&self, data: &Dataset<S>) -> Result<Vec<S>, BoosterError> {
        let input = self.translate(data)?;
        Ok(self.predict_translated(&input))
    }
}

mod wire {
    //! On-disk JSON document (format `ugbm-1`).
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    pub struct ModelFile {
        pub version: String,
        pub mode: String,
        pub loss: String,
        pub base_score: f64,
        pub learning_rate: f64,
        pub features: Vec<FeatureFile>,
        pub importance: ImportanceFile,
        pub trees: Vec<TreeFile>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct FeatureFile {
        pub name: String,
        pub kind: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub vocab: Option<Vec<String>>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct ImportanceFile {
        pub unbiased: Vec<f64>,
        pub classic: Vec<f64>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct TreeFile {
        pub nodes: Vec<NodeFile>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct NodeFile {
        pub id: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub leaf: Option<LeafFile>,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub split: Option<SplitFile>,
        pub stats: StatsFile,
    }

    #[derive(Serialize, Deserialize)]
    pub struct LeafFile {
        pub weight: f64,
    }

    #[derive(Serialize, Deserialize)]
    pub struct SplitFile {
        pub feature: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub threshold: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        pub left_categories: Option<Vec<u32>>,
        pub scores: [f64; 3],
        pub left: usize,
        pub right: usize,
    }

    #[derive(Serialize, Deserialize)]
    pub struct StatsFile {
        pub n_train: usize,
        pub g_train: f64,
    }
}

impl BoostedModel<f64> {
    /// Serialize to the versioned `ugbm-1` JSON document.
    ///
    /// The document persists everything prediction and post-hoc importance
    /// need; auxiliary per-bucket hessian sums are training-internal and
    /// are not written.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BoosterError> {
        let file = wire::ModelFile {
            version: MODEL_FORMAT_VERSION.to_string(),
            mode: self.mode.as_str().to_string(),
            loss: self.loss.as_str().to_string(),
            base_score: self.base_score,
            learning_rate: self.learning_rate,
            features: self
                .features
                .iter()
                .map(|f| wire::FeatureFile {
                    name: f.name.clone(),
                    kind: match f.kind {
                        FeatureKind::Numeric => "numeric".to_string(),
                        FeatureKind::Categorical => "categorical".to_string(),
                    },
                    vocab: f.vocab.clone(),
                })
                .collect(),
            importance: wire::ImportanceFile {
                unbiased: self.importance_unbiased.clone(),
                classic: self.importance_classic.clone(),
            },
            trees: self
                .trees
                .iter()
                .map(|tree| wire::TreeFile {
                    nodes: tree
                        .nodes
                        .iter()
                        .map(|node| {
                            let (leaf, split) = match &node.role {
                                NodeRole::Leaf { weight } => {
                                    (Some(wire::LeafFile { weight: *weight }), None)
                                }
                                NodeRole::Internal {
                                    descriptor,
                                    left,
                                    right,
                                    scores,
                                } => {
                                    let (threshold, left_categories) = match &descriptor.kind {
                                        SplitKind::NumericThreshold(t) => (Some(*t), None),
                                        SplitKind::CategorySubset(set) => {
                                            (None, Some(set.iter().copied().collect()))
                                        }
                                    };
                                    (
                                        None,
                                        Some(wire::SplitFile {
                                            feature: descriptor.feature_index,
                                            threshold,
                                            left_categories,
                                            scores: [scores.0, scores.1, scores.2],
                                            left: *left,
                                            right: *right,
                                        }),
                                    )
                                }
                            };
                            wire::NodeFile {
                                id: node.id,
                                leaf,
                                split,
                                stats: wire::StatsFile {
                                    n_train: node.n_train(),
                                    g_train: node.g_train(),
                                },
                            }
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file)
            .map_err(|e| BoosterError::CorruptModel(e.to_string()))?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    /// Load a model produced by [`BoostedModel::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BoosterError> {
        let text = fs::read_to_string(path)?;

        #[derive(serde::Deserialize)]
        struct VersionProbe {
            version: String,
        }
        let probe: VersionProbe = serde_json::from_str(&text)
            .map_err(|e| BoosterError::CorruptModel(e.to_string()))?;
        if probe.version != MODEL_FORMAT_VERSION {
            return Err(BoosterError::FormatVersionMismatch {
                found: probe.version,
            });
        }
        let file: wire::ModelFile =
            serde_json::from_str(&text).map_err(|e| BoosterError::CorruptModel(e.to_string()))?;

        let mode: Mode = file
            .mode
            .parse()
            .map_err(BoosterError::CorruptModel)?;
        let loss: LossKind = file
            .loss
            .parse()
            .map_err(BoosterError::CorruptModel)?;
        let features: Vec<FeatureMeta> = file
            .features
            .iter()
            .map(|f| {
                let kind = match f.kind.as_str() {
                    "numeric" => Ok(FeatureKind::Numeric),
                    "categorical" => Ok(FeatureKind::Categorical),
                    other => Err(BoosterError::CorruptModel(format!(
                        "unknown feature kind `{other}`"
                    ))),
                }?;
                Ok(FeatureMeta {
                    name: f.name.clone(),
                    kind,
                    vocab: f.vocab.clone(),
                })
            })
            .collect::<Result<_, BoosterError>>()?;

        let mut trees = Vec::with_capacity(file.trees.len());
        for tree_file in &file.trees {
            trees.push(load_tree(tree_file, features.len())?);
        }

        let config_echo = GBMConfig::<f64> {
            mode,
            loss,
            learning_rate: file.learning_rate,
            ..GBMConfig::default()
        };

        Ok(BoostedModel {
            base_score: file.base_score,
            learning_rate: file.learning_rate,
            loss,
            mode,
            features,
            trees,
            importance_unbiased: file.importance.unbiased,
            importance_classic: file.importance.classic,
            config_echo,
        })
    }
}

fn load_tree(tree_file: &wire::TreeFile, n_features: usize) -> Result<Tree<f64>, BoosterError> {
    let corrupt = |msg: String| BoosterError::CorruptModel(msg);
    let n_nodes = tree_file.nodes.len();
    if n_nodes == 0 {
        return Err(corrupt("tree with no nodes".into()));
    }
    let mut nodes = Vec::with_capacity(n_nodes);
    for (idx, node) in tree_file.nodes.iter().enumerate() {
        if node.id != idx {
            return Err(corrupt(format!("node id {} out of order", node.id)));
        }
        let role = match (&node.leaf, &node.split) {
            (Some(leaf), None) => NodeRole::Leaf {
                weight: leaf.weight,
            },
            (None, Some(split)) => {
                if split.left >= n_nodes || split.right >= n_nodes {
                    return Err(corrupt(format!("node {} links out of range", node.id)));
                }
                if split.feature >= n_features {
                    return Err(corrupt(format!("node {} feature out of range", node.id)));
                }
                let kind = match (&split.threshold, &split.left_categories) {
                    (Some(t), None) => SplitKind::NumericThreshold(*t),
                    (None, Some(codes)) => {
                        SplitKind::CategorySubset(codes.iter().copied().collect())
                    }
                    _ => {
                        return Err(corrupt(format!(
                            "node {} must have exactly one of threshold/left_categories",
                            node.id
                        )))
                    }
                };
                NodeRole::Internal {
                    descriptor: SplitDescriptor {
                        feature_index: split.feature,
                        kind,
                    },
                    left: split.left,
                    right: split.right,
                    scores: (split.scores[0], split.scores[1], split.scores[2]),
                }
            }
            _ => {
                return Err(corrupt(format!(
                    "node {} must be exactly one of leaf/split",
                    node.id
                )))
            }
        };
        let mut stats = crate::splitter::NodeStats::zero();
        stats.parts[0].grad = node.stats.g_train;
        stats.parts[0].count = node.stats.n_train;
        nodes.push(TreeNode {
            id: node.id,
            depth: 0,
            role,
            stats,
        });
    }

    // Rebuild depths from the links; also catches cycles/orphans.
    let mut depths = vec![usize::MAX; n_nodes];
    depths[0] = 0;
    let mut stack = vec![0usize];
    let mut visited = 1usize;
    while let Some(id) = stack.pop() {
        if let NodeRole::Internal { left, right, .. } = nodes[id].role {
            for child in [left, right] {
                if depths[child] != usize::MAX {
                    return Err(BoosterError::CorruptModel(format!(
                        "node {child} has two parents"
                    )));
                }
                depths[child] = depths[id] + 1;
                visited += 1;
                stack.push(child);
            }
        }
    }
    if visited != n_nodes {
        return Err(BoosterError::CorruptModel(
            "tree has unreachable nodes".into(),
        ));
    }
    for (node, depth) in nodes.iter_mut().zip(depths) {
        node.depth = depth;
    }
    Ok(Tree {
        nodes,
        feature_importance_delta: vec![0.0; n_features],
    })
}
