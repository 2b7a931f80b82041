//! Gradient boosted decision trees with three-partition split finding,
//! leaf-wise early stopping, and unbiased gain feature importance.
//!
//! Two training modes share one engine:
//!
//! - **classic**: the usual second-order GBDT, picking every split by the
//!   single-set gain;
//! - **unbiased**: each boosting round draws a fresh three-way sample
//!   partition; sub-training rows pick each feature's best threshold, the
//!   first validation bucket picks the feature, and the second gates
//!   leaf-wise early stopping, which removes the usual preference for
//!   high-cardinality features.
//!
//! Post hoc, [`importance::unbiased_gain`] estimates per-feature importance
//! on held-out data with equal-size subsampled node statistics, so features
//! independent of the target score zero in expectation; classic gain and
//! permutation baselines live alongside it.
//!
//! The numeric core is generic over [`Scalar`]; the crate root pins the
//! `f64` aliases that the model file format (`ugbm-1` JSON) and all stated
//! accumulation guarantees refer to.

pub mod booster;
pub mod data;
pub mod eval;
pub mod experiments;
pub mod importance;
pub mod loss;
pub mod rng;
pub mod scalar;
pub mod splitter;
pub mod tree;

pub use booster::{BoosterError, Mode, MODEL_FORMAT_VERSION};
pub use data::{Bucket, DataError, FeatureKind, PartitionAssignment, UNSEEN_CATEGORY};
pub use eval::{EvalError, MetricResult};
pub use experiments::{ExperimentError, SelectionMethod};
pub use importance::{
    ImportanceError, ImportanceMethod, ImportanceReport, PermutationMetric, SubsampleDraw,
    SubsampleMode,
};
pub use loss::{LossError, LossKind};
pub use scalar::Scalar;
pub use splitter::{ScoringScheme, SplitError, HESSIAN_EPSILON};
pub use tree::{GrowthEvent, NodeRole, RowAccess};

/// `f64` instantiations of the generic core.
pub type Dataset = data::Dataset<f64>;
pub type FeatureColumn = data::FeatureColumn<f64>;
pub type GradHess = loss::GradHess<f64>;
pub type PartStats = splitter::PartStats<f64>;
pub type NodeStats = splitter::NodeStats<f64>;
pub type SplitKind = splitter::SplitKind<f64>;
pub type SplitDescriptor = splitter::SplitDescriptor<f64>;
pub type SplitCandidate = splitter::SplitCandidate<f64>;
pub type SplitterConfig = splitter::SplitterConfig<f64>;
pub type Tree = tree::Tree<f64>;
pub type TreeNode = tree::TreeNode<f64>;
pub type GrowthConfig = tree::GrowthConfig<f64>;
pub type GBMConfig = booster::GBMConfig<f64>;
pub type BoostedModel = booster::BoostedModel<f64>;
pub type FeatureMeta = booster::FeatureMeta;
