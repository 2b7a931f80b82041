//! Leaf-wise tree construction, node representation with stored statistics,
//! and single-tree prediction.
//!
//! Growth keeps a max-priority frontier of splittable leaves keyed by the
//! gating gain (`score3` normalized by `1/(2n)`). Each round pops the
//! maximal leaf, credits its gain to the split feature's importance, and
//! only then checks the early-stopping threshold, so a rejected terminal
//! split still leaves its (possibly negative) mark on the importance
//! vector.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::data::{Dataset, FeatureColumn, PartitionAssignment, UNSEEN_CATEGORY};
use crate::loss::GradHess;
use crate::scalar::Scalar;
use crate::splitter::{
    find_split_with_parent, NodeStats, SplitCandidate, SplitDescriptor, SplitKind, SplitterConfig,
};

/// Internal/leaf payload of a tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeRole<S> {
    Leaf {
        weight: S,
    },
    Internal {
        descriptor: SplitDescriptor<S>,
        left: usize,
        right: usize,
        scores: (S, S, S),
    },
}

/// One node with the statistics snapshot retained for post-hoc importance.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode<S> {
    pub id: usize,
    pub depth: usize,
    pub role: NodeRole<S>,
    pub stats: NodeStats<S>,
}

impl<S: Scalar> TreeNode<S> {
    /// Sub-training sample count at this node.
    pub fn n_train(&self) -> usize {
        self.stats.parts[0].count
    }

    /// Sub-training gradient sum at this node.
    pub fn g_train(&self) -> S {
        self.stats.parts[0].grad
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.role, NodeRole::Leaf { .. })
    }
}

/// A grown regression tree; node ids index `nodes`, the root is id 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<S> {
    pub nodes: Vec<TreeNode<S>>,
    /// Per-feature gating-gain sums accumulated during growth, negative
    /// contributions included.
    pub feature_importance_delta: Vec<S>,
}

/// Feature access during routing; implemented by datasets and translated
/// prediction inputs.
pub trait RowAccess<S> {
    fn numeric(&self, feature: usize, row: usize) -> S;
    fn code(&self, feature: usize, row: usize) -> u32;
}

impl<S: Scalar> RowAccess<S> for Dataset<S> {
    fn numeric(&self, feature: usize, row: usize) -> S {
        match self.column(feature) {
            FeatureColumn::Numeric(v) => v[row],
            FeatureColumn::Categorical { .. } => panic!("feature {feature} is categorical"),
        }
    }

    fn code(&self, feature: usize, row: usize) -> u32 {
        match self.column(feature) {
            FeatureColumn::Categorical { codes, .. } => codes[row],
            FeatureColumn::Numeric(_) => panic!("feature {feature} is numeric"),
        }
    }
}

impl<S: Scalar> Tree<S> {
    pub fn root(&self) -> &TreeNode<S> {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Leaf node id the row routes to.
    pub fn route<A: RowAccess<S>>(&self, data: &A, row: usize) -> usize {
        let mut id = 0usize;
        loop {
            match &self.nodes[id].role {
                NodeRole::Leaf { .. } => return id,
                NodeRole::Internal {
                    descriptor,
                    left,
                    right,
                    ..
                } => {
                    let go_left = match &descriptor.kind {
                        SplitKind::NumericThreshold(t) => {
                            data.numeric(descriptor.feature_index, row) <= *t
                        }
                        SplitKind::CategorySubset(set) => {
                            let code = data.code(descriptor.feature_index, row);
                            code != UNSEEN_CATEGORY && set.contains(&code)
                        }
                    };
                    id = if go_left { *left } else { *right };
                }
            }
        }
    }

    /// Weight of the leaf the row routes to.
    pub fn predict_row<A: RowAccess<S>>(&self, data: &A, row: usize) -> S {
        match self.nodes[self.route(data, row)].role {
            NodeRole::Leaf { weight } => weight,
            NodeRole::Internal { .. } => unreachable!("route returns a leaf"),
        }
    }
}

/// Growth events in execution order; used to assert trace conformance.
#[derive(Debug, Clone, PartialEq)]
pub enum GrowthEvent<S> {
    /// A leaf with the maximal gating gain left the frontier.
    Popped {
        node: usize,
        feature: usize,
        gain: S,
    },
    /// Its gain was added to the feature importance vector.
    Credited { feature: usize, gain: S },
    /// The popped gain fell below `min_split_gain`; growth stopped.
    BrokeBelowThreshold,
    /// The split was materialized.
    Split {
        node: usize,
        left: usize,
        right: usize,
    },
}

/// Budgets and thresholds for growing one tree.
#[derive(Debug, Clone)]
pub struct GrowthConfig<S: Scalar> {
    pub splitter: SplitterConfig<S>,
    pub max_leaves: usize,
    pub max_depth: usize,
    /// Threshold on the gating gain (normalized `score3`); may be negative.
    pub min_split_gain: S,
}

struct FrontierEntry<S> {
    gain: S,
    node_id: usize,
    candidate: SplitCandidate<S>,
    rows: Vec<u32>,
}

impl<S: Scalar> PartialEq for FrontierEntry<S> {
    fn eq(&self, other: &Self) -> bool {
        self.gain == other.gain && self.node_id == other.node_id
    }
}

impl<S: Scalar> Eq for FrontierEntry<S> {}

impl<S: Scalar> PartialOrd for FrontierEntry<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Scalar> Ord for FrontierEntry<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on gain; equal gains pop the smaller node id first.
        match self.gain.partial_cmp(&other.gain).expect("finite gains") {
            Ordering::Equal => other.node_id.cmp(&self.node_id),
            ord => ord,
        }
    }
}

fn leaf_weight<S: Scalar>(stats: &NodeStats<S>) -> S {
    let (g, h, _) = stats.totals();
    if h > S::zero() {
        -g / h
    } else {
        S::zero()
    }
}

fn route_left<S: Scalar>(descriptor: &SplitDescriptor<S>, dataset: &Dataset<S>, row: u32) -> bool {
    match &descriptor.kind {
        SplitKind::NumericThreshold(t) => {
            dataset.numeric(descriptor.feature_index, row as usize) <= *t
        }
        SplitKind::CategorySubset(set) => {
            set.contains(&dataset.code(descriptor.feature_index, row as usize))
        }
    }
}

/// Grow one tree and record the pop/credit/break/split event sequence.
pub fn grow_traced<S: Scalar>(
    dataset: &Dataset<S>,
    gh: &GradHess<S>,
    parts: &PartitionAssignment,
    cfg: &GrowthConfig<S>,
) -> (Tree<S>, Vec<GrowthEvent<S>>) {
    let n = dataset.n_rows();
    let two_n = S::cast(2.0) * S::from_count(n);
    let normalize = |score3: S| score3 / two_n;

    let all_rows: Vec<u32> = (0..n as u32).collect();
    let root_stats = NodeStats::from_rows(&all_rows, gh, parts);
    let mut nodes = vec![TreeNode {
        id: 0,
        depth: 0,
        role: NodeRole::Leaf {
            weight: leaf_weight(&root_stats),
        },
        stats: root_stats,
    }];
    let mut importance = vec![S::zero(); dataset.n_features()];
    let mut trace = Vec::new();
    let mut frontier: BinaryHeap<FrontierEntry<S>> = BinaryHeap::new();
    let mut leaves = 1usize;

    let offer = |frontier: &mut BinaryHeap<FrontierEntry<S>>,
                     nodes: &[TreeNode<S>],
                     node_id: usize,
                     rows: Vec<u32>| {
        if nodes[node_id].depth >= cfg.max_depth {
            return;
        }
        if let Some(candidate) = find_split_with_parent(
            &rows,
            dataset,
            gh,
            parts,
            &nodes[node_id].stats,
            &cfg.splitter,
        ) {
            frontier.push(FrontierEntry {
                gain: normalize(candidate.score3),
                node_id,
                candidate,
                rows,
            });
        }
    };

    if cfg.max_leaves > 1 {
        offer(&mut frontier, &nodes, 0, all_rows);
    }

    while leaves < cfg.max_leaves {
        let Some(entry) = frontier.pop() else {
            break;
        };
        let feature = entry.candidate.descriptor.feature_index;
        trace.push(GrowthEvent::Popped {
            node: entry.node_id,
            feature,
            gain: entry.gain,
        });
        importance[feature] += entry.gain;
        trace.push(GrowthEvent::Credited {
            feature,
            gain: entry.gain,
        });
        if entry.gain < cfg.min_split_gain {
            trace.push(GrowthEvent::BrokeBelowThreshold);
            break;
        }

        let FrontierEntry {
            node_id,
            candidate,
            rows,
            ..
        } = entry;
        let mut left_rows = Vec::with_capacity(candidate.left_stats.totals().2);
        let mut right_rows = Vec::with_capacity(candidate.right_stats.totals().2);
        for &row in &rows {
            if route_left(&candidate.descriptor, dataset, row) {
                left_rows.push(row);
            } else {
                right_rows.push(row);
            }
        }
        debug_assert_eq!(left_rows.len(), candidate.left_stats.totals().2);
        debug_assert_eq!(right_rows.len(), candidate.right_stats.totals().2);

        let depth = nodes[node_id].depth + 1;
        let left_id = nodes.len();
        nodes.push(TreeNode {
            id: left_id,
            depth,
            role: NodeRole::Leaf {
                weight: leaf_weight(&candidate.left_stats),
            },
            stats: candidate.left_stats,
        });
        let right_id = nodes.len();
        nodes.push(TreeNode {
            id: right_id,
            depth,
            role: NodeRole::Leaf {
                weight: leaf_weight(&candidate.right_stats),
            },
            stats: candidate.right_stats,
        });
        nodes[node_id].role = NodeRole::Internal {
            descriptor: candidate.descriptor,
            left: left_id,
            right: right_id,
            scores: (candidate.score1, candidate.score2, candidate.score3),
        };
        trace.push(GrowthEvent::Split {
            node: node_id,
            left: left_id,
            right: right_id,
        });
        leaves += 1;

        offer(&mut frontier, &nodes, left_id, left_rows);
        offer(&mut frontier, &nodes, right_id, right_rows);
    }

    (
        Tree {
            nodes,
            feature_importance_delta: importance,
        },
        trace,
    )
}

/// Grow one tree leaf-wise until the leaf budget, depth cap, gain threshold
/// or frontier exhaustion stops it. An unsplittable root yields a
/// single-leaf tree.
pub fn grow<S: Scalar>(
    dataset: &Dataset<S>,
    gh: &GradHess<S>,
    parts: &PartitionAssignment,
    cfg: &GrowthConfig<S>,
) -> Tree<S> {
    grow_traced(dataset, gh, parts, cfg).0
}
