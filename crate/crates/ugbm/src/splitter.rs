//! Per-node split statistics and three-score split finding.
//!
//! Every candidate boundary on a feature is scored three ways over the
//! sample buckets: `score1` (sub-training, picks each feature's best
//! threshold), `score2` (first validation bucket, picks the feature), and
//! `score3` (second validation bucket, gates leaf-wise early stopping).
//! Classic mode aliases all three to the sub-training score, which reduces
//! the search to the usual single-set gain maximization.
//!
//! Prefix sums run in ascending sorted-feature order (ties broken by row
//! index), and the right side is obtained by subtracting the prefix from
//! the parent, so results are bit-reproducible regardless of how many
//! feature scans run in parallel.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{Dataset, FeatureColumn, PartitionAssignment};
use crate::loss::GradHess;
use crate::scalar::Scalar;

/// Candidates whose required partition hessian sums fall at or below this
/// are invalid.
pub const HESSIAN_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("hessian sum is zero or negative")]
    ZeroHessian,
    #[error("candidate requires a partition hessian above epsilon")]
    InvalidCandidate,
}

/// Which partitions the scores consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoringScheme {
    /// Single bucket; scores 2 and 3 alias score 1.
    Classic,
    /// Two buckets; score 3 aliases score 2.
    UnbiasedMerged,
    /// Three distinct buckets.
    UnbiasedThreeWay,
}

impl ScoringScheme {
    fn needs_bucket1(self) -> bool {
        self != ScoringScheme::Classic
    }

    fn needs_bucket2(self) -> bool {
        self == ScoringScheme::UnbiasedThreeWay
    }
}

/// Knobs the scan needs; derived from the booster config.
#[derive(Debug, Clone)]
pub struct SplitterConfig<S: Scalar> {
    pub scheme: ScoringScheme,
    /// Minimum sub-training samples required on each side of a split.
    pub min_data_in_leaf: usize,
    pub hessian_epsilon: S,
}

impl<S: Scalar> SplitterConfig<S> {
    pub fn new(scheme: ScoringScheme, min_data_in_leaf: usize) -> Self {
        SplitterConfig {
            scheme,
            min_data_in_leaf: min_data_in_leaf.max(1),
            hessian_epsilon: S::cast(HESSIAN_EPSILON),
        }
    }
}

/// Gradient/hessian sums and sample count for one bucket at one node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PartStats<S> {
    pub grad: S,
    pub hess: S,
    pub count: usize,
}

/// Per-bucket aggregates at a node; index 0 is sub-training.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeStats<S> {
    pub parts: [PartStats<S>; 3],
}

impl<S: Scalar> NodeStats<S> {
    pub fn zero() -> Self {
        NodeStats {
            parts: [PartStats {
                grad: S::zero(),
                hess: S::zero(),
                count: 0,
            }; 3],
        }
    }

    #[inline]
    pub fn add_sample(&mut self, bucket: usize, g: S, h: S) {
        let p = &mut self.parts[bucket];
        p.grad += g;
        p.hess += h;
        p.count += 1;
    }

    #[inline]
    fn add_row(&mut self, row: u32, gh: &GradHess<S>, parts: &PartitionAssignment) {
        let i = row as usize;
        self.add_sample(parts.bucket(i).index(), gh.g[i], gh.h[i]);
    }

    pub fn from_rows(rows: &[u32], gh: &GradHess<S>, parts: &PartitionAssignment) -> Self {
        let mut stats = NodeStats::zero();
        for &row in rows {
            stats.add_row(row, gh, parts);
        }
        stats
    }

    pub fn add(&mut self, other: &Self) {
        for k in 0..3 {
            self.parts[k].grad += other.parts[k].grad;
            self.parts[k].hess += other.parts[k].hess;
            self.parts[k].count += other.parts[k].count;
        }
    }

    /// Component-wise `self - other`; used to derive the right child from
    /// parent minus prefix.
    pub fn minus(&self, other: &Self) -> Self {
        let mut out = *self;
        for k in 0..3 {
            out.parts[k].grad = self.parts[k].grad - other.parts[k].grad;
            out.parts[k].hess = self.parts[k].hess - other.parts[k].hess;
            out.parts[k].count = self.parts[k].count - other.parts[k].count;
        }
        out
    }

    /// Gradient sum, hessian sum, and count over all buckets.
    pub fn totals(&self) -> (S, S, usize) {
        let mut g = S::zero();
        let mut h = S::zero();
        let mut n = 0usize;
        for p in &self.parts {
            g += p.grad;
            h += p.hess;
            n += p.count;
        }
        (g, h, n)
    }
}

/// How a split routes a sample.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitKind<S> {
    /// `x <= threshold` routes left.
    NumericThreshold(S),
    /// `code in set` routes left; unseen codes route right.
    CategorySubset(BTreeSet<u32>),
}

/// A (feature, split point) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDescriptor<S> {
    pub feature_index: usize,
    pub kind: SplitKind<S>,
}

/// A scored split with per-partition child statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate<S> {
    pub descriptor: SplitDescriptor<S>,
    pub score1: S,
    pub score2: S,
    pub score3: S,
    pub left_stats: NodeStats<S>,
    pub right_stats: NodeStats<S>,
}

/// Estimated loss of a leaf: `-G^2 / (2 n H)`.
pub fn leaf_loss<S: Scalar>(g: S, h: S, n_total: usize) -> Result<S, SplitError> {
    if h <= S::zero() {
        return Err(SplitError::ZeroHessian);
    }
    let two_n = S::cast(2.0) * S::from_count(n_total);
    Ok(-(g * g) / (two_n * h))
}

/// Single-set split gain: `(G_L^2/H_L + G_R^2/H_R - G_I^2/H_I) / (2n)`.
pub fn classic_gain<S: Scalar>(
    left: (S, S),
    right: (S, S),
    parent: (S, S),
    n_total: usize,
) -> Result<S, SplitError> {
    for (_, h) in [left, right, parent] {
        if h <= S::zero() {
            return Err(SplitError::ZeroHessian);
        }
    }
    let two_n = S::cast(2.0) * S::from_count(n_total);
    Ok((left.0 * left.0 / left.1 + right.0 * right.0 / right.1 - parent.0 * parent.0 / parent.1)
        / two_n)
}

#[inline]
fn raw_score1<S: Scalar>(l: &NodeStats<S>, r: &NodeStats<S>, p: &NodeStats<S>) -> S {
    let (l0, r0, p0) = (&l.parts[0], &r.parts[0], &p.parts[0]);
    l0.grad * l0.grad / l0.hess + r0.grad * r0.grad / r0.hess - p0.grad * p0.grad / p0.hess
}

#[inline]
fn raw_score2<S: Scalar>(l: &NodeStats<S>, r: &NodeStats<S>, p: &NodeStats<S>) -> S {
    let (l0, r0, p0) = (&l.parts[0], &r.parts[0], &p.parts[0]);
    let (l1, r1, p1) = (&l.parts[1], &r.parts[1], &p.parts[1]);
    l0.grad * l1.grad / l1.hess + r0.grad * r1.grad / r1.hess - p0.grad * p1.grad / p1.hess
}

#[inline]
fn raw_score3<S: Scalar>(l: &NodeStats<S>, r: &NodeStats<S>, p: &NodeStats<S>) -> S {
    let (l0, r0, p0) = (&l.parts[0], &r.parts[0], &p.parts[0]);
    let (l1, r1, p1) = (&l.parts[1], &r.parts[1], &p.parts[1]);
    let (l2, r2, p2) = (&l.parts[2], &r.parts[2], &p.parts[2]);
    (l0.grad + l1.grad) * l2.grad / l2.hess + (r0.grad + r1.grad) * r2.grad / r2.hess
        - (p0.grad + p1.grad) * p2.grad / p2.hess
}

fn check_bucket<S: Scalar>(stats: &NodeStats<S>, bucket: usize) -> Result<(), SplitError> {
    if stats.parts[bucket].hess <= S::cast(HESSIAN_EPSILON) {
        return Err(SplitError::InvalidCandidate);
    }
    Ok(())
}

/// Sub-training score of a candidate split.
pub fn score1<S: Scalar>(
    left: &NodeStats<S>,
    right: &NodeStats<S>,
    parent: &NodeStats<S>,
) -> Result<S, SplitError> {
    for s in [left, right, parent] {
        check_bucket(s, 0)?;
    }
    Ok(raw_score1(left, right, parent))
}

/// Cross-partition score over the first validation bucket; may be negative.
pub fn score2<S: Scalar>(
    left: &NodeStats<S>,
    right: &NodeStats<S>,
    parent: &NodeStats<S>,
) -> Result<S, SplitError> {
    for s in [left, right, parent] {
        check_bucket(s, 1)?;
    }
    Ok(raw_score2(left, right, parent))
}

/// Early-stopping score over the second validation bucket; may be negative.
///
/// With `merge_validation` the second validation bucket is identified with
/// the first and this returns [`score2`] bit-for-bit.
pub fn score3<S: Scalar>(
    left: &NodeStats<S>,
    right: &NodeStats<S>,
    parent: &NodeStats<S>,
    merge_validation: bool,
) -> Result<S, SplitError> {
    if merge_validation {
        return score2(left, right, parent);
    }
    for s in [left, right, parent] {
        check_bucket(s, 2)?;
    }
    Ok(raw_score3(left, right, parent))
}

fn eval_scheme_scores<S: Scalar>(
    l: &NodeStats<S>,
    r: &NodeStats<S>,
    p: &NodeStats<S>,
    scheme: ScoringScheme,
) -> (S, S, S) {
    let s1 = raw_score1(l, r, p);
    match scheme {
        ScoringScheme::Classic => (s1, s1, s1),
        ScoringScheme::UnbiasedMerged => {
            let s2 = raw_score2(l, r, p);
            (s1, s2, s2)
        }
        ScoringScheme::UnbiasedThreeWay => (s1, raw_score2(l, r, p), raw_score3(l, r, p)),
    }
}

fn side_is_valid<S: Scalar>(side: &NodeStats<S>, cfg: &SplitterConfig<S>) -> bool {
    let p0 = &side.parts[0];
    if p0.count < cfg.min_data_in_leaf || p0.hess <= cfg.hessian_epsilon {
        return false;
    }
    if cfg.scheme.needs_bucket1() {
        let p1 = &side.parts[1];
        if p1.count < 1 || p1.hess <= cfg.hessian_epsilon {
            return false;
        }
    }
    if cfg.scheme.needs_bucket2() {
        let p2 = &side.parts[2];
        if p2.count < 1 || p2.hess <= cfg.hessian_epsilon {
            return false;
        }
    }
    true
}

fn parent_is_valid<S: Scalar>(parent: &NodeStats<S>, cfg: &SplitterConfig<S>) -> bool {
    if parent.parts[0].count < cfg.min_data_in_leaf.saturating_mul(2)
        || parent.parts[0].hess <= cfg.hessian_epsilon
    {
        return false;
    }
    if cfg.scheme.needs_bucket1() && parent.parts[1].hess <= cfg.hessian_epsilon {
        return false;
    }
    if cfg.scheme.needs_bucket2() && parent.parts[2].hess <= cfg.hessian_epsilon {
        return false;
    }
    true
}

/// Scores for the boundary with `left` as the prefix, or `None` when a
/// required bucket is missing or too thin on either side.
fn evaluate_boundary<S: Scalar>(
    left: &NodeStats<S>,
    parent: &NodeStats<S>,
    cfg: &SplitterConfig<S>,
) -> Option<(S, S, S, NodeStats<S>)> {
    let right = parent.minus(left);
    if !side_is_valid(left, cfg) || !side_is_valid(&right, cfg) {
        return None;
    }
    let (s1, s2, s3) = eval_scheme_scores(left, &right, parent, cfg.scheme);
    Some((s1, s2, s3, right))
}

struct BestBoundary<S> {
    score1: S,
    score2: S,
    score3: S,
    left: NodeStats<S>,
    right: NodeStats<S>,
    kind_at: BoundaryAt<S>,
}

enum BoundaryAt<S> {
    Threshold(S),
    Prefix(usize),
}

fn scan_numeric<S: Scalar>(
    rows: &[u32],
    values: &[S],
    gh: &GradHess<S>,
    parts: &PartitionAssignment,
    parent: &NodeStats<S>,
    cfg: &SplitterConfig<S>,
) -> Option<BestBoundary<S>> {
    let mut order: Vec<(S, u32)> = rows.iter().map(|&r| (values[r as usize], r)).collect();
    order.sort_unstable_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("numeric features are finite")
            .then_with(|| a.1.cmp(&b.1))
    });

    let two = S::cast(2.0);
    let mut left = NodeStats::zero();
    let mut best: Option<BestBoundary<S>> = None;
    for i in 0..order.len().saturating_sub(1) {
        let (value, row) = order[i];
        left.add_row(row, gh, parts);
        let next = order[i + 1].0;
        if next == value {
            continue;
        }
        if let Some((s1, s2, s3, right)) = evaluate_boundary(&left, parent, cfg) {
            if best.as_ref().is_none_or(|b| s1 > b.score1) {
                // Midpoint keeps routing independent of training-sample
                // identity; fall back to the lower value when the midpoint
                // rounds onto the upper neighbour.
                let mut threshold = value + (next - value) / two;
                if threshold >= next {
                    threshold = value;
                }
                best = Some(BestBoundary {
                    score1: s1,
                    score2: s2,
                    score3: s3,
                    left,
                    right,
                    kind_at: BoundaryAt::Threshold(threshold),
                });
            }
        }
    }
    best
}

fn scan_categorical<S: Scalar>(
    rows: &[u32],
    codes: &[u32],
    gh: &GradHess<S>,
    parts: &PartitionAssignment,
    parent: &NodeStats<S>,
    cfg: &SplitterConfig<S>,
) -> Option<(BestBoundary<S>, BTreeSet<u32>)> {
    let mut groups: BTreeMap<u32, NodeStats<S>> = BTreeMap::new();
    for &row in rows {
        groups
            .entry(codes[row as usize])
            .or_insert_with(NodeStats::zero)
            .add_row(row, gh, parts);
    }
    if groups.len() < 2 {
        return None;
    }

    // Categories ordered by sub-training ratio G/H ascending, then scanned
    // as if ordinal. Categories without sub-training hessian sort last.
    let mut cats: Vec<(f64, u32, NodeStats<S>)> = groups
        .into_iter()
        .map(|(code, stats)| {
            let p0 = &stats.parts[0];
            let key = if p0.hess > S::zero() {
                (p0.grad / p0.hess).as_f64()
            } else {
                f64::INFINITY
            };
            (key, code, stats)
        })
        .collect();
    cats.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

    let mut left = NodeStats::zero();
    let mut best: Option<BestBoundary<S>> = None;
    let last = cats.len() - 1;
    for (k, (_, _, stats)) in cats.iter().enumerate().take(last) {
        left.add(stats);
        if let Some((s1, s2, s3, right)) = evaluate_boundary(&left, parent, cfg) {
            if best.as_ref().is_none_or(|b| s1 > b.score1) {
                best = Some(BestBoundary {
                    score1: s1,
                    score2: s2,
                    score3: s3,
                    left,
                    right,
                    kind_at: BoundaryAt::Prefix(k),
                });
            }
        }
    }
    best.map(|b| {
        let prefix = match b.kind_at {
            BoundaryAt::Prefix(k) => k,
            BoundaryAt::Threshold(_) => unreachable!(),
        };
        let left_codes = cats[..=prefix].iter().map(|(_, code, _)| *code).collect();
        (b, left_codes)
    })
}

pub(crate) fn best_split_for_feature_with_parent<S: Scalar>(
    rows: &[u32],
    feature_index: usize,
    column: &FeatureColumn<S>,
    gh: &GradHess<S>,
    parts: &PartitionAssignment,
    parent: &NodeStats<S>,
    cfg: &SplitterConfig<S>,
) -> Option<SplitCandidate<S>> {
    if rows.len() < 2 || !parent_is_valid(parent, cfg) {
        return None;
    }
    let (best, kind) = match column {
        FeatureColumn::Numeric(values) => {
            let best = scan_numeric(rows, values, gh, parts, parent, cfg)?;
            let threshold = match best.kind_at {
                BoundaryAt::Threshold(t) => t,
                BoundaryAt::Prefix(_) => unreachable!(),
            };
            (best, SplitKind::NumericThreshold(threshold))
        }
        FeatureColumn::Categorical { codes, .. } => {
            let (best, left_codes) = scan_categorical(rows, codes, gh, parts, parent, cfg)?;
            (best, SplitKind::CategorySubset(left_codes))
        }
    };
    Some(SplitCandidate {
        descriptor: SplitDescriptor {
            feature_index,
            kind,
        },
        score1: best.score1,
        score2: best.score2,
        score3: best.score3,
        left_stats: best.left,
        right_stats: best.right,
    })
}

/// Best split on one feature by `score1`, scanning candidate boundaries in
/// ascending feature order with per-bucket prefix sums. Boundaries exist
/// only between distinct values; ties on `score1` keep the smallest
/// threshold (shortest category prefix).
pub fn best_split_for_feature<S: Scalar>(
    rows: &[u32],
    feature_index: usize,
    column: &FeatureColumn<S>,
    gh: &GradHess<S>,
    parts: &PartitionAssignment,
    cfg: &SplitterConfig<S>,
) -> Option<SplitCandidate<S>> {
    let parent = NodeStats::from_rows(rows, gh, parts);
    best_split_for_feature_with_parent(rows, feature_index, column, gh, parts, &parent, cfg)
}

pub(crate) fn find_split_with_parent<S: Scalar>(
    rows: &[u32],
    dataset: &Dataset<S>,
    gh: &GradHess<S>,
    parts: &PartitionAssignment,
    parent: &NodeStats<S>,
    cfg: &SplitterConfig<S>,
) -> Option<SplitCandidate<S>> {
    if !parent_is_valid(parent, cfg) {
        return None;
    }
    let per_feature: Vec<Option<SplitCandidate<S>>> = (0..dataset.n_features())
        .into_par_iter()
        .map(|j| {
            best_split_for_feature_with_parent(rows, j, dataset.column(j), gh, parts, parent, cfg)
        })
        .collect();
    // Deterministic reduction: strictly greater score2 wins, so the lowest
    // feature index takes ties regardless of scan completion order.
    let mut best: Option<SplitCandidate<S>> = None;
    for candidate in per_feature.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| candidate.score2 > b.score2) {
            best = Some(candidate);
        }
    }
    best
}

/// Best split across features: each feature's winner is chosen by `score1`,
/// the winner among features by `score2`; its `score3` gates early stopping.
pub fn find_split<S: Scalar>(
    rows: &[u32],
    dataset: &Dataset<S>,
    gh: &GradHess<S>,
    parts: &PartitionAssignment,
    cfg: &SplitterConfig<S>,
) -> Option<SplitCandidate<S>> {
    let parent = NodeStats::from_rows(rows, gh, parts);
    find_split_with_parent(rows, dataset, gh, parts, &parent, cfg)
}
