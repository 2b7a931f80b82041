//! Metrics used by the demos, the feature-selection harness, and the
//! acceptance tests.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("vectors differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("empty input")]
    Empty,
    #[error("row {row}: AUC targets must be 0 or 1, got {value}")]
    NonBinaryTarget { row: usize, value: f64 },
}

/// A named metric value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub name: String,
    pub value: f64,
    pub n_samples: usize,
}

/// Area under the ROC curve with half credit for ties, computed from rank
/// statistics: the probability a random positive outranks a random
/// negative.
pub fn auc<S: Scalar>(targets: &[S], scores: &[S]) -> Result<f64, EvalError> {
    if targets.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            a: targets.len(),
            b: scores.len(),
        });
    }
    if targets.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut n_pos = 0usize;
    for (row, &y) in targets.iter().enumerate() {
        if y == S::one() {
            n_pos += 1;
        } else if y != S::zero() {
            return Err(EvalError::NonBinaryTarget {
                row,
                value: y.as_f64(),
            });
        }
    }
    let n_neg = targets.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores must not be NaN")
            .then_with(|| a.cmp(&b))
    });

    // Average 1-based ranks within tie groups, summed over positives.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if targets[idx] == S::one() {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    let u = rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Ok(u / (n_pos_f * n_neg as f64))
}

/// Root mean squared error.
pub fn rmse<S: Scalar>(targets: &[S], predictions: &[S]) -> Result<f64, EvalError> {
    if targets.len() != predictions.len() {
        return Err(EvalError::LengthMismatch {
            a: targets.len(),
            b: predictions.len(),
        });
    }
    if targets.is_empty() {
        return Err(EvalError::Empty);
    }
    let sum_sq: f64 = targets
        .iter()
        .zip(predictions)
        .map(|(&y, &p)| {
            let d = (p - y).as_f64();
            d * d
        })
        .sum();
    Ok((sum_sq / targets.len() as f64).sqrt())
}

/// [`auc`] wrapped with its name and sample count.
pub fn auc_metric<S: Scalar>(targets: &[S], scores: &[S]) -> Result<MetricResult, EvalError> {
    Ok(MetricResult {
        name: "auc".into(),
        value: auc(targets, scores)?,
        n_samples: targets.len(),
    })
}

/// [`rmse`] wrapped with its name and sample count.
pub fn rmse_metric<S: Scalar>(targets: &[S], predictions: &[S]) -> Result<MetricResult, EvalError> {
    Ok(MetricResult {
        name: "rmse".into(),
        value: rmse(targets, predictions)?,
        n_samples: targets.len(),
    })
}

/// O(n^2) pairwise AUC with half tie credit; the independent oracle the
/// rank implementation is checked against.
pub fn auc_brute_force<S: Scalar>(targets: &[S], scores: &[S]) -> Result<f64, EvalError> {
    if targets.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            a: targets.len(),
            b: scores.len(),
        });
    }
    let mut pairs = 0.0f64;
    let mut credit = 0.0f64;
    for i in 0..targets.len() {
        if targets[i] != S::one() {
            continue;
        }
        for j in 0..targets.len() {
            if targets[j] != S::zero() {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                credit += 1.0;
            } else if scores[i] == scores[j] {
                credit += 0.5;
            }
        }
    }
    if pairs == 0.0 {
        return Err(EvalError::SingleClass);
    }
    Ok(credit / pairs)
}
