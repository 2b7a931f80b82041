//! Differentiable losses supplying per-sample gradients and hessians for
//! the second-order boosting objective.
//!
//! Squared error uses the half-scaled form `l = (pred - y)^2 / 2` so the
//! hessian is identically one; logistic operates on raw scores (logits).

use std::str::FromStr;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("predictions ({predictions}) and targets ({targets}) differ in length")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("row {row}: logistic loss requires targets in {{0, 1}}, got {value}")]
    InvalidTarget { row: usize, value: f64 },
    #[error("targets are empty")]
    EmptyTargets,
}

/// Loss selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    Logistic,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::SquaredError => "squared_error",
            LossKind::Logistic => "logistic",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squared_error" => Ok(LossKind::SquaredError),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(format!("unknown loss `{other}`")),
        }
    }
}

/// First and second derivatives of the loss at the current predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess<S> {
    pub g: Vec<S>,
    pub h: Vec<S>,
}

impl<S: Scalar> GradHess<S> {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

/// Numerically stable sigmoid.
#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

fn check_lengths<S>(predictions: &[S], targets: &[S]) -> Result<(), LossError> {
    if predictions.len() != targets.len() {
        return Err(LossError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    Ok(())
}

fn check_binary_targets<S: Scalar>(targets: &[S]) -> Result<(), LossError> {
    for (row, &y) in targets.iter().enumerate() {
        if y != S::zero() && y != S::one() {
            return Err(LossError::InvalidTarget {
                row,
                value: y.as_f64(),
            });
        }
    }
    Ok(())
}

/// Per-sample gradients and hessians at the given raw scores.
///
/// Squared error: `g = pred - y`, `h = 1`. Logistic: `g = sigmoid(pred) - y`,
/// `h = sigmoid(pred) * (1 - sigmoid(pred))`.
pub fn grad_hess<S: Scalar>(
    loss: LossKind,
    predictions: &[S],
    targets: &[S],
) -> Result<GradHess<S>, LossError> {
    check_lengths(predictions, targets)?;
    let n = predictions.len();
    let mut g = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    match loss {
        LossKind::SquaredError => {
            for i in 0..n {
                g.push(predictions[i] - targets[i]);
                h.push(S::one());
            }
        }
        LossKind::Logistic => {
            check_binary_targets(targets)?;
            for i in 0..n {
                let p = sigmoid(predictions[i]);
                g.push(p - targets[i]);
                h.push(p * (S::one() - p));
            }
        }
    }
    Ok(GradHess { g, h })
}

/// Constant initial prediction before the first tree.
///
/// Squared error returns the target mean; logistic returns the logit of the
/// mean clamped to `[1e-6, 1 - 1e-6]`.
pub fn base_score<S: Scalar>(loss: LossKind, targets: &[S]) -> Result<S, LossError> {
    if targets.is_empty() {
        return Err(LossError::EmptyTargets);
    }
    let n = S::from_count(targets.len());
    let mean = targets.iter().copied().sum::<S>() / n;
    match loss {
        LossKind::SquaredError => Ok(mean),
        LossKind::Logistic => {
            check_binary_targets(targets)?;
            let eps = S::cast(1e-6);
            let p = mean.max(eps).min(S::one() - eps);
            Ok((p / (S::one() - p)).ln())
        }
    }
}

/// Mean per-sample loss; logistic uses the overflow-free log-sum-exp form.
pub fn eval_loss<S: Scalar>(
    loss: LossKind,
    predictions: &[S],
    targets: &[S],
) -> Result<S, LossError> {
    check_lengths(predictions, targets)?;
    if predictions.is_empty() {
        return Err(LossError::EmptyTargets);
    }
    let n = S::from_count(predictions.len());
    let half = S::cast(0.5);
    let total = match loss {
        LossKind::SquaredError => predictions
            .iter()
            .zip(targets)
            .map(|(&p, &y)| half * (p - y) * (p - y))
            .sum::<S>(),
        LossKind::Logistic => {
            check_binary_targets(targets)?;
            predictions
                .iter()
                .zip(targets)
                .map(|(&p, &y)| {
                    // ln(1 + e^p) - y*p, evaluated as max(p, 0) + ln(1 + e^-|p|) - y*p
                    p.max(S::zero()) + (S::one() + (-p.abs()).exp()).ln() - y * p
                })
                .sum::<S>()
        }
    };
    Ok(total / n)
}
