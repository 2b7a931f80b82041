//! Batch experiments behind the demo and feature-selection commands.
//!
//! These run at `f64` and return plain data; file formatting lives in the
//! CLI. Repetition loops parallelize over derived seeds and collect in
//! index order, so thread count never changes the output.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::booster::{fit, BoosterError, GBMConfig, Mode};
use crate::data::{synth_example1, train_test_split, DataError, Dataset, FeatureColumn};
use crate::eval::{auc, EvalError};
use crate::importance::{
    gain_importance, permutation_importance, unbiased_gain, ImportanceError, PermutationMetric,
};
use crate::loss::LossKind;
use crate::rng::{mix_seed, stream_rng};
use crate::splitter::classic_gain;

const BIAS_STREAM: u64 = 10;
const EXAMPLE1_STREAM: u64 = 11;
const SELECTION_STREAM: u64 = 12;
const SYNTH_STREAM: u64 = 13;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Booster(#[from] BoosterError),
    #[error(transparent)]
    Importance(#[from] ImportanceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Monte Carlo estimates of the split-gain bias on an uninformative feature.
#[derive(Debug, Clone)]
pub struct BiasDemoResult {
    pub n: usize,
    pub trials: usize,
    /// One single-set gain per trial.
    pub gains: Vec<f64>,
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    /// Closed form `1/(2n)` for unit gradient variance.
    pub theory: f64,
}

/// Per trial: draw `y ~ N(0,1)` under squared error at prediction zero
/// (`g = -y`, `h = 1`), split at the median of an independent uniform
/// feature, and record the single-set gain. Its expectation is `1/(2n)`.
pub fn demo_bias(n: usize, trials: usize, seed: u64) -> BiasDemoResult {
    assert!(n >= 2, "need at least two samples per trial");
    let gains: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, &[BIAS_STREAM, trial as u64]);
            let g: Vec<f64> = (0..n).map(|_| -rng.sample::<f64, _>(StandardNormal)).collect();
            let feature: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_unstable_by(|&a, &b| {
                feature[a].total_cmp(&feature[b]).then(a.cmp(&b))
            });
            let n_left = n / 2;
            let g_left: f64 = order[..n_left].iter().map(|&i| g[i]).sum();
            let g_total: f64 = g.iter().sum();
            classic_gain(
                (g_left, n_left as f64),
                (g_total - g_left, (n - n_left) as f64),
                (g_total, n as f64),
                n,
            )
            .expect("unit hessians")
        })
        .collect();
    let mean = gains.iter().sum::<f64>() / trials as f64;
    let var = gains.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
    let se = (var / trials as f64).sqrt();
    BiasDemoResult {
        n,
        trials,
        gains,
        mean,
        se,
        theory: 1.0 / (2.0 * n as f64),
    }
}

/// Training configuration of the cardinality-bias demo model (the gain
/// panel). The source figure leaves these unstated; these finish in
/// minutes at desk scale.
pub fn example1_model_config(seed: u64) -> GBMConfig<f64> {
    GBMConfig {
        mode: Mode::Classic,
        n_estimators: 50,
        learning_rate: 0.05,
        min_data_in_leaf: 20,
        max_leaves: 31,
        loss: LossKind::SquaredError,
        seed,
        ..GBMConfig::default()
    }
}

/// Configuration of the model the unbiased panel evaluates.
///
/// A single tree keeps the held-out gradients at the constant initial
/// score. With a deep ensemble the later trees' residuals carry the noise
/// structure the earlier trees fit, so the ensemble's own uninformative
/// splits measure genuinely negative held-out gain; the zero-expectation
/// property under test holds when the gradients are independent of the
/// split features, which the single-tree fit guarantees.
pub fn example1_unbiased_config(seed: u64) -> GBMConfig<f64> {
    GBMConfig {
        n_estimators: 1,
        ..example1_model_config(seed)
    }
}

/// Per-repetition importance vectors `[X1, X2, X3]` for both estimators.
#[derive(Debug, Clone)]
pub struct Example1Result {
    pub gain: Vec<[f64; 3]>,
    pub unbiased: Vec<[f64; 3]>,
}

/// Per repetition: fit the gain-panel model on a fresh synthetic draw and
/// record its gain importance; fit the unbiased-panel model on the same
/// draw and record its post-hoc unbiased gain on a fresh held-out draw.
pub fn demo_example1(
    repetitions: usize,
    n: usize,
    seed: u64,
) -> Result<Example1Result, ExperimentError> {
    let rows: Vec<([f64; 3], [f64; 3])> = (0..repetitions)
        .into_par_iter()
        .map(|rep| -> Result<([f64; 3], [f64; 3]), ExperimentError> {
            let rep = rep as u64;
            let train =
                synth_example1::<f64>(n, &mut stream_rng(seed, &[EXAMPLE1_STREAM, rep, 0]))?;
            let model = fit(&train, &example1_model_config(mix_seed(seed, rep)))?;
            let gain = gain_importance(&model)?;

            let probe = fit(&train, &example1_unbiased_config(mix_seed(seed, rep)))?;
            let oob = synth_example1::<f64>(n, &mut stream_rng(seed, &[EXAMPLE1_STREAM, rep, 1]))?;
            let ub = unbiased_gain(&probe, &oob, 1, mix_seed(mix_seed(seed, rep), 2))?;

            let to3 = |v: &[f64]| -> [f64; 3] { [v[0], v[1], v[2]] };
            Ok((to3(&gain.values), to3(&ub.values)))
        })
        .collect::<Result<_, _>>()?;
    Ok(Example1Result {
        gain: rows.iter().map(|r| r.0).collect(),
        unbiased: rows.iter().map(|r| r.1).collect(),
    })
}

/// Importance estimator driving feature selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    Gain,
    Unbiased,
    Permutation,
}

impl SelectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Gain => "gain",
            SelectionMethod::Unbiased => "unbiased",
            SelectionMethod::Permutation => "permutation",
        }
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gain" => Ok(SelectionMethod::Gain),
            "unbiased" => Ok(SelectionMethod::Unbiased),
            "permutation" => Ok(SelectionMethod::Permutation),
            other => Err(format!("unknown selection method `{other}`")),
        }
    }
}

/// One (method, top-percent) evaluation.
#[derive(Debug, Clone)]
pub struct SelectionRun {
    pub method: SelectionMethod,
    pub top_percent: usize,
    /// Kept feature indices, ascending.
    pub kept: Vec<usize>,
    /// Test AUC of the model retrained on the kept features.
    pub auc: f64,
}

/// Per-feature ranking values for one method.
///
/// Gain importance ranks with a classic model fit on all of `train`. The
/// unbiased and permutation estimators need held-out rows, so they fit on
/// two thirds of `train` and estimate on the remaining third.
pub fn rank_features(
    train: &Dataset<f64>,
    method: SelectionMethod,
    config: &GBMConfig<f64>,
    seed: u64,
) -> Result<Vec<f64>, ExperimentError> {
    let ranking_config = GBMConfig {
        mode: Mode::Classic,
        ..config.clone()
    };
    match method {
        SelectionMethod::Gain => {
            let model = fit(train, &ranking_config)?;
            Ok(gain_importance(&model)?.values)
        }
        SelectionMethod::Unbiased | SelectionMethod::Permutation => {
            let mut rng = stream_rng(seed, &[SELECTION_STREAM, 0]);
            let (fit_part, held_out) = train_test_split(train, 1.0 / 3.0, &mut rng)?;
            let model = fit(&fit_part, &ranking_config)?;
            if method == SelectionMethod::Unbiased {
                Ok(unbiased_gain(&model, &held_out, 3, mix_seed(seed, 1))?.values)
            } else {
                let metric = match config.loss {
                    LossKind::Logistic => PermutationMetric::Auc,
                    LossKind::SquaredError => PermutationMetric::Rmse,
                };
                Ok(permutation_importance(&model, &held_out, metric, 3, mix_seed(seed, 2))?.values)
            }
        }
    }
}

/// Indices of the top `ceil(percent% * m)` features by value, ties broken
/// by value then feature index; returned ascending.
pub fn top_indices(values: &[f64], percent: usize) -> Vec<usize> {
    let m = values.len();
    let keep = ((percent * m).div_ceil(100)).clamp(1, m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order[..keep].to_vec();
    kept.sort_unstable();
    kept
}

/// For every method and percentage: rank features on the training set,
/// keep the top slice, retrain with the same config on the kept features,
/// and report test AUC.
pub fn select_features(
    train: &Dataset<f64>,
    test: &Dataset<f64>,
    methods: &[SelectionMethod],
    top_percents: &[usize],
    config: &GBMConfig<f64>,
    seed: u64,
) -> Result<Vec<SelectionRun>, ExperimentError> {
    let mut runs = Vec::new();
    for &method in methods {
        let values = rank_features(train, method, config, seed)?;
        for &percent in top_percents {
            let kept = top_indices(&values, percent);
            let sub_train = train.select_features(&kept);
            let sub_test = test.select_features(&kept);
            let model = fit(&sub_train, config)?;
            let preds = model.predict(&sub_test)?;
            let auc_value = auc(sub_test.target(), &preds)?;
            runs.push(SelectionRun {
                method,
                top_percent: percent,
                kept,
                auc: auc_value,
            });
        }
    }
    Ok(runs)
}

/// Binary-classification synthetic: the first `n_informative` features are
/// balanced binaries feeding the logit with decaying coefficients, the
/// remaining `n_noise` are standard normal and independent of the target.
pub fn synth_informative_noise(
    n_rows: usize,
    n_informative: usize,
    n_noise: usize,
    seed: u64,
) -> Result<Dataset<f64>, DataError> {
    let mut rng = stream_rng(seed, &[SYNTH_STREAM]);
    let m = n_informative + n_noise;
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n_rows); m];
    let mut target = Vec::with_capacity(n_rows);
    let coefficient = |j: usize| 1.0 - 0.15 * j as f64;
    for _ in 0..n_rows {
        let mut logit = 0.0;
        for (j, column) in columns.iter_mut().enumerate() {
            if j < n_informative {
                let bit = if rng.random::<bool>() { 1.0 } else { 0.0 };
                logit += coefficient(j) * (2.0 * bit - 1.0);
                column.push(bit);
            } else {
                column.push(rng.sample(StandardNormal));
            }
        }
        let p = 1.0 / (1.0 + (-logit).exp());
        target.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
    }
    let names = (0..m)
        .map(|j| {
            if j < n_informative {
                format!("inf{j}")
            } else {
                format!("noise{}", j - n_informative)
            }
        })
        .collect();
    Dataset::new(
        names,
        columns.into_iter().map(FeatureColumn::Numeric).collect(),
        target,
    )
}
