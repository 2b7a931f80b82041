//! Batch CLI for training, prediction, feature importance, feature
//! selection, and the two synthetic demo experiments.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime error. `UGBM_THREADS`
//! caps the worker pool.

mod cmd;
mod manifest;

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

use ugbm::booster::{GBMConfig, Mode};
use ugbm::loss::LossKind;

#[derive(Parser)]
#[command(
    name = "ugbm",
    version,
    about = "Gradient boosted trees with unbiased split finding and feature importance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Boosting hyperparameters shared by train and select-features.
#[derive(Args)]
struct GbmArgs {
    /// Loss: squared_error or logistic
    #[arg(long, default_value = "squared_error", value_parser = cmd::parse_loss)]
    loss: LossKind,
    /// Training mode: classic or unbiased
    #[arg(long, default_value = "classic", value_parser = cmd::parse_mode)]
    mode: Mode,
    /// RNG seed for partitions and subsampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of boosting rounds
    #[arg(long, default_value_t = 200)]
    n_estimators: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    /// Minimum sub-training samples on each side of a split
    #[arg(long, default_value_t = 20)]
    min_data_in_leaf: usize,
    /// Gating-gain threshold for leaf-wise early stopping (may be negative
    /// in unbiased mode)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    min_split_gain: f64,
    #[arg(long, default_value_t = 31)]
    max_leaves: usize,
    #[arg(long, default_value_t = 10)]
    max_depth: usize,
    /// Sub-train:validation-1:validation-2 proportions, e.g. 1:1:1
    #[arg(long, default_value = "1:1:1", value_parser = cmd::parse_ratios)]
    ratios: [f64; 3],
    /// Identify the two validation sets (the 1:1+1 layout)
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    merge_validation: bool,
}

impl GbmArgs {
    fn config(&self) -> GBMConfig<f64> {
        GBMConfig {
            mode: self.mode,
            n_estimators: self.n_estimators,
            learning_rate: self.learning_rate,
            min_data_in_leaf: self.min_data_in_leaf,
            min_split_gain: self.min_split_gain,
            max_leaves: self.max_leaves,
            max_depth: self.max_depth,
            partition_ratios: self.ratios,
            merge_validation: self.merge_validation,
            loss: self.loss,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a CSV and write the ugbm-1 JSON model file
    Train {
        /// Training CSV (header row required)
        #[arg(long)]
        train: PathBuf,
        /// Target column name
        #[arg(long)]
        target: String,
        /// Comma-separated categorical column names
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        categorical: Vec<String>,
        /// Output model path
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        gbm: GbmArgs,
    },
    /// Score a CSV with a saved model
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV: row_index,score[,probability]
        #[arg(long)]
        out: PathBuf,
    },
    /// Feature importance report (CSV + JSON)
    Importance {
        #[arg(long)]
        model: PathBuf,
        /// gain, unbiased, or permutation
        #[arg(long)]
        method: String,
        /// Held-out CSV, disjoint from training (unbiased/permutation)
        #[arg(long, required_if_eq_any([("method", "unbiased"), ("method", "permutation")]))]
        oob: Option<PathBuf>,
        /// Target column in the held-out CSV
        #[arg(long, required_if_eq_any([("method", "unbiased"), ("method", "permutation")]))]
        target: Option<String>,
        /// Permutation metric: auc or rmse (default follows the model loss)
        #[arg(long)]
        metric: Option<String>,
        /// Independent draws averaged per estimate
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (JSON written alongside)
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank features per method, retrain on top slices, report test AUC
    SelectFeatures {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        categorical: Vec<String>,
        /// Comma-separated methods: gain, unbiased, permutation
        #[arg(long, value_delimiter = ',', default_value = "gain,unbiased,permutation")]
        method: Vec<String>,
        /// Comma-separated top-percentages to keep
        #[arg(long, value_delimiter = ',', default_value = "10,20,30")]
        top_percents: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        gbm: GbmArgs,
    },
    /// Monte Carlo check of the split-gain bias formula on pure noise
    DemoBias {
        /// Samples per trial
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 20000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-trial CSV path (summary CSV written alongside)
        #[arg(long)]
        out: PathBuf,
    },
    /// Importance distributions on the three-feature synthetic benchmark
    DemoExample1 {
        #[arg(long, default_value_t = 1000)]
        repetitions: usize,
        /// Rows per repetition
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("UGBM_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train {
            train,
            target,
            categorical,
            out,
            gbm,
        } => cmd::cmd_train(cmd::TrainParams {
            train,
            target,
            categorical,
            out,
            config: gbm.config(),
        }),
        Command::Predict { model, data, out } => {
            cmd::cmd_predict(cmd::PredictParams { model, data, out })
        }
        Command::Importance {
            model,
            method,
            oob,
            target,
            metric,
            repeats,
            seed,
            out,
        } => cmd::cmd_importance(cmd::ImportanceParams {
            model,
            method,
            oob,
            target,
            metric,
            repeats,
            seed,
            out,
        }),
        Command::SelectFeatures {
            train,
            test,
            target,
            categorical,
            method,
            top_percents,
            out,
            gbm,
        } => cmd::cmd_select_features(cmd::SelectParams {
            train,
            test,
            target,
            categorical,
            methods: method,
            top_percents,
            out,
            config: gbm.config(),
        }),
        Command::DemoBias {
            n,
            trials,
            seed,
            out,
        } => cmd::cmd_demo_bias(cmd::DemoBiasParams {
            n,
            trials,
            seed,
            out,
        }),
        Command::DemoExample1 {
            repetitions,
            n,
            seed,
            out_dir,
        } => cmd::cmd_demo_example1(cmd::DemoExample1Params {
            repetitions,
            n,
            seed,
            out_dir,
        }),
    }
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
