//! Command implementations.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde_json::json;

use ugbm::booster::{fit, BoostedModel, GBMConfig, Mode};
use ugbm::data::{load_csv, load_csv_unlabeled, Dataset, FeatureKind};
use ugbm::eval::{auc_metric, rmse_metric};
use ugbm::experiments::{
    demo_bias, demo_example1, select_features, SelectionMethod, SelectionRun,
};
use ugbm::importance::{
    gain_importance, permutation_importance, unbiased_gain, ImportanceReport, PermutationMetric,
};
use ugbm::loss::{sigmoid, LossKind};

use crate::manifest::ManifestBuilder;

pub fn categorical_set(names: &[String]) -> HashSet<String> {
    names.iter().cloned().collect()
}

/// Reorder/select `ds` columns to the model's feature names.
fn align_to_model(ds: &Dataset<f64>, model: &BoostedModel<f64>) -> anyhow::Result<Dataset<f64>> {
    let mut keep = Vec::with_capacity(model.features.len());
    for meta in &model.features {
        let idx = ds
            .feature_names()
            .iter()
            .position(|n| n == &meta.name)
            .with_context(|| format!("data is missing model feature `{}`", meta.name))?;
        keep.push(idx);
    }
    Ok(ds.select_features(&keep))
}

fn model_categoricals(model: &BoostedModel<f64>) -> HashSet<String> {
    model
        .features
        .iter()
        .filter(|f| f.kind == FeatureKind::Categorical)
        .map(|f| f.name.clone())
        .collect()
}

pub struct TrainParams {
    pub train: PathBuf,
    pub target: String,
    pub categorical: Vec<String>,
    pub out: PathBuf,
    pub config: GBMConfig<f64>,
}

pub fn cmd_train(params: TrainParams) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::new(
        "train",
        params.config.seed,
        serde_json::to_value(&params.config)?,
    );
    manifest.record_input(&params.train)?;

    let cats = categorical_set(&params.categorical);
    let dataset: Dataset<f64> = load_csv(&params.train, &params.target, &cats)?;
    let model = fit(&dataset, &params.config)?;
    model.save(&params.out)?;
    manifest.record_output(&params.out);

    let preds = model.predict(&dataset)?;
    let metric = match params.config.loss {
        LossKind::Logistic => auc_metric(dataset.target(), &preds)?,
        LossKind::SquaredError => rmse_metric(dataset.target(), &preds)?,
    };
    let manifest_path = manifest.write(&params.out)?;
    println!("model: {}", params.out.display());
    println!("manifest: {}", manifest_path.display());
    println!("train_{}: {} ({} samples)", metric.name, metric.value, metric.n_samples);
    Ok(())
}

pub struct PredictParams {
    pub model: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
}

pub fn cmd_predict(params: PredictParams) -> anyhow::Result<()> {
    let model = BoostedModel::load(&params.model)?;
    let mut manifest = ManifestBuilder::new(
        "predict",
        0,
        json!({ "model": params.model.display().to_string() }),
    );
    manifest.record_input(&params.model)?;
    manifest.record_input(&params.data)?;

    let keep: Vec<String> = model.features.iter().map(|f| f.name.clone()).collect();
    let dataset: Dataset<f64> =
        load_csv_unlabeled(&params.data, &keep, &model_categoricals(&model))?;
    let scores = model.predict(&dataset)?;

    let mut writer = csv::Writer::from_path(&params.out)
        .with_context(|| format!("writing `{}`", params.out.display()))?;
    match model.loss {
        LossKind::Logistic => {
            writer.write_record(["row_index", "score", "probability"])?;
            for (i, &s) in scores.iter().enumerate() {
                writer.write_record([
                    i.to_string(),
                    format!("{s}"),
                    format!("{}", sigmoid(s)),
                ])?;
            }
        }
        LossKind::SquaredError => {
            writer.write_record(["row_index", "score"])?;
            for (i, &s) in scores.iter().enumerate() {
                writer.write_record([i.to_string(), format!("{s}")])?;
            }
        }
    }
    writer.flush()?;
    manifest.record_output(&params.out);
    let manifest_path = manifest.write(&params.out)?;
    println!("predictions: {}", params.out.display());
    println!("manifest: {}", manifest_path.display());
    Ok(())
}

pub struct ImportanceParams {
    pub model: PathBuf,
    pub method: String,
    pub oob: Option<PathBuf>,
    pub target: Option<String>,
    pub metric: Option<String>,
    pub repeats: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn write_importance_report(
    report: &ImportanceReport,
    feature_names: &[String],
    csv_path: &Path,
) -> anyhow::Result<PathBuf> {
    let mut writer = csv::Writer::from_path(csv_path)?;
    writer.write_record(["feature", "method", "value", "repeats"])?;
    for (name, value) in feature_names.iter().zip(&report.values) {
        writer.write_record([
            name.clone(),
            report.method.as_str().to_string(),
            format!("{value}"),
            report.repeats.to_string(),
        ])?;
    }
    writer.flush()?;

    let json_path = csv_path.with_extension("json");
    let doc = json!({
        "method": report.method.as_str(),
        "repeats": report.repeats,
        "diagnostics": report.diagnostics,
        "values": feature_names
            .iter()
            .zip(&report.values)
            .map(|(name, value)| json!({ "feature": name, "value": value }))
            .collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(&json_path, text)?;
    Ok(json_path)
}

pub fn cmd_importance(params: ImportanceParams) -> anyhow::Result<()> {
    let model = BoostedModel::load(&params.model)?;
    let mut manifest = ManifestBuilder::new(
        "importance",
        params.seed,
        json!({
            "method": params.method,
            "repeats": params.repeats,
            "metric": params.metric,
        }),
    );
    manifest.record_input(&params.model)?;

    let load_oob = |manifest: &mut ManifestBuilder| -> anyhow::Result<Dataset<f64>> {
        let path = params.oob.as_ref().expect("clap enforces --oob");
        let target = params
            .target
            .as_ref()
            .expect("clap enforces --target with --oob");
        manifest.record_input(path)?;
        let ds = load_csv(path, target, &model_categoricals(&model))?;
        align_to_model(&ds, &model)
    };

    let report = match params.method.as_str() {
        "gain" => gain_importance(&model)?,
        "unbiased" => {
            let oob = load_oob(&mut manifest)?;
            unbiased_gain(&model, &oob, params.repeats, params.seed)?
        }
        "permutation" => {
            let oob = load_oob(&mut manifest)?;
            let metric = match params.metric.as_deref() {
                Some("auc") => PermutationMetric::Auc,
                Some("rmse") => PermutationMetric::Rmse,
                Some(other) => bail!("unknown metric `{other}` (expected auc or rmse)"),
                None => match model.loss {
                    LossKind::Logistic => PermutationMetric::Auc,
                    LossKind::SquaredError => PermutationMetric::Rmse,
                },
            };
            permutation_importance(&model, &oob, metric, params.repeats, params.seed)?
        }
        other => bail!("unknown method `{other}` (expected gain, unbiased or permutation)"),
    };

    let feature_names: Vec<String> = model.features.iter().map(|f| f.name.clone()).collect();
    let json_path = write_importance_report(&report, &feature_names, &params.out)?;
    manifest.record_output(&params.out);
    manifest.record_output(&json_path);
    let manifest_path = manifest.write(&params.out)?;
    println!("report: {}", params.out.display());
    println!("report_json: {}", json_path.display());
    println!("manifest: {}", manifest_path.display());
    println!("diagnostics: {} skipped split evaluations", report.diagnostics);
    Ok(())
}

pub struct SelectParams {
    pub train: PathBuf,
    pub test: PathBuf,
    pub target: String,
    pub categorical: Vec<String>,
    pub methods: Vec<String>,
    pub top_percents: Vec<usize>,
    pub out: PathBuf,
    pub config: GBMConfig<f64>,
}

pub fn cmd_select_features(params: SelectParams) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::new(
        "select-features",
        params.config.seed,
        json!({
            "config": serde_json::to_value(&params.config)?,
            "methods": params.methods,
            "top_percents": params.top_percents,
        }),
    );
    manifest.record_input(&params.train)?;
    manifest.record_input(&params.test)?;

    let cats = categorical_set(&params.categorical);
    let train: Dataset<f64> = load_csv(&params.train, &params.target, &cats)?;
    let test_raw: Dataset<f64> = load_csv(&params.test, &params.target, &cats)?;
    // Align the test columns to the training header order.
    let mut keep = Vec::with_capacity(train.n_features());
    for name in train.feature_names() {
        let idx = test_raw
            .feature_names()
            .iter()
            .position(|n| n == name)
            .with_context(|| format!("test data is missing feature `{name}`"))?;
        keep.push(idx);
    }
    let test = test_raw.select_features(&keep);

    let methods: Vec<SelectionMethod> = params
        .methods
        .iter()
        .map(|m| m.parse().map_err(anyhow::Error::msg))
        .collect::<anyhow::Result<_>>()?;
    let runs: Vec<SelectionRun> = select_features(
        &train,
        &test,
        &methods,
        &params.top_percents,
        &params.config,
        params.config.seed,
    )?;

    let mut writer = csv::Writer::from_path(&params.out)?;
    writer.write_record(["method", "top_percent", "auc", "kept_features"])?;
    for run in &runs {
        let kept_names: Vec<&str> = run
            .kept
            .iter()
            .map(|&j| train.feature_names()[j].as_str())
            .collect();
        writer.write_record([
            run.method.as_str().to_string(),
            run.top_percent.to_string(),
            format!("{}", run.auc),
            kept_names.join(";"),
        ])?;
    }
    writer.flush()?;
    manifest.record_output(&params.out);
    let manifest_path = manifest.write(&params.out)?;
    println!("report: {}", params.out.display());
    println!("manifest: {}", manifest_path.display());
    Ok(())
}

pub struct DemoBiasParams {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn cmd_demo_bias(params: DemoBiasParams) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::new(
        "demo-bias",
        params.seed,
        json!({ "n": params.n, "trials": params.trials }),
    );
    let result = demo_bias(params.n, params.trials, params.seed);

    let mut writer = csv::Writer::from_path(&params.out)?;
    writer.write_record(["trial", "gain"])?;
    for (trial, gain) in result.gains.iter().enumerate() {
        writer.write_record([trial.to_string(), format!("{gain}")])?;
    }
    writer.flush()?;
    manifest.record_output(&params.out);

    let summary_path = summary_path_for(&params.out);
    let mut writer = csv::Writer::from_path(&summary_path)?;
    writer.write_record(["metric", "value"])?;
    writer.write_record(["mean", &format!("{}", result.mean)])?;
    writer.write_record(["se", &format!("{}", result.se)])?;
    writer.write_record(["theory", &format!("{}", result.theory)])?;
    writer.flush()?;
    manifest.record_output(&summary_path);

    let manifest_path = manifest.write(&params.out)?;
    println!("trials: {}", params.out.display());
    println!("summary: {}", summary_path.display());
    println!("manifest: {}", manifest_path.display());
    println!(
        "mean: {} se: {} theory: {}",
        result.mean, result.se, result.theory
    );
    Ok(())
}

fn summary_path_for(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().to_string());
    match (out.parent(), stem) {
        (Some(parent), Some(stem)) => parent.join(format!("{stem}_summary.csv")),
        _ => PathBuf::from("summary.csv"),
    }
}

pub struct DemoExample1Params {
    pub repetitions: usize,
    pub n: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub fn cmd_demo_example1(params: DemoExample1Params) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::new(
        "demo-example1",
        params.seed,
        json!({ "repetitions": params.repetitions, "n": params.n }),
    );
    fs::create_dir_all(&params.out_dir)?;
    let result = demo_example1(params.repetitions, params.n, params.seed)?;

    let feature_names = ["X1", "X2", "X3"];
    let write_long = |path: &Path, method: &str, rows: &[[f64; 3]]| -> anyhow::Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["repetition", "feature", "method", "value"])?;
        for (rep, values) in rows.iter().enumerate() {
            for (feature, value) in feature_names.iter().zip(values) {
                writer.write_record([
                    rep.to_string(),
                    feature.to_string(),
                    method.to_string(),
                    format!("{value}"),
                ])?;
            }
        }
        writer.flush()?;
        Ok(())
    };

    let gain_path = params.out_dir.join("example1_gain.csv");
    let unbiased_path = params.out_dir.join("example1_unbiased.csv");
    write_long(&gain_path, "gain", &result.gain)?;
    write_long(&unbiased_path, "unbiased", &result.unbiased)?;
    manifest.record_output(&gain_path);
    manifest.record_output(&unbiased_path);
    let manifest_path = manifest.write(&params.out_dir.join("example1"))?;
    println!("gain: {}", gain_path.display());
    println!("unbiased: {}", unbiased_path.display());
    println!("manifest: {}", manifest_path.display());
    Ok(())
}

/// `Mode` re-exported for arg parsing.
pub fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

pub fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse()
}

pub fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected a:b:c, got `{s}`"));
    }
    let mut ratios = [0.0f64; 3];
    for (slot, part) in ratios.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("`{part}` is not a number"))?;
    }
    Ok(ratios)
}
